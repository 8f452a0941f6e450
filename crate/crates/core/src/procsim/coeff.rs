use serde::{Deserialize, Serialize};

use super::triplet::JumpSize;
use crate::error::{Error, Result};

/// A continuous state-dependent coefficient `x -> c(x)`, given as a small
/// expression tree.
///
/// In JSON a bare number is a constant, `{"poly": [c0, c1, ...]}` is the
/// polynomial `c0 + c1 x + ...`, `{"table": {"x": [...], "y": [...]}}` is a
/// piecewise-linear table held flat outside its range, and `{"sum": [...]}` /
/// `{"product": [...]}` combine coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Polynomial { poly: Vec<f64> },
    Tabulated { table: Table },
    Sum { sum: Vec<Coefficient> },
    Product { product: Vec<Coefficient> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant(0.0)
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

impl Coefficient {
    pub fn poly(coefficients: impl Into<Vec<f64>>) -> Self {
        Coefficient::Polynomial {
            poly: coefficients.into(),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Polynomial { poly } => poly.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Coefficient::Tabulated { table } => {
                let (xs, ys) = (&table.x, &table.y);
                if x <= xs[0] {
                    return ys[0];
                }
                let last = xs.len() - 1;
                if x >= xs[last] {
                    return ys[last];
                }
                let i = xs.partition_point(|&k| k <= x);
                let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                ys[i - 1] + w * (ys[i] - ys[i - 1])
            }
            Coefficient::Sum { sum } => sum.iter().map(|c| c.eval(x)).sum(),
            Coefficient::Product { product } => product.iter().map(|c| c.eval(x)).product(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Coefficient::Constant(c) if !c.is_finite() => {
                Err(Error::validation(format!("constant coefficient {c} is not finite")))
            }
            Coefficient::Polynomial { poly } if poly.iter().any(|c| !c.is_finite()) => {
                Err(Error::validation("polynomial coefficients must be finite"))
            }
            Coefficient::Tabulated { table } => {
                if table.x.len() != table.y.len() || table.x.is_empty() {
                    return Err(Error::validation("table needs matching, nonempty x and y"));
                }
                if table.x.iter().chain(&table.y).any(|v| !v.is_finite()) {
                    return Err(Error::validation("table entries must be finite"));
                }
                if table.x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::validation("table x must be strictly increasing"));
                }
                Ok(())
            }
            Coefficient::Sum { sum: parts } | Coefficient::Product { product: parts } => {
                parts.iter().try_for_each(Coefficient::validate)
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Coefficient::Constant(c) if *c == 0.0)
    }
}

/// Jump component with a state-dependent rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJump {
    pub rate: Coefficient,
    pub size: JumpSize,
}

/// State-dependent differential characteristics `(ell(x), Q(x), N(x, dy))`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffChar {
    #[serde(rename = "ell", default)]
    pub drift: Coefficient,
    #[serde(rename = "Q", default)]
    pub diffusion: Coefficient,
    #[serde(rename = "N", default)]
    pub jumps: Vec<StateJump>,
}

/// Coefficients of a [`DiffChar`] frozen at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenChar<'a> {
    pub drift: f64,
    pub diffusion: f64,
    pub jumps: Vec<(f64, &'a JumpSize)>,
}

impl DiffChar {
    pub fn validate(&self) -> Result<()> {
        self.drift.validate()?;
        self.diffusion.validate()?;
        for jump in &self.jumps {
            jump.rate.validate()?;
            jump.size.validate()?;
        }
        Ok(())
    }

    /// Evaluates all coefficients at `x`, failing on a negative diffusion
    /// coefficient or rate.
    pub fn freeze(&self, x: f64) -> Result<FrozenChar<'_>> {
        let diffusion = self.diffusion.eval(x);
        if !(diffusion >= 0.0) {
            return Err(Error::runtime(format!("Q(x) = {diffusion} < 0 at x = {x}")));
        }
        let drift = self.drift.eval(x);
        if !drift.is_finite() {
            return Err(Error::runtime(format!("ell(x) is not finite at x = {x}")));
        }
        let jumps = self
            .jumps
            .iter()
            .map(|j| {
                let rate = j.rate.eval(x);
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::runtime(format!("jump rate {rate} invalid at x = {x}")));
                }
                Ok((rate, &j.size))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FrozenChar {
            drift,
            diffusion,
            jumps,
        })
    }
}
