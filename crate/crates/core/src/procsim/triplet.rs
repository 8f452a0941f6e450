use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Law of a single jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpSize {
    Constant(f64),
    Uniform {
        low: f64,
        high: f64,
    },
    /// `a` with probability `p`, otherwise `b`.
    TwoPoint {
        a: f64,
        b: f64,
        p: f64,
    },
}

impl JumpSize {
    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpSize::Constant(c) if !c.is_finite() => Err(Error::validation(format!("jump size {c} is not finite"))),
            JumpSize::Uniform { low, high } if !(low.is_finite() && high.is_finite() && low < high) => Err(
                Error::validation(format!("uniform jump law needs finite low < high, got [{low}, {high}]")),
            ),
            JumpSize::TwoPoint { a, b, p } if !(a.is_finite() && b.is_finite() && (0.0..=1.0).contains(&p)) => {
                Err(Error::validation(format!(
                    "two-point jump law needs finite points and p in [0, 1], got p = {p}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpSize::Constant(c) => c,
            JumpSize::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            JumpSize::TwoPoint { a, b, p } => {
                if rng.random::<f64>() < p {
                    a
                } else {
                    b
                }
            }
        }
    }
}

/// One finite-activity component of a jump measure: jumps arrive at `rate`
/// per unit time with sizes drawn from `size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpComponent {
    pub rate: f64,
    pub size: JumpSize,
}

/// Constant-coefficient characteristics (drift, diffusion, jump measure).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyTriplet {
    #[serde(rename = "ell", default)]
    pub drift: f64,
    #[serde(rename = "Q", default)]
    pub diffusion: f64,
    #[serde(rename = "N", default)]
    pub jumps: Vec<JumpComponent>,
}

impl LevyTriplet {
    pub fn drift(drift: f64) -> Self {
        Self {
            drift,
            ..Self::default()
        }
    }

    pub fn brownian(diffusion: f64) -> Self {
        Self {
            diffusion,
            ..Self::default()
        }
    }

    pub fn compound_poisson(rate: f64, size: JumpSize) -> Self {
        Self {
            jumps: vec![JumpComponent { rate, size }],
            ..Self::default()
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.jumps.iter().map(|j| j.rate).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.drift.is_finite() {
            return Err(Error::validation(format!("drift {} is not finite", self.drift)));
        }
        if !(self.diffusion >= 0.0 && self.diffusion.is_finite()) {
            return Err(Error::validation(format!(
                "diffusion coefficient Q must be finite and >= 0, got {}",
                self.diffusion
            )));
        }
        for (i, jump) in self.jumps.iter().enumerate() {
            if !(jump.rate >= 0.0 && jump.rate.is_finite()) {
                return Err(Error::validation(format!(
                    "jump component {i}: rate must be finite and >= 0, got {}",
                    jump.rate
                )));
            }
            jump.size.validate()?;
        }
        Ok(())
    }
}
