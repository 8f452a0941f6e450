use serde::{Deserialize, Serialize};

use super::coeff::Coefficient;
use crate::error::{Error, Result};
use crate::singular::StaircaseFunction;

/// Operational clock `F(t)` driving a clock-changed process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClockSpec {
    /// `F(t) = t`.
    Identity {},
    /// `dF = g(X) dt` with `g >= 0`.
    AcOfState { g: Coefficient },
    /// Deterministic increasing function of real time.
    Staircase { function: StaircaseFunction },
}

impl ClockSpec {
    pub fn cantor() -> Self {
        ClockSpec::Staircase {
            function: StaircaseFunction::cantor_extended(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClockSpec::Identity {} => Ok(()),
            ClockSpec::AcOfState { g } => g.validate(),
            ClockSpec::Staircase { function } => {
                function.validate()?;
                if function.domain().0 > 0.0 {
                    return Err(Error::validation("staircase clock must be defined from t = 0"));
                }
                Ok(())
            }
        }
    }

    /// Operational increments `F(t_{k+1}) - F(t_k)` of a deterministic clock
    /// on `times`; `None` for state-driven clocks.
    pub fn increments(&self, times: &[f64]) -> Result<Option<Vec<f64>>> {
        match self {
            ClockSpec::Identity {} => Ok(Some(times.windows(2).map(|w| w[1] - w[0]).collect())),
            ClockSpec::AcOfState { .. } => Ok(None),
            ClockSpec::Staircase { function } => {
                let (lo, hi) = function.domain();
                let end = *times.last().unwrap();
                if times[0] < lo || end > hi {
                    return Err(Error::validation(format!(
                        "clock {function} defined on [{lo}, {hi}] does not cover [0, {end}]"
                    )));
                }
                let values = times.iter().map(|&t| function.eval(t)).collect::<Result<Vec<_>>>()?;
                values
                    .windows(2)
                    .enumerate()
                    .map(|(k, w)| {
                        let d = w[1] - w[0];
                        if d < 0.0 {
                            Err(Error::validation(format!(
                                "clock decreases on [{}, {}]",
                                times[k],
                                times[k + 1]
                            )))
                        } else {
                            Ok(d)
                        }
                    })
                    .collect::<Result<Vec<_>>>()
                    .map(Some)
            }
        }
    }
}
