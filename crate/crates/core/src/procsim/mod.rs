//! Path samplers for Lévy processes, Lévy-type processes with state-dependent
//! characteristics, clock-changed processes and deterministic Markov families.
//!
//! All randomness flows from `(seed, path index)` through [`crate::rng`], so a
//! path is bit-identical no matter how many worker threads produced it.

mod clock;
mod coeff;
mod engine;
mod family;
mod path;
mod triplet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use clock::ClockSpec;
pub use coeff::{Coefficient, DiffChar, FrozenChar, StateJump, Table};
pub use engine::{
    simulate, simulate_clocked, simulate_ensemble, simulate_levy, simulate_levy_type, Simulator, DEFAULT_STEP,
    MAX_EULER_STEP,
};
pub use family::{
    check_time_homogeneity, det_family_eval, DetFamily, Family, HomogeneityProbe, HomogeneityReport, HomogeneityWitness,
};
pub use path::{first_exit_time, read_paths_csv, write_paths_csv, ExitTime, PathSample, TimeGrid};
pub use triplet::{JumpComponent, JumpSize, LevyTriplet};

use crate::error::Result;

/// Triplet dynamics run in the operational time of `clock`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockedProcess {
    pub triplet: LevyTriplet,
    pub clock: ClockSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub family: DetFamily,
}

/// Simulator input, tagged by `kind` in JSON.
///
/// ```json
/// {"kind": "levy", "ell": 0, "Q": 1, "N": [{"rate": 1, "size": {"constant": 2}}]}
/// {"kind": "levy_type", "ell": {"poly": [0, -1]}, "Q": 1}
/// {"kind": "clocked", "triplet": {"Q": 1}, "clock": {"kind": "staircase", "function": "affine+cantor:0,1"}}
/// {"kind": "det_family", "family": "sawtooth"}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    Levy(LevyTriplet),
    LevyType(DiffChar),
    Clocked(ClockedProcess),
    DetFamily(FamilySpec),
}

impl ProcessSpec {
    pub fn clocked(triplet: LevyTriplet, clock: ClockSpec) -> Self {
        ProcessSpec::Clocked(ClockedProcess { triplet, clock })
    }

    pub fn family(family: DetFamily) -> Self {
        ProcessSpec::DetFamily(FamilySpec { family })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::Levy(t) => t.validate(),
            ProcessSpec::LevyType(c) => c.validate(),
            ProcessSpec::Clocked(c) => {
                c.triplet.validate()?;
                c.clock.validate()
            }
            ProcessSpec::DetFamily(_) => Ok(()),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            ProcessSpec::DetFamily(_) => true,
            ProcessSpec::Levy(t) => t.diffusion == 0.0 && t.total_rate() == 0.0,
            ProcessSpec::Clocked(c) => c.triplet.diffusion == 0.0 && c.triplet.total_rate() == 0.0,
            ProcessSpec::LevyType(c) => c.diffusion.is_zero() && c.jumps.iter().all(|j| j.rate.is_zero()),
        }
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("process specs always serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}
