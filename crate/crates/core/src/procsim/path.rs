use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing simulation times starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::validation("time grid must start at 0"));
        }
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(Error::validation(format!("time grid entry {i} is not finite")));
        }
        if let Some(i) = (1..times.len()).find(|&i| times[i] <= times[i - 1]) {
            return Err(Error::validation(format!(
                "time grid must be strictly increasing (index {i})"
            )));
        }
        Ok(Self { times })
    }

    /// `steps + 1` points `end * i / steps`; the last point is exactly `end`.
    pub fn uniform(end: f64, steps: usize) -> Result<Self> {
        if !(end > 0.0 && end.is_finite()) || steps == 0 {
            return Err(Error::validation(format!(
                "uniform grid needs end > 0 and steps > 0, got {end}, {steps}"
            )));
        }
        let n = steps as f64;
        Self::new((0..=steps).map(|i| end * i as f64 / n).collect())
    }

    /// Uniform grid on `[0, end]` with step at most `max_step`.
    pub fn covering(end: f64, max_step: f64) -> Result<Self> {
        if !(max_step > 0.0) {
            return Err(Error::validation("max step must be positive"));
        }
        let steps = (end / max_step).ceil().max(1.0) as usize;
        Self::uniform(end, steps)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn max_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// One simulated trajectory. Jump times are recorded as extra grid points,
/// holding the post-jump state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub jump_times: Vec<f64>,
    /// `None` for deterministic families.
    pub seed: Option<u64>,
    pub path_index: u64,
    pub fingerprint: String,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> f64 {
        *self.states.last().unwrap()
    }

    /// State at the last recorded time `<= t`.
    pub fn state_at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&s| s <= t);
        self.states[i.saturating_sub(1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ExitTime {
    /// First recorded point with `|X - x| > k`.
    At { index: usize, time: f64 },
    /// The path never left the ball.
    EndOfPath,
}

impl ExitTime {
    pub fn time(&self) -> Option<f64> {
        match self {
            ExitTime::At { time, .. } => Some(*time),
            ExitTime::EndOfPath => None,
        }
    }
}

/// First recorded time with `|state - x| > k` (strict).
pub fn first_exit_time(path: &PathSample, x: f64, k: f64) -> ExitTime {
    path.states
        .iter()
        .position(|s| (s - x).abs() > k)
        .map_or(ExitTime::EndOfPath, |index| ExitTime::At {
            index,
            time: path.times[index],
        })
}

/// Writes paths as CSV rows `path_id,t,x`.
pub fn write_paths_csv<W: Write>(writer: W, paths: &[PathSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["path_id", "t", "x"])?;
    for p in paths {
        for (t, x) in p.times.iter().zip(&p.states) {
            w.write_record([p.path_index.to_string(), t.to_string(), x.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `path_id,t,x` rows back into `(path_id, t, x)` triples.
pub fn read_paths_csv<R: Read>(reader: R) -> Result<Vec<(u64, f64, f64)>> {
    let mut r = csv::Reader::from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path_id", "t", "x"] {
        return Err(Error::validation(format!("unexpected path CSV header {headers:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let bad = || Error::validation(format!("malformed path row {rec:?}"));
            Ok((
                rec[0].parse().map_err(|_| bad())?,
                rec[1].parse().map_err(|_| bad())?,
                rec[2].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}
