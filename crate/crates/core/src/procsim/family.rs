use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deterministic Markov families `x -> f_x(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetFamily {
    /// `f_x(t) = floor(x) + frac(x + t)`: unit drift, reset to `floor(x)`
    /// just before reaching `floor(x) + 1`.
    Sawtooth,
    /// The canonical path `f(u) = floor(u)^2 + frac(u) / 2` (slope 1/2, jumps
    /// onto the squares), shifted in time; defined only on its orbit
    /// `{m^2 + s/2 : m in N0, s in [0, 1)}`.
    Quadratic,
}

/// Anything that maps a start point and a time to a state.
pub trait Family {
    fn eval(&self, x: f64, t: f64) -> Result<f64>;
}

impl<F: Fn(f64, f64) -> f64> Family for F {
    fn eval(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self(x, t))
    }
}

impl Family for DetFamily {
    fn eval(&self, x: f64, t: f64) -> Result<f64> {
        det_family_eval(*self, x, t)
    }
}

fn frac(v: f64) -> f64 {
    v - v.floor()
}

fn quadratic_path(u: f64) -> f64 {
    let m = u.floor();
    m * m + frac(u) / 2.0
}

impl DetFamily {
    /// Position `(m, s)` of an orbit point `x = m^2 + s/2` of the quadratic
    /// family.
    pub fn quadratic_decode(x: f64) -> Result<(u64, f64)> {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::domain(format!(
                "x = {x} is off the quadratic orbit (need m^2 <= x < m^2 + 1/2 for some integer m >= 0)"
            )));
        }
        let mut m = x.sqrt().floor() as u64;
        while (m * m) as f64 > x {
            m -= 1;
        }
        while ((m + 1) * (m + 1)) as f64 <= x {
            m += 1;
        }
        let offset = x - (m * m) as f64;
        if offset >= 0.5 {
            return Err(Error::domain(format!(
                "x = {x} is off the quadratic orbit (need m^2 <= x < m^2 + 1/2; here m = {m})"
            )));
        }
        Ok((m, 2.0 * offset))
    }

    pub fn in_domain(&self, x: f64) -> bool {
        match self {
            DetFamily::Sawtooth => x.is_finite(),
            DetFamily::Quadratic => Self::quadratic_decode(x).is_ok(),
        }
    }

    /// Probe points with step `1/denominator` covering `[lo, hi]`, restricted
    /// to the family's domain.
    pub fn probe_points(&self, lo: f64, hi: f64, denominator: u32) -> Vec<f64> {
        let d = denominator as f64;
        let start = (lo * d).ceil() as i64;
        let end = (hi * d).floor() as i64;
        (start..=end)
            .map(|j| j as f64 / d)
            .filter(|&x| self.in_domain(x))
            .collect()
    }
}

/// Evaluates `f_x(t)` for a deterministic family.
pub fn det_family_eval(family: DetFamily, x: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time {t} must be >= 0")));
    }
    match family {
        DetFamily::Sawtooth => {
            if !x.is_finite() {
                return Err(Error::domain(format!("start {x} is not finite")));
            }
            Ok(x.floor() + frac(x + t))
        }
        DetFamily::Quadratic => {
            let (m, s) = DetFamily::quadratic_decode(x)?;
            Ok(quadratic_path(m as f64 + s + t))
        }
    }
}

/// Probe set for [`check_time_homogeneity`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityProbe {
    pub starts: Vec<f64>,
    pub times: Vec<f64>,
    pub shifts: Vec<f64>,
}

/// `f_x(s) ~ f_y(t)` but `f_x(s + h)` and `f_y(t + h)` differ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityWitness {
    pub x: f64,
    pub s: f64,
    pub y: f64,
    pub t: f64,
    pub h: f64,
    pub left: f64,
    pub right: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityReport {
    pub pass: bool,
    /// Number of matched `(x, s), (y, t)` pairs that were checked.
    pub matched_pairs: usize,
    pub witness: Option<HomogeneityWitness>,
}

/// Checks the time-homogeneous Markov property of a deterministic family:
/// whenever `f_x(s)` and `f_y(t)` agree within `tol`, so must `f_x(s + h)`
/// and `f_y(t + h)` for every probed shift.
///
/// Pairs are visited with `(x, s)` in probe order as the outer loop and
/// `(y, t)` inner; the first violation is reported.
pub fn check_time_homogeneity(family: &impl Family, probe: &HomogeneityProbe, tol: f64) -> Result<HomogeneityReport> {
    let points: Vec<(f64, f64)> = probe
        .starts
        .iter()
        .flat_map(|&x| probe.times.iter().map(move |&s| (x, s)))
        .collect();
    let values = points
        .iter()
        .map(|&(x, s)| family.eval(x, s))
        .collect::<Result<Vec<_>>>()?;
    let mut matched_pairs = 0;
    for (i, &(x, s)) in points.iter().enumerate() {
        for (j, &(y, t)) in points.iter().enumerate() {
            if i == j || (values[i] - values[j]).abs() > tol {
                continue;
            }
            matched_pairs += 1;
            for &h in &probe.shifts {
                let left = family.eval(x, s + h)?;
                let right = family.eval(y, t + h)?;
                if (left - right).abs() > tol {
                    return Ok(HomogeneityReport {
                        pass: false,
                        matched_pairs,
                        witness: Some(HomogeneityWitness {
                            x,
                            s,
                            y,
                            t,
                            h,
                            left,
                            right,
                        }),
                    });
                }
            }
        }
    }
    Ok(HomogeneityReport {
        pass: true,
        matched_pairs,
        witness: None,
    })
}
