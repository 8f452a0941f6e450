//! Generalized Blumenthal–Getoor index from symbol evaluations, and the
//! path-growth diagnostic it is supposed to control.
//!
//! `H(R) = sup_y sup_{|eps| <= 1} |p(y, eps / R)|` is sampled over a finite
//! state window, `beta0` is the negated tail slope of `log H` against
//! `log R`, and the growth table lists `t^(-1/lambda) sup_{s <= t} |X_s - x|`.

use std::fmt;
use std::io::{Read, Write};
use std::ops::ControlFlow;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::procsim::{det_family_eval, DetFamily, ProcessSpec, Simulator, TimeGrid};
use crate::rng::path_rng;

/// Frequencies probed inside the unit ball, in units of `1/R`.
pub const PROBE_EPSILONS: [f64; 4] = [-1.0, -0.5, 0.5, 1.0];

/// Points in the default state window.
pub const DEFAULT_WINDOW_POINTS: usize = 41;

/// `n` equispaced points spanning `[lo, hi]`.
pub fn state_window(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) || n == 0 {
        return Err(Error::validation(format!(
            "bad state window [{lo}, {hi}] with {n} points"
        )));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let span = hi - lo;
    Ok((0..n).map(|i| lo + span * i as f64 / (n - 1) as f64).collect())
}

/// `count` radii `r0 * ratio^n`.
pub fn geometric_grid(r0: f64, ratio: f64, count: usize) -> Result<Vec<f64>> {
    if !(r0 > 0.0 && r0.is_finite() && ratio > 1.0 && ratio.is_finite()) {
        return Err(Error::validation(format!(
            "R grid needs r0 > 0 and ratio > 1, got {r0}, {ratio}"
        )));
    }
    Ok((0..count).map(|n| r0 * ratio.powi(n as i32)).collect())
}

/// `H(R)`: the largest `|symbol(y, eps / R)|` over the window and the probe
/// set [`PROBE_EPSILONS`].
pub fn h_of_r<F>(mut symbol: F, window: &[f64], r: f64) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<Complex64>,
{
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("R must be positive, got {r}")));
    }
    if window.is_empty() {
        return Err(Error::domain("state window is empty"));
    }
    let mut h: f64 = 0.0;
    for &y in window {
        for eps in PROBE_EPSILONS {
            let v = symbol(y, eps / r)?.norm();
            if !v.is_finite() {
                return Err(Error::runtime(format!(
                    "symbol at y = {y}, xi = {} is not finite",
                    eps / r
                )));
            }
            h = h.max(v);
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HSample {
    pub r: f64,
    pub h: f64,
}

/// `H(R)` at every radius in `rs`.
pub fn h_samples<F>(mut symbol: F, window: &[f64], rs: &[f64]) -> Result<Vec<HSample>>
where
    F: FnMut(f64, f64) -> Result<Complex64>,
{
    rs.iter()
        .map(|&r| {
            Ok(HSample {
                r,
                h: h_of_r(&mut symbol, window, r)?,
            })
        })
        .collect()
}

/// Fitted index; `Infinite` when `H` vanishes on the tail, so every `lambda`
/// qualifies. Serialized as a number or the string `"infinity"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta0 {
    Finite(f64),
    Infinite,
}

impl Beta0 {
    pub fn finite(self) -> Option<f64> {
        match self {
            Beta0::Finite(v) => Some(v),
            Beta0::Infinite => None,
        }
    }
}

impl fmt::Display for Beta0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta0::Finite(v) => write!(f, "{v}"),
            Beta0::Infinite => f.write_str("infinity"),
        }
    }
}

impl Serialize for Beta0 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Beta0::Finite(v) => s.serialize_f64(*v),
            Beta0::Infinite => s.serialize_str("infinity"),
        }
    }
}

impl<'de> Deserialize<'de> for Beta0 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Beta0::Finite(v)),
            Repr::Word(w) if w == "infinity" => Ok(Beta0::Infinite),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"infinity\", got {w:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta0Fit {
    pub beta0: Beta0,
    /// Least-squares slope of `log H` against `log R` on the tail; NaN when
    /// `beta0` is infinite.
    pub slope: f64,
    /// Largest absolute residual of the tail fit, in natural-log units.
    pub residual: f64,
    /// Number of tail samples used.
    pub tail: usize,
}

/// Minimum number of `(R, H)` samples accepted by [`beta0`].
pub const MIN_SAMPLES: usize = 8;

/// Fits `beta0` from samples on a geometric `R` grid (ratio at least 2).
///
/// The line is fitted to `log(H / H_ref)` over the largest-`R` half of the
/// samples, `H_ref` being the first tail sample, so rescaling every `H` by a
/// power of two leaves the result bit-for-bit unchanged. A positive slope
/// gives `beta0 = 0`.
pub fn beta0(samples: &[HSample]) -> Result<Beta0Fit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::validation(format!(
            "beta0 needs at least {MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    for (i, s) in samples.iter().enumerate() {
        if !(s.r > 0.0 && s.r.is_finite()) {
            return Err(Error::validation(format!("R[{i}] = {} is not positive", s.r)));
        }
        if !(s.h >= 0.0 && s.h.is_finite()) {
            return Err(Error::validation(format!("H[{i}] = {} must be finite and >= 0", s.h)));
        }
    }
    let ratio = samples[1].r / samples[0].r;
    if !(ratio >= 2.0 * (1.0 - 1e-12)) {
        return Err(Error::validation(format!("R grid ratio {ratio} is below 2")));
    }
    if let Some(i) = (1..samples.len()).find(|&i| ((samples[i].r / samples[i - 1].r) / ratio - 1.0).abs() > 1e-9) {
        return Err(Error::validation(format!("R grid is not geometric at index {i}")));
    }

    let tail = &samples[samples.len() / 2..];
    let zeros = tail.iter().filter(|s| s.h == 0.0).count();
    if zeros == tail.len() {
        return Ok(Beta0Fit {
            beta0: Beta0::Infinite,
            slope: f64::NAN,
            residual: 0.0,
            tail: tail.len(),
        });
    }
    if zeros > 0 {
        return Err(Error::validation(
            "H vanishes at some but not all tail radii; no power law to fit",
        ));
    }

    let (r_ref, h_ref) = (tail[0].r, tail[0].h);
    let xs: Vec<f64> = tail.iter().map(|s| (s.r / r_ref).ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|s| (s.h / h_ref).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).abs())
        .fold(0.0, f64::max);
    Ok(Beta0Fit {
        beta0: Beta0::Finite((-slope).max(0.0)),
        slope,
        residual,
        tail: tail.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthVerdict {
    Grows,
    Decays,
    Flat,
}

impl GrowthVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            GrowthVerdict::Grows => "grows",
            GrowthVerdict::Decays => "decays",
            GrowthVerdict::Flat => "flat",
        }
    }
}

impl FromStr for GrowthVerdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grows" => Ok(GrowthVerdict::Grows),
            "decays" => Ok(GrowthVerdict::Decays),
            "flat" => Ok(GrowthVerdict::Flat),
            _ => Err(Error::validation(format!("unknown growth verdict {s:?}"))),
        }
    }
}

/// Ratio each of the last three values must beat to count as growth.
pub const GROWS_RATIO: f64 = 1.1;
/// Ratio each of the last three values must stay under to count as decay.
pub const DECAYS_RATIO: f64 = 0.9;

/// Verdict on a sequence of scaled suprema: all zero decays; otherwise the
/// last three values decide.
pub fn growth_verdict(values: &[f64]) -> GrowthVerdict {
    if !values.is_empty() && values.iter().all(|&v| v == 0.0) {
        return GrowthVerdict::Decays;
    }
    if values.len() < 3 {
        return GrowthVerdict::Flat;
    }
    let tail = &values[values.len() - 3..];
    if tail.windows(2).all(|w| w[0] > 0.0 && w[1] >= GROWS_RATIO * w[0]) {
        GrowthVerdict::Grows
    } else if tail.windows(2).all(|w| w[1] <= DECAYS_RATIO * w[0]) {
        GrowthVerdict::Decays
    } else {
        GrowthVerdict::Flat
    }
}

/// Where the paths of [`path_growth`] come from.
#[derive(Debug, Clone, Copy)]
pub enum PathSource<'a> {
    /// One deterministic trajectory, sampled on a grid of step `step`.
    Family { family: DetFamily, step: f64 },
    /// Median over `n_paths` simulated paths.
    Ensemble {
        spec: &'a ProcessSpec,
        n_paths: u64,
        seed: u64,
        step: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub lambda: f64,
    pub t: f64,
    /// `t^(-1/lambda)` times the (median) running supremum of `|X - x|`.
    pub scaled_sup: f64,
    /// Verdict for this row's `lambda`.
    pub verdict: GrowthVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    /// Running supremum at each `t` (median across paths for ensembles).
    pub sup: Vec<f64>,
    pub rows: Vec<GrowthRow>,
}

impl GrowthTable {
    pub fn verdict(&self, lambda: f64) -> Option<GrowthVerdict> {
        self.rows.iter().find(|r| r.lambda == lambda).map(|r| r.verdict)
    }
}

/// Grid through every point of `ts` with steps at most `step`.
fn growth_grid(ts: &[f64], step: f64) -> Result<(TimeGrid, Vec<usize>)> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::validation(format!("grid step must be positive, got {step}")));
    }
    let mut times = vec![0.0];
    let mut marks = Vec::with_capacity(ts.len());
    let mut prev = 0.0;
    for &t in ts {
        let n = ((t - prev) / step).ceil().max(1.0) as usize;
        for i in 1..n {
            times.push(prev + (t - prev) * i as f64 / n as f64);
        }
        times.push(t);
        marks.push(times.len() - 1);
        prev = t;
    }
    Ok((TimeGrid::new(times)?, marks))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Running supremum of `|X_s - x|` at each `t` in `ts`, for one path.
fn running_sup(sim: &Simulator<'_>, seed: u64, path: u64, ts: &[f64]) -> Result<Vec<f64>> {
    let x = sim.start();
    let mut rng = path_rng(seed, path);
    let mut sup: f64 = 0.0;
    let mut out = Vec::with_capacity(ts.len());
    sim.walk(&mut rng, |t, state, _| {
        // jump points sit strictly inside grid steps, so a mark is only
        // passed by the grid point equal to it
        while out.len() < ts.len() && ts[out.len()] < t {
            out.push(sup);
        }
        sup = sup.max((state - x).abs());
        if out.len() < ts.len() && ts[out.len()] == t {
            out.push(sup);
        }
        ControlFlow::Continue(())
    })?;
    while out.len() < ts.len() {
        out.push(sup);
    }
    Ok(out)
}

/// Tabulates `t^(-1/lambda) sup_{s <= t} |X_s - x|` for every `lambda` and
/// `t`, with a verdict per `lambda`.
pub fn path_growth(source: PathSource<'_>, x: f64, lambdas: &[f64], ts: &[f64]) -> Result<GrowthTable> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::domain(format!("lambda must be in (0, inf), got {l}")));
    }
    if ts.is_empty() || !(ts[0] > 0.0) || ts.windows(2).any(|w| !(w[1] > w[0])) || !ts[ts.len() - 1].is_finite() {
        return Err(Error::domain("t list must be positive and strictly increasing"));
    }

    let sup = match source {
        PathSource::Family { family, step } => {
            let (grid, marks) = growth_grid(ts, step)?;
            let mut sup: f64 = 0.0;
            let mut out = Vec::with_capacity(ts.len());
            let mut next = 0;
            for (i, &t) in grid.times().iter().enumerate() {
                sup = sup.max((det_family_eval(family, x, t)? - x).abs());
                if next < marks.len() && marks[next] == i {
                    out.push(sup);
                    next += 1;
                }
            }
            out
        }
        PathSource::Ensemble {
            spec,
            n_paths,
            seed,
            step,
        } => {
            if n_paths == 0 {
                return Err(Error::domain("ensemble needs at least one path"));
            }
            let (grid, _) = growth_grid(ts, step)?;
            let sim = Simulator::new(spec, x, &grid)?;
            let per_path = (0..n_paths)
                .into_par_iter()
                .map(|p| running_sup(&sim, seed, p, ts))
                .collect::<Result<Vec<_>>>()?;
            (0..ts.len())
                .map(|j| median(&mut per_path.iter().map(|s| s[j]).collect::<Vec<_>>()))
                .collect()
        }
    };

    let mut rows = Vec::with_capacity(lambdas.len() * ts.len());
    for &lambda in lambdas {
        let scaled: Vec<f64> = ts.iter().zip(&sup).map(|(t, s)| t.powf(-1.0 / lambda) * s).collect();
        let verdict = growth_verdict(&scaled);
        rows.extend(ts.iter().zip(scaled).map(|(&t, scaled_sup)| GrowthRow {
            lambda,
            t,
            scaled_sup,
            verdict,
        }));
    }
    Ok(GrowthTable { sup, rows })
}

/// `H(R)` samples, the fitted index and the growth diagnostic of one
/// experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub samples: Vec<HSample>,
    pub beta0: Beta0,
    pub slope: f64,
    pub residual: f64,
    /// States over which the supremum in `H(R)` was taken.
    pub window: Vec<f64>,
    pub growth: Vec<GrowthRow>,
}

impl IndexReport {
    pub fn new(samples: Vec<HSample>, fit: Beta0Fit, window: Vec<f64>, growth: Vec<GrowthRow>) -> Self {
        IndexReport {
            samples,
            beta0: fit.beta0,
            slope: fit.slope,
            residual: fit.residual,
            window,
            growth,
        }
    }

    /// Checks the report invariants: `R` strictly increasing, `H >= 0` and
    /// `beta0 >= 0`.
    pub fn validate(&self) -> Result<()> {
        if self.samples.windows(2).any(|w| !(w[1].r > w[0].r)) {
            return Err(Error::validation("R samples must be strictly increasing"));
        }
        if self.samples.iter().any(|s| !(s.h >= 0.0)) {
            return Err(Error::validation("H samples must be >= 0"));
        }
        if let Beta0::Finite(b) = self.beta0 {
            if !(b >= 0.0) {
                return Err(Error::validation(format!("beta0 = {b} is negative")));
            }
        }
        Ok(())
    }
}

pub const GROWTH_TABLE_HEADER: [&str; 4] = ["lambda", "t", "scaled_sup", "verdict"];

pub fn write_growth_csv<W: Write>(writer: W, rows: &[GrowthRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(GROWTH_TABLE_HEADER)?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.t.to_string(),
            r.scaled_sup.to_string(),
            r.verdict.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_growth_csv<R: Read>(reader: R) -> Result<Vec<GrowthRow>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(GROWTH_TABLE_HEADER) {
        return Err(Error::validation("unexpected growth table header"));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let num = |i: usize| {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| Error::validation(format!("bad {} in growth row {rec:?}", GROWTH_TABLE_HEADER[i])))
            };
            Ok(GrowthRow {
                lambda: num(0)?,
                t: num(1)?,
                scaled_sup: num(2)?,
                verdict: rec[3].parse()?,
            })
        })
        .collect()
}
