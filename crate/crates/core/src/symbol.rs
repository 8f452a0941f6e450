//! Analytic Lévy–Khintchine symbols and Monte Carlo estimation of the
//! probabilistic symbol
//!
//! ```text
//! p(x, xi) = -lim_{t -> 0} E^x[(exp(i xi (X_{t ∧ sigma} - x)) - 1) / t]
//! ```
//!
//! where `sigma` is the first exit time from the ball of radius `k` around `x`.
//! The limit is replaced by a geometric schedule of `t` values and a verdict:
//! `Converged` when the last three quotients agree within their statistical
//! error, `Diverged` when the last four grow geometrically.

use std::io::{Read, Write};
use std::ops::ControlFlow;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::procsim::{det_family_eval, DetFamily, DiffChar, JumpSize, LevyTriplet, ProcessSpec, Simulator, TimeGrid};
use crate::procsim::{ClockSpec, DEFAULT_STEP};
use crate::rng::{derive_seed, path_rng};

/// Minimum number of quadrature intervals per smooth piece of a uniform
/// jump law.
pub const QUADRATURE_INTERVALS: usize = 10_000;

/// Paths per deterministic accumulation block.
const CHUNK: u64 = 2048;

/// Truncation function of the jump integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cutoff {
    /// `chi(y) = 1` for `|y| <= 1`, else 0.
    #[default]
    UnitBall,
}

impl Cutoff {
    pub fn eval(self, y: f64) -> f64 {
        match self {
            Cutoff::UnitBall => {
                if y.abs() <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the cutoff jumps.
    fn breakpoints(self) -> [f64; 2] {
        match self {
            Cutoff::UnitBall => [-1.0, 1.0],
        }
    }
}

/// `exp(i theta) - 1` without cancellation for small `theta`.
fn expm1_i(theta: f64) -> Complex64 {
    let half = (0.5 * theta).sin();
    Complex64::new(-2.0 * half * half, theta.sin())
}

fn jump_integrand(xi: f64, y: f64, cutoff: Cutoff) -> Complex64 {
    expm1_i(xi * y) - Complex64::new(0.0, xi * y * cutoff.eval(y))
}

fn simpson(a: f64, b: f64, intervals: usize, f: impl Fn(f64) -> Complex64) -> Complex64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + h * i as f64) * w;
    }
    acc * (h / 3.0)
}

/// `E[exp(i xi Y) - 1 - i xi Y chi(Y)]` for one jump law.
fn jump_expectation(size: &JumpSize, xi: f64, cutoff: Cutoff) -> Complex64 {
    match *size {
        JumpSize::Constant(c) => jump_integrand(xi, c, cutoff),
        JumpSize::TwoPoint { a, b, p } => jump_integrand(xi, a, cutoff) * p + jump_integrand(xi, b, cutoff) * (1.0 - p),
        JumpSize::Uniform { low, high } => {
            // split where the cutoff is discontinuous so each piece is smooth
            let mut knots = vec![low];
            knots.extend(cutoff.breakpoints().into_iter().filter(|&c| c > low && c < high));
            knots.push(high);
            let integral: Complex64 = knots
                .windows(2)
                .map(|w| {
                    let mid_weight = cutoff.eval(0.5 * (w[0] + w[1]));
                    simpson(w[0], w[1], QUADRATURE_INTERVALS, |y| {
                        expm1_i(xi * y) - Complex64::new(0.0, xi * y * mid_weight)
                    })
                })
                .sum();
            integral / (high - low)
        }
    }
}

fn lk_from_parts<'a>(
    drift: f64,
    diffusion: f64,
    jumps: impl Iterator<Item = (f64, &'a JumpSize)>,
    xi: f64,
    cutoff: Cutoff,
) -> Complex64 {
    let mut q = Complex64::new(0.5 * xi * xi * diffusion, -drift * xi);
    for (rate, size) in jumps {
        if rate != 0.0 {
            q -= jump_expectation(size, xi, cutoff) * rate;
        }
    }
    q
}

/// Lévy–Khintchine exponent
/// `-i ell xi + xi^2 Q / 2 - sum_i rate_i E[exp(i xi Y_i) - 1 - i xi Y_i chi(Y_i)]`.
pub fn lk_eval(triplet: &LevyTriplet, xi: f64, cutoff: Cutoff) -> Result<Complex64> {
    triplet.validate()?;
    Ok(lk_from_parts(
        triplet.drift,
        triplet.diffusion,
        triplet.jumps.iter().map(|j| (j.rate, &j.size)),
        xi,
        cutoff,
    ))
}

/// Lévy–Khintchine exponent of state-dependent characteristics at `x`.
pub fn lk_eval_state(ch: &DiffChar, x: f64, xi: f64, cutoff: Cutoff) -> Result<Complex64> {
    ch.validate()?;
    let frozen = ch.freeze(x)?;
    Ok(lk_from_parts(
        frozen.drift,
        frozen.diffusion,
        frozen.jumps.iter().copied(),
        xi,
        cutoff,
    ))
}

/// Symbol of `spec` at `(x, xi)` without simulation.
///
/// Lévy and Lévy-type specs use the Lévy–Khintchine exponent; a state clock
/// `dF = g(X) dt` multiplies it by `g(x)`. Deterministic families use the
/// converged [`det_symbol`] over `det_schedule`. Singular clocks have no
/// symbol and give a domain error.
pub fn reference_symbol(spec: &ProcessSpec, x: f64, xi: f64, det_schedule: &TSchedule) -> Result<Complex64> {
    let cutoff = Cutoff::UnitBall;
    match spec {
        ProcessSpec::Levy(t) => lk_eval(t, xi, cutoff),
        ProcessSpec::LevyType(ch) => lk_eval_state(ch, x, xi, cutoff),
        ProcessSpec::Clocked(c) => match &c.clock {
            ClockSpec::Identity {} => lk_eval(&c.triplet, xi, cutoff),
            ClockSpec::AcOfState { g } => {
                let rate = g.eval(x);
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::domain(format!("clock rate g({x}) = {rate} is not a valid rate")));
                }
                Ok(lk_eval(&c.triplet, xi, cutoff)? * rate)
            }
            ClockSpec::Staircase { function } => Err(Error::domain(format!(
                "process clocked by {function} has no symbol to evaluate"
            ))),
        },
        ProcessSpec::DetFamily(f) => {
            let est = det_symbol(f.family, x, xi, det_schedule)?;
            est.value.ok_or_else(|| {
                Error::runtime(format!(
                    "deterministic quotient at x = {x}, xi = {xi} is {}",
                    est.verdict.as_str()
                ))
            })
        }
    }
}

/// Running mean and sum of squared deviations, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * other.n / n,
            m2: self.m2 + other.m2 + d * d * self.n * other.n / n,
        }
    }

    /// Standard error of the mean.
    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n - 1.0) / self.n).sqrt()
    }
}

/// One Monte Carlo quotient with its componentwise standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quotient {
    pub value: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub paths: u64,
}

impl Quotient {
    /// Modulus of the componentwise standard error.
    pub fn se(&self) -> f64 {
        self.se_re.hypot(self.se_im)
    }
}

fn check_horizon(t: f64, k: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time horizon t must be positive, got {t}")));
    }
    if !(k > 0.0) {
        return Err(Error::domain(format!("ball radius k must be positive, got {k}")));
    }
    Ok(())
}

/// Grid used for a quotient at horizon `t`: step `min(DEFAULT_STEP, t / 16)`.
pub fn quotient_grid(t: f64) -> Result<TimeGrid> {
    TimeGrid::covering(t, DEFAULT_STEP.min(t / 16.0))
}

fn stopped_state(sim: &Simulator<'_>, seed: u64, path: u64, x: f64, k: f64) -> Result<f64> {
    let mut rng = path_rng(seed, path);
    let mut last = x;
    sim.walk(&mut rng, |_, state, _| {
        last = state;
        if (state - x).abs() > k {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(last)
}

/// `-(mean of exp(i xi (X_{t ∧ sigma} - x)) - 1) / t` over `n_paths` paths
/// started at `x`, stopped on leaving the ball of radius `k`.
///
/// Paths are accumulated in fixed blocks merged in block order, so the result
/// does not depend on the number of worker threads.
pub fn mc_quotient(spec: &ProcessSpec, x: f64, xi: f64, k: f64, t: f64, n_paths: u64, seed: u64) -> Result<Quotient> {
    check_horizon(t, k)?;
    if n_paths == 0 {
        return Err(Error::domain("n_paths must be at least 1"));
    }
    let grid = quotient_grid(t)?;
    let sim = Simulator::new(spec, x, &grid)?;

    if spec.is_deterministic() {
        let end = stopped_state(&sim, seed, 0, x, k)?;
        return Ok(Quotient {
            value: -expm1_i(xi * (end - x)) / t,
            se_re: 0.0,
            se_im: 0.0,
            paths: n_paths,
        });
    }

    let blocks = n_paths.div_ceil(CHUNK);
    let partial: Vec<Result<(Moments, Moments)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut re = Moments::default();
            let mut im = Moments::default();
            for path in b * CHUNK..((b + 1) * CHUNK).min(n_paths) {
                let end = stopped_state(&sim, seed, path, x, k)?;
                let z = expm1_i(xi * (end - x));
                re.push(z.re);
                im.push(z.im);
            }
            Ok((re, im))
        })
        .collect();
    let (mut re, mut im) = (Moments::default(), Moments::default());
    for block in partial {
        let (r, i) = block?;
        re = re.merge(r);
        im = im.merge(i);
    }
    Ok(Quotient {
        value: -Complex64::new(re.mean, im.mean) / t,
        se_re: re.std_error() / t,
        se_im: im.std_error() / t,
        paths: n_paths,
    })
}

/// Geometric schedule `t0 * ratio^n`, `n = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TSchedule {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl TSchedule {
    pub fn new(t0: f64, ratio: f64, count: usize) -> Self {
        Self { t0, ratio, count }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::validation(format!(
                "schedule must start at t0 > 0, got {}",
                self.t0
            )));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::validation(format!(
                "schedule must decrease: ratio {} not in (0, 1)",
                self.ratio
            )));
        }
        if self.count == 0 {
            return Err(Error::validation("schedule needs at least one time"));
        }
        Ok(())
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        self.validate()?;
        Ok((0..self.count).map(|n| self.t0 * self.ratio.powi(n as i32)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Thresholds of the convergence / divergence verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictConfig {
    /// Absolute agreement floor for the trailing quotients.
    pub abs_tol: f64,
    /// Agreement in units of the pooled standard error.
    pub sigmas: f64,
    /// Trailing quotients that must agree.
    pub agree_points: usize,
    /// Minimum growth ratio of `|quotient|` for divergence.
    pub growth_ratio: f64,
    /// Trailing quotients that must grow.
    pub growth_points: usize,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-2,
            sigmas: 3.0,
            agree_points: 3,
            growth_ratio: 1.2,
            growth_points: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientRow {
    pub t: f64,
    #[serde(flatten)]
    pub quotient: Quotient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolEstimate {
    pub x: f64,
    pub xi: f64,
    /// Ball radius; `None` for the unstopped deterministic quotient.
    pub k: Option<f64>,
    /// Rows in schedule order (`t` strictly decreasing).
    pub rows: Vec<QuotientRow>,
    /// Error-weighted mean of the trailing quotients, present iff converged.
    pub value: Option<Complex64>,
    /// Standard error of `value`.
    pub value_se: Option<f64>,
    pub verdict: Verdict,
    pub total_paths: u64,
}

/// Applies the verdict rules to a quotient table.
pub fn classify(rows: &[QuotientRow], config: &VerdictConfig) -> (Verdict, Option<(Complex64, f64)>) {
    let m = config.agree_points.max(1);
    if rows.len() >= m {
        let tail = &rows[rows.len() - m..];
        let agree = tail.iter().enumerate().all(|(i, a)| {
            tail[i + 1..].iter().all(|b| {
                let pooled = a.quotient.se().hypot(b.quotient.se());
                (a.quotient.value - b.quotient.value).norm() < config.abs_tol.max(config.sigmas * pooled)
            })
        });
        if agree {
            return (Verdict::Converged, Some(weighted_mean(tail)));
        }
    }
    let g = config.growth_points.max(2);
    if rows.len() >= g {
        let tail = &rows[rows.len() - g..];
        let grows = tail.windows(2).all(|w| {
            let (a, b) = (w[0].quotient.value.norm(), w[1].quotient.value.norm());
            a > 0.0 && b > a && b / a >= config.growth_ratio
        });
        if grows {
            return (Verdict::Diverged, None);
        }
    }
    (Verdict::Inconclusive, None)
}

/// Inverse-variance weighted mean; equal weights when any error is zero.
fn weighted_mean(rows: &[QuotientRow]) -> (Complex64, f64) {
    if rows.iter().any(|r| r.quotient.se() == 0.0) {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.quotient.value).sum::<Complex64>() / n;
        let se = rows.iter().map(|r| r.quotient.se().powi(2)).sum::<f64>().sqrt() / n;
        return (mean, se);
    }
    let weights: Vec<f64> = rows.iter().map(|r| 1.0 / r.quotient.se().powi(2)).collect();
    let total: f64 = weights.iter().sum();
    let mean = rows
        .iter()
        .zip(&weights)
        .map(|(r, w)| r.quotient.value * *w)
        .sum::<Complex64>()
        / total;
    (mean, total.sqrt().recip())
}

fn finish(x: f64, xi: f64, k: Option<f64>, rows: Vec<QuotientRow>, config: &VerdictConfig) -> SymbolEstimate {
    let (verdict, value) = classify(&rows, config);
    SymbolEstimate {
        x,
        xi,
        k,
        total_paths: rows.iter().map(|r| r.quotient.paths).sum(),
        value: value.map(|v| v.0),
        value_se: value.map(|v| v.1),
        verdict,
        rows,
    }
}

/// Estimates the symbol at `(x, xi)` from Monte Carlo quotients along
/// `schedule`, with default verdict thresholds.
pub fn estimate_symbol(
    spec: &ProcessSpec,
    x: f64,
    xi: f64,
    k: f64,
    schedule: &TSchedule,
    n_paths: u64,
    seed: u64,
) -> Result<SymbolEstimate> {
    estimate_symbol_with(spec, x, xi, k, schedule, n_paths, seed, &VerdictConfig::default())
}

/// Paths for schedule entry `n` are drawn with the sub-seed
/// `derive_seed(seed, n)`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_symbol_with(
    spec: &ProcessSpec,
    x: f64,
    xi: f64,
    k: f64,
    schedule: &TSchedule,
    n_paths: u64,
    seed: u64,
    config: &VerdictConfig,
) -> Result<SymbolEstimate> {
    if !spec.is_deterministic() && n_paths < 1000 {
        return Err(Error::validation(format!(
            "symbol estimation needs at least 1000 paths, got {n_paths}"
        )));
    }
    let rows = schedule
        .times()?
        .into_iter()
        .enumerate()
        .map(|(n, t)| {
            Ok(QuotientRow {
                t,
                quotient: mc_quotient(spec, x, xi, k, t, n_paths, derive_seed(seed, n as u64))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(x, xi, Some(k), rows, config))
}

/// Unstopped quotient `-(exp(i xi (f_x(t) - x)) - 1) / t` of a deterministic
/// family along `schedule`.
pub fn det_symbol(family: DetFamily, x: f64, xi: f64, schedule: &TSchedule) -> Result<SymbolEstimate> {
    det_symbol_with(family, x, xi, schedule, &VerdictConfig::default())
}

pub fn det_symbol_with(
    family: DetFamily,
    x: f64,
    xi: f64,
    schedule: &TSchedule,
    config: &VerdictConfig,
) -> Result<SymbolEstimate> {
    let rows = schedule
        .times()?
        .into_iter()
        .map(|t| {
            let end = det_family_eval(family, x, t)?;
            Ok(QuotientRow {
                t,
                quotient: Quotient {
                    value: -expm1_i(xi * (end - x)) / t,
                    se_re: 0.0,
                    se_im: 0.0,
                    paths: 1,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(x, xi, None, rows, config))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KIndependenceReport {
    pub pass: bool,
    pub ks: Vec<f64>,
    pub estimates: Vec<SymbolEstimate>,
    /// `gaps[i][j] = |value_i - value_j|`, NaN where either did not converge.
    pub gaps: Vec<Vec<f64>>,
    pub reason: Option<String>,
}

/// Runs [`estimate_symbol`] for every radius in `ks` (same seed, so the
/// estimates share random numbers) and checks that the converged values agree
/// within three pooled standard errors, or exactly when the errors vanish.
pub fn k_independence_check(
    spec: &ProcessSpec,
    x: f64,
    xi: f64,
    ks: &[f64],
    schedule: &TSchedule,
    n_paths: u64,
    seed: u64,
) -> Result<KIndependenceReport> {
    k_independence_check_with(|_| spec.clone(), x, xi, ks, schedule, n_paths, seed)
}

/// As [`k_independence_check`] with the spec chosen per radius.
pub fn k_independence_check_with(
    spec_for: impl Fn(f64) -> ProcessSpec,
    x: f64,
    xi: f64,
    ks: &[f64],
    schedule: &TSchedule,
    n_paths: u64,
    seed: u64,
) -> Result<KIndependenceReport> {
    if ks.is_empty() {
        return Err(Error::domain("k list is empty"));
    }
    let estimates = ks
        .iter()
        .map(|&k| estimate_symbol(&spec_for(k), x, xi, k, schedule, n_paths, seed))
        .collect::<Result<Vec<_>>>()?;
    let (gaps, reason) = k_agreement(&estimates);
    Ok(KIndependenceReport {
        pass: reason.is_none(),
        ks: ks.to_vec(),
        estimates,
        gaps,
        reason,
    })
}

/// Pairwise gaps between estimates at different radii and the first reason
/// they fail to agree, if any. Every estimate must have converged; values
/// must agree within three pooled standard errors, or exactly when both
/// errors vanish.
pub fn k_agreement(estimates: &[SymbolEstimate]) -> (Vec<Vec<f64>>, Option<String>) {
    let n = estimates.len();
    let label = |e: &SymbolEstimate| e.k.map_or_else(|| "none".to_string(), |k| k.to_string());
    let mut gaps = vec![vec![f64::NAN; n]; n];
    let mut reason = None;
    for (i, a) in estimates.iter().enumerate() {
        if a.verdict != Verdict::Converged && reason.is_none() {
            reason = Some(format!("k = {} did not converge ({})", label(a), a.verdict.as_str()));
        }
        for (j, b) in estimates.iter().enumerate() {
            let (Some(va), Some(vb)) = (a.value, b.value) else {
                continue;
            };
            let gap = (va - vb).norm();
            gaps[i][j] = gap;
            let pooled = a.value_se.unwrap_or(0.0).hypot(b.value_se.unwrap_or(0.0));
            let ok = if pooled == 0.0 { gap == 0.0 } else { gap <= 3.0 * pooled };
            if !ok && reason.is_none() {
                reason = Some(format!(
                    "k = {} and k = {} differ by {gap:.3e} (pooled SE {pooled:.3e})",
                    label(a),
                    label(b)
                ));
            }
        }
    }
    (gaps, reason)
}

/// Header of the quotient table CSV.
pub const SYMBOL_TABLE_HEADER: [&str; 10] = [
    "x", "xi", "k", "t", "re_q", "im_q", "se_re", "se_im", "n_paths", "verdict",
];

/// One parsed row of the quotient table.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTableRow {
    pub x: f64,
    pub xi: f64,
    pub k: Option<f64>,
    pub t: f64,
    pub value: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub n_paths: u64,
    pub verdict: Verdict,
}

/// Writes quotient tables; `k` is empty for unstopped deterministic rows.
pub fn write_symbol_table<W: Write>(writer: W, estimates: &[SymbolEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SYMBOL_TABLE_HEADER)?;
    for e in estimates {
        for row in &e.rows {
            let q = &row.quotient;
            w.write_record([
                e.x.to_string(),
                e.xi.to_string(),
                e.k.map(|k| k.to_string()).unwrap_or_default(),
                row.t.to_string(),
                q.value.re.to_string(),
                q.value.im.to_string(),
                q.se_re.to_string(),
                q.se_im.to_string(),
                q.paths.to_string(),
                e.verdict.as_str().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_symbol_table<R: Read>(reader: R) -> Result<Vec<SymbolTableRow>> {
    let mut r = csv::Reader::from_reader(reader);
    if r.headers()?.iter().ne(SYMBOL_TABLE_HEADER) {
        return Err(Error::validation("unexpected symbol table header"));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let bad = |c: &str| Error::validation(format!("bad {c} in symbol row {rec:?}"));
            let num = |i: usize, c: &str| rec[i].parse::<f64>().map_err(|_| bad(c));
            let verdict = match &rec[9] {
                "converged" => Verdict::Converged,
                "diverged" => Verdict::Diverged,
                "inconclusive" => Verdict::Inconclusive,
                _ => return Err(bad("verdict")),
            };
            Ok(SymbolTableRow {
                x: num(0, "x")?,
                xi: num(1, "xi")?,
                k: if rec[2].is_empty() { None } else { Some(num(2, "k")?) },
                t: num(3, "t")?,
                value: Complex64::new(num(4, "re_q")?, num(5, "im_q")?),
                se_re: num(6, "se_re")?,
                se_im: num(7, "se_im")?,
                n_paths: rec[8].parse().map_err(|_| bad("n_paths"))?,
                verdict,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::procsim::{Coefficient, JumpComponent};
    use std::f64::consts::PI;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn lk_reference_values() {
        let c = Cutoff::UnitBall;
        assert_eq!(
            lk_eval(&LevyTriplet::drift(1.0), 2.0, c).unwrap(),
            Complex64::new(0.0, -2.0)
        );
        assert_eq!(
            lk_eval(&LevyTriplet::brownian(1.0), 2.0, c).unwrap(),
            Complex64::new(2.0, 0.0)
        );
        let cp = LevyTriplet::compound_poisson(1.0, JumpSize::Constant(2.0));
        assert!(close(
            lk_eval(&cp, PI / 2.0, c).unwrap(),
            Complex64::new(2.0, 0.0),
            1e-15
        ));
        assert!(lk_eval(&LevyTriplet::brownian(-1.0), 1.0, c).is_err());
    }

    #[test]
    fn cutoff_compensates_small_jumps() {
        let c = Cutoff::UnitBall;
        let small = LevyTriplet::compound_poisson(2.0, JumpSize::Constant(0.5));
        let xi: f64 = 1.3;
        let expected = -(expm1_i(xi * 0.5) - Complex64::new(0.0, xi * 0.5)) * 2.0;
        assert!(close(lk_eval(&small, xi, c).unwrap(), expected, 1e-15));
    }

    #[test]
    fn uniform_jumps_match_closed_form() {
        // E[exp(i xi Y)] for Y ~ U(a, b), with the compensator split at |y| = 1
        let (a, b, xi): (f64, f64, f64) = (-0.5, 2.0, 1.7);
        let cf =
            (Complex64::new(0.0, xi * b).exp() - Complex64::new(0.0, xi * a).exp()) / Complex64::new(0.0, xi * (b - a));
        let mean_compensated = (1.0f64 * 1.0 - a * a) / 2.0 / (b - a); // E[Y 1{|Y| <= 1}]
        let expected_jump = cf - 1.0 - Complex64::new(0.0, xi * mean_compensated);
        let t = LevyTriplet::compound_poisson(1.5, JumpSize::Uniform { low: a, high: b });
        let got = lk_eval(&t, xi, Cutoff::UnitBall).unwrap();
        assert!(
            close(got, -expected_jump * 1.5, 1e-12),
            "{got} vs {}",
            -expected_jump * 1.5
        );
    }

    #[test]
    fn state_dependent_reference_values() {
        let ch = DiffChar {
            drift: Coefficient::poly([0.0, -1.0]),
            diffusion: Coefficient::Constant(1.0),
            jumps: vec![],
        };
        let c = Cutoff::UnitBall;
        assert_eq!(lk_eval_state(&ch, 1.0, 1.0, c).unwrap(), Complex64::new(0.5, 1.0));
        assert_eq!(lk_eval_state(&ch, 3.0, 0.0, c).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(
            lk_eval_state(&DiffChar::default(), 0.3, 5.0, c).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn drift_quotient_is_deterministic() {
        let spec = ProcessSpec::Levy(LevyTriplet::drift(1.0));
        let q = mc_quotient(&spec, 0.0, 1.0, 10.0, 1e-3, 100, 0).unwrap();
        let expected = -expm1_i(1e-3) / 1e-3;
        assert!(close(q.value, expected, 1e-12));
        assert!((q.value.re - 5e-4).abs() < 1e-9 && (q.value.im + (1.0 - 1e-6 / 6.0)).abs() < 1e-9);
        assert_eq!((q.se_re, q.se_im), (0.0, 0.0));
    }

    #[test]
    fn brownian_quotient_near_exact_value() {
        let spec = ProcessSpec::Levy(LevyTriplet::brownian(1.0));
        let t: f64 = 1e-3;
        let exact = (1.0 - (-0.5 * t).exp()) / t;
        let q = mc_quotient(&spec, 0.0, 1.0, 10.0, t, 100_000, 17).unwrap();
        assert!(
            (q.value.re - exact).abs() <= 4.0 * q.se_re + 1e-3,
            "{} vs {exact}",
            q.value.re
        );
        assert!(q.value.im.abs() <= 4.0 * q.se_im);
    }

    #[test]
    fn zero_frequency_gives_zero() {
        let spec = ProcessSpec::Levy(LevyTriplet {
            drift: 1.0,
            diffusion: 2.0,
            jumps: vec![JumpComponent {
                rate: 3.0,
                size: JumpSize::Constant(1.0),
            }],
        });
        let q = mc_quotient(&spec, 0.0, 0.0, 1.0, 0.01, 5000, 3).unwrap();
        assert_eq!(q.value, Complex64::new(0.0, 0.0));
        assert_eq!(
            lk_eval(&LevyTriplet::brownian(1.0), 0.0, Cutoff::UnitBall).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn horizon_and_radius_must_be_positive() {
        let spec = ProcessSpec::Levy(LevyTriplet::brownian(1.0));
        assert!(matches!(
            mc_quotient(&spec, 0.0, 1.0, 1.0, 0.0, 10, 0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            mc_quotient(&spec, 0.0, 1.0, 0.0, 0.1, 10, 0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn schedule_validation() {
        assert!(TSchedule::new(0.1, 1.5, 4)
            .validate()
            .unwrap_err()
            .to_string()
            .contains("schedule must decrease"));
        assert!(TSchedule::new(0.0, 0.5, 4).validate().is_err());
        let ts = TSchedule::new(0.1, 0.5, 3).times().unwrap();
        assert_eq!(ts, vec![0.1, 0.05, 0.025]);
    }

    fn row(t: f64, re: f64, se: f64) -> QuotientRow {
        QuotientRow {
            t,
            quotient: Quotient {
                value: Complex64::new(re, 0.0),
                se_re: se,
                se_im: 0.0,
                paths: 1,
            },
        }
    }

    #[test]
    fn verdict_rules() {
        let cfg = VerdictConfig::default();
        let conv = [
            row(0.1, 0.4, 0.01),
            row(0.05, 0.5, 0.01),
            row(0.02, 0.51, 0.01),
            row(0.01, 0.49, 0.01),
        ];
        let (v, val) = classify(&conv, &cfg);
        assert_eq!(v, Verdict::Converged);
        assert!((val.unwrap().0.re - 0.5).abs() < 1e-12);

        let div = [
            row(0.1, 1.0, 0.0),
            row(0.05, 1.5, 0.0),
            row(0.02, 2.25, 0.0),
            row(0.01, 3.375, 0.0),
        ];
        assert_eq!(classify(&div, &cfg).0, Verdict::Diverged);

        let slow = [
            row(0.1, 1.0, 0.0),
            row(0.05, 1.1, 0.0),
            row(0.02, 1.21, 0.0),
            row(0.01, 1.331, 0.0),
        ];
        assert_eq!(classify(&slow, &cfg), (Verdict::Inconclusive, None));
    }

    #[test]
    fn det_symbol_sawtooth_and_zero_frequency() {
        let s = TSchedule::new(0.1, 0.1, 6);
        let est = det_symbol(DetFamily::Sawtooth, 0.5, 1.0, &s).unwrap();
        assert_eq!(est.verdict, Verdict::Converged);
        assert!(close(est.value.unwrap(), Complex64::new(0.0, -1.0), 1e-4));
        let zero = det_symbol(DetFamily::Sawtooth, 0.5, 0.0, &s).unwrap();
        assert!(zero.rows.iter().all(|r| r.quotient.value == Complex64::new(0.0, 0.0)));
        let quad = det_symbol(DetFamily::Quadratic, 0.0, 1.0, &s).unwrap();
        assert!(close(quad.value.unwrap(), Complex64::new(0.0, -0.5), 1e-4));
        assert!(det_symbol(DetFamily::Quadratic, 0.7, 1.0, &s).is_err());
    }

    #[test]
    fn estimate_requires_enough_paths() {
        let spec = ProcessSpec::Levy(LevyTriplet::brownian(1.0));
        let err = estimate_symbol(&spec, 0.0, 1.0, 1.0, &TSchedule::new(0.1, 0.5, 4), 10, 0);
        assert!(matches!(err, Err(Error::Validation(_))));
    }

    #[test]
    fn null_triplet_converges_to_zero() {
        let spec = ProcessSpec::Levy(LevyTriplet::default());
        let est = estimate_symbol(&spec, 0.0, 1.0, 1.0, &TSchedule::new(0.1, 0.5, 8), 1000, 0).unwrap();
        assert_eq!(est.verdict, Verdict::Converged);
        assert_eq!(est.value.unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn k_check_negative_control() {
        let report = k_independence_check_with(
            |k| ProcessSpec::Levy(LevyTriplet::drift(k)),
            0.0,
            1.0,
            &[0.5, 1.0, 2.0],
            &TSchedule::new(0.01, 0.5, 6),
            1000,
            0,
        )
        .unwrap();
        assert!(!report.pass);
        assert!(report.reason.unwrap().contains("differ"));
    }

    #[test]
    fn symbol_table_round_trip() {
        let s = TSchedule::new(0.1, 0.1, 3);
        let est = det_symbol(DetFamily::Sawtooth, 0.9, -2.0, &s).unwrap();
        let mut buf = Vec::new();
        write_symbol_table(&mut buf, std::slice::from_ref(&est)).unwrap();
        let rows = read_symbol_table(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 3);
        for (parsed, orig) in rows.iter().zip(&est.rows) {
            assert_eq!(parsed.t, orig.t);
            assert_eq!(parsed.value, orig.quotient.value);
            assert_eq!(parsed.k, None);
            assert_eq!(parsed.verdict, est.verdict);
        }
    }
}
