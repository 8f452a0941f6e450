//! Singular (staircase) functions, numerical Dini derivatives, detection of
//! points with an infinite Dini derivative, and a grid Lebesgue decomposition
//! of increasing functions into an absolutely continuous and a singular part.
//!
//! Cantor and Minkowski evaluations run on exact rational arguments. An `f64`
//! argument is first converted to the dyadic rational it represents, so the
//! digit algorithms never see a rounded input. Results are produced in Q64
//! fixed point (64 fractional bits) and rounded to `f64` once.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rational argument.
pub type Exact = Ratio<i128>;

/// Number of ternary digits scanned by the Cantor digit algorithm.
pub const CANTOR_DIGITS: u32 = 64;

const Q64_ONE: u128 = 1 << 64;
// Keeps 3 * numerator below 2^127 in the ternary digit loop.
const MAX_DEN_BITS: u32 = 124;

/// Value in `[0, 1]` stored with 64 fractional bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Q64(pub u128);

impl Q64 {
    pub const ZERO: Q64 = Q64(0);
    pub const ONE: Q64 = Q64(Q64_ONE);

    pub fn to_f64(self) -> f64 {
        // u128 -> f64 is correctly rounded
        self.0 as f64 / Q64_ONE as f64
    }

    /// Absolute difference in units of 2^-64.
    pub fn abs_diff(self, other: Q64) -> u128 {
        self.0.abs_diff(other.0)
    }
}

/// Converts a finite `f64` to the rational it represents exactly.
///
/// Denominators are capped at 2^124; smaller magnitudes are truncated, which
/// only affects digits far beyond the 64 used by the digit algorithms.
pub fn exact_from_f64(value: f64) -> Result<Exact> {
    if !value.is_finite() {
        return Err(Error::domain(format!("non-finite argument {value}")));
    }
    if value == 0.0 {
        return Ok(Exact::zero());
    }
    let bits = value.to_bits();
    let negative = bits >> 63 == 1;
    let exp_bits = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mantissa, mut exp) = if exp_bits == 0 {
        (frac as i128, -1074)
    } else {
        ((frac | (1u64 << 52)) as i128, exp_bits - 1075)
    };
    while mantissa & 1 == 0 && exp < 0 {
        mantissa >>= 1;
        exp += 1;
    }
    let sign = if negative { -1 } else { 1 };
    if exp >= 0 {
        if exp > 70 {
            return Err(Error::domain(format!(
                "argument {value} too large for exact evaluation"
            )));
        }
        return Ok(Exact::from_integer(sign * (mantissa << exp)));
    }
    let mut shift = (-exp) as u32;
    if shift > MAX_DEN_BITS {
        mantissa >>= shift - MAX_DEN_BITS;
        shift = MAX_DEN_BITS;
    }
    Ok(Exact::new(sign * mantissa, 1i128 << shift))
}

fn exact_to_f64(value: &Exact) -> f64 {
    value
        .to_f64()
        .unwrap_or_else(|| *value.numer() as f64 / *value.denom() as f64)
}

/// Splits a nonnegative rational into (floor, numerator, denominator) of its
/// fractional part, with the denominator reduced to at most 2^124.
fn split_fraction(t: &Exact) -> (i128, u128, u128) {
    let floor = t.floor().to_integer();
    let frac = t - Exact::from_integer(floor);
    let mut p = *frac.numer() as u128;
    let mut q = *frac.denom() as u128;
    let bits = 128 - q.leading_zeros();
    if bits > MAX_DEN_BITS {
        let shift = bits - MAX_DEN_BITS;
        p >>= shift;
        q >>= shift;
    }
    (floor, p, q)
}

/// Cantor function of `p / q` (with `p <= q`) by the ternary digit algorithm.
fn cantor_digits(mut p: u128, q: u128) -> Q64 {
    if p >= q {
        return Q64::ONE;
    }
    let mut acc: u128 = 0;
    let mut place: u128 = Q64_ONE >> 1;
    for _ in 0..CANTOR_DIGITS {
        p *= 3;
        let digit = p / q;
        p %= q;
        match digit {
            0 => {}
            1 => return Q64(acc + place),
            _ => acc += place,
        }
        place >>= 1;
    }
    Q64(acc)
}

/// Cantor function on an exact rational in `[0, 1]`, in Q64 fixed point.
pub fn cantor_q64(t: &Exact) -> Result<Q64> {
    if *t < Exact::zero() || *t > Exact::from_integer(1) {
        return Err(Error::domain(format!("cantor argument {t} outside [0, 1]")));
    }
    if *t == Exact::from_integer(1) {
        return Ok(Q64::ONE);
    }
    let (_, p, q) = split_fraction(t);
    Ok(cantor_digits(p, q))
}

/// Cantor function C(t) for `t` in `[0, 1]`.
pub fn cantor_eval(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("cantor argument {t} outside [0, 1]")));
    }
    Ok(cantor_q64(&exact_from_f64(t)?)?.to_f64())
}

/// Periodized Cantor staircase floor(t) + C(frac(t)) on an exact argument.
pub fn staircase_extend_exact(t: &Exact) -> Result<f64> {
    if *t < Exact::zero() {
        return Err(Error::domain(format!("staircase argument {t} is negative")));
    }
    let (floor, p, q) = split_fraction(t);
    Ok(floor as f64 + cantor_digits(p, q).to_f64())
}

/// Periodized Cantor staircase floor(t) + C(frac(t)) for `t >= 0`.
pub fn staircase_extend(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("staircase argument {t} is negative")));
    }
    staircase_extend_exact(&exact_from_f64(t)?)
}

/// Minkowski question mark function on an exact rational in `[0, 1]`.
///
/// Uses the finite continued fraction [0; a1, a2, ...] of the argument and
/// ?(x) = 2 * sum_k (-1)^(k+1) 2^-(a1 + ... + ak), truncated once the terms
/// fall below 2^-65.
pub fn minkowski_q64(t: &Exact) -> Result<Q64> {
    if *t < Exact::zero() || *t > Exact::from_integer(1) {
        return Err(Error::domain(format!("minkowski argument {t} outside [0, 1]")));
    }
    if *t == Exact::from_integer(1) {
        return Ok(Q64::ONE);
    }
    let (_, mut p, mut q) = split_fraction(t);
    // acc holds the value scaled by 2^64; terms are 2^(65 - partial_sum)
    let mut acc: i128 = 0;
    let mut partial: u128 = 0;
    let mut sign: i128 = 1;
    while p != 0 {
        let a = q / p;
        let r = q % p;
        partial = partial.saturating_add(a);
        if partial > 65 {
            break;
        }
        acc += sign * (1i128 << (65 - partial as u32));
        sign = -sign;
        q = p;
        p = r;
    }
    Ok(Q64(acc.clamp(0, Q64_ONE as i128) as u128))
}

/// Minkowski question mark function ?(t) for `t` in `[0, 1]`.
pub fn minkowski_eval(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain(format!("minkowski argument {t} outside [0, 1]")));
    }
    Ok(minkowski_q64(&exact_from_f64(t)?)?.to_f64())
}

/// Increasing function sampled on a strictly increasing grid, evaluated by
/// linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledStaircase {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl SampledStaircase {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::validation(format!(
                "sampled staircase has {} abscissae but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::validation("sampled staircase needs at least two points"));
        }
        if let Some(i) = knots.iter().chain(&values).position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite entry at position {i}")));
        }
        if let Some(i) = (1..knots.len()).find(|&i| knots[i] <= knots[i - 1]) {
            return Err(Error::validation(format!(
                "abscissae must be strictly increasing (row {i})"
            )));
        }
        if let Some(i) = (1..values.len()).find(|&i| values[i] < values[i - 1]) {
            return Err(Error::validation(format!("values must be nondecreasing (row {i})")));
        }
        Ok(Self { knots, values })
    }

    /// Reads a two-column `t,value` CSV; a header row is optional.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::validation(format!(
                    "row {row}: expected 2 columns, found {}",
                    record.len()
                )));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(t), Ok(v)) => {
                    knots.push(t);
                    values.push(v);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::validation(format!("row {row}: unparsable number")));
                }
            }
        }
        Self::new(knots, values)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(Error::domain(format!(
                "argument {t} outside sampled range [{lo}, {hi}]"
            )));
        }
        let idx = self.knots.partition_point(|&k| k <= t);
        if idx == self.knots.len() {
            return Ok(*self.values.last().unwrap());
        }
        let (t0, t1) = (self.knots[idx - 1], self.knots[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        let w = (t - t0) / (t1 - t0);
        // clamp keeps interpolation monotone under rounding
        Ok((v0 + w * (v1 - v0)).clamp(v0, v1))
    }
}

/// An evaluable increasing function used as a clock or as a Dini target.
///
/// In JSON an analytic kind is its name (`"cantor"`, `"minkowski"`,
/// `"affine+cantor:a,b"`); a sampled function is either inline
/// `{"t": [...], "value": [...]}` or loaded from `{"csv": "path"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StaircaseRepr", into = "StaircaseRepr")]
pub enum StaircaseFunction {
    /// Cantor function on `[0, 1]`.
    Cantor,
    /// Minkowski question mark function on `[0, 1]`.
    Minkowski,
    /// Linear interpolation of tabulated values.
    Sampled(SampledStaircase),
    /// `slope * t + weight * (floor(t) + C(frac(t)))` on `[0, inf)`.
    Composite { slope: f64, weight: f64 },
}

impl StaircaseFunction {
    /// The periodized Cantor staircase on `[0, inf)`.
    pub fn cantor_extended() -> Self {
        StaircaseFunction::Composite {
            slope: 0.0,
            weight: 1.0,
        }
    }

    /// Closed domain `[lo, hi]`; `hi` may be infinite.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            StaircaseFunction::Cantor | StaircaseFunction::Minkowski => (0.0, 1.0),
            StaircaseFunction::Sampled(s) => s.domain(),
            StaircaseFunction::Composite { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let StaircaseFunction::Composite { slope, weight } = self {
            if !(slope.is_finite() && weight.is_finite() && *slope >= 0.0 && *weight >= 0.0) {
                return Err(Error::validation(format!(
                    "affine+cantor coefficients must be finite and nonnegative, got {slope}, {weight}"
                )));
            }
        }
        Ok(())
    }

    /// True if the function is constant (zero slope and zero staircase weight).
    pub fn is_constant(&self) -> bool {
        match self {
            StaircaseFunction::Composite { slope, weight } => *slope == 0.0 && *weight == 0.0,
            StaircaseFunction::Sampled(s) => s.values.first() == s.values.last(),
            _ => false,
        }
    }

    fn check_exact_domain(&self, t: &Exact) -> Result<()> {
        let (lo, hi) = self.domain();
        let tf = exact_to_f64(t);
        let below = *t < exact_from_f64(lo)?;
        let above = hi.is_finite() && *t > exact_from_f64(hi)?;
        if below || above {
            return Err(Error::domain(format!("argument {tf} outside domain [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Evaluates at an exact rational argument.
    pub fn eval_exact(&self, t: &Exact) -> Result<f64> {
        self.check_exact_domain(t)?;
        match self {
            StaircaseFunction::Cantor => Ok(cantor_q64(t)?.to_f64()),
            StaircaseFunction::Minkowski => Ok(minkowski_q64(t)?.to_f64()),
            StaircaseFunction::Sampled(s) => s.eval(exact_to_f64(t)),
            StaircaseFunction::Composite { slope, weight } => {
                let stair = if *weight == 0.0 {
                    0.0
                } else {
                    staircase_extend_exact(t)?
                };
                Ok(slope * exact_to_f64(t) + weight * stair)
            }
        }
    }

    /// `f(to) - f(from)`, computed from fixed-point values for the analytic
    /// kinds so that small increments keep full relative precision.
    pub fn increment_exact(&self, from: &Exact, to: &Exact) -> Result<f64> {
        self.check_exact_domain(from)?;
        self.check_exact_domain(to)?;
        let q64_delta = |a: Q64, b: Q64| (b.0 as i128 - a.0 as i128) as f64 / Q64_ONE as f64;
        match self {
            StaircaseFunction::Cantor => Ok(q64_delta(cantor_q64(from)?, cantor_q64(to)?)),
            StaircaseFunction::Minkowski => Ok(q64_delta(minkowski_q64(from)?, minkowski_q64(to)?)),
            StaircaseFunction::Sampled(s) => Ok(s.eval(exact_to_f64(to))? - s.eval(exact_to_f64(from))?),
            StaircaseFunction::Composite { slope, weight } => {
                let linear = slope * exact_to_f64(&(to - from));
                if *weight == 0.0 {
                    return Ok(linear);
                }
                let (fa, pa, qa) = split_fraction(from);
                let (fb, pb, qb) = split_fraction(to);
                let whole = (fb - fa) as f64;
                let stair = whole + q64_delta(cantor_digits(pa, qa), cantor_digits(pb, qb));
                Ok(linear + weight * stair)
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if let StaircaseFunction::Sampled(s) = self {
            return s.eval(t);
        }
        self.eval_exact(&exact_from_f64(t)?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum StaircaseRepr {
    Name(String),
    Csv { csv: std::path::PathBuf },
    Table { t: Vec<f64>, value: Vec<f64> },
}

impl TryFrom<StaircaseRepr> for StaircaseFunction {
    type Error = Error;

    fn try_from(repr: StaircaseRepr) -> Result<Self> {
        match repr {
            StaircaseRepr::Name(name) => name.parse(),
            StaircaseRepr::Csv { csv } => Ok(StaircaseFunction::Sampled(SampledStaircase::from_csv_path(csv)?)),
            StaircaseRepr::Table { t, value } => Ok(StaircaseFunction::Sampled(SampledStaircase::new(t, value)?)),
        }
    }
}

impl From<StaircaseFunction> for StaircaseRepr {
    fn from(f: StaircaseFunction) -> Self {
        match f {
            StaircaseFunction::Sampled(s) => StaircaseRepr::Table {
                t: s.knots,
                value: s.values,
            },
            other => StaircaseRepr::Name(other.to_string()),
        }
    }
}

impl fmt::Display for StaircaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StaircaseFunction::Cantor => write!(f, "cantor"),
            StaircaseFunction::Minkowski => write!(f, "minkowski"),
            StaircaseFunction::Sampled(s) => write!(f, "sampled[{} points]", s.knots.len()),
            StaircaseFunction::Composite { slope, weight } => {
                write!(f, "affine+cantor:{slope},{weight}")
            }
        }
    }
}

impl FromStr for StaircaseFunction {
    type Err = Error;

    /// Parses `cantor`, `minkowski` or `affine+cantor:a,b`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "cantor" => return Ok(StaircaseFunction::Cantor),
            "minkowski" => return Ok(StaircaseFunction::Minkowski),
            _ => {}
        }
        let Some(args) = s.strip_prefix("affine+cantor:") else {
            return Err(Error::validation(format!(
                "unknown staircase '{s}' (expected cantor, minkowski or affine+cantor:a,b)"
            )));
        };
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        let [a, b] = parts.as_slice() else {
            return Err(Error::validation(format!(
                "affine+cantor needs two coefficients, got '{args}'"
            )));
        };
        let slope = a
            .parse::<f64>()
            .map_err(|_| Error::validation(format!("bad slope '{a}'")))?;
        let weight = b
            .parse::<f64>()
            .map_err(|_| Error::validation(format!("bad weight '{b}'")))?;
        let f = StaircaseFunction::Composite { slope, weight };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Right,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    Upper,
    Lower,
}

/// Geometric step schedule `h0, h0*r, h0*r^2, ...` in exact arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    pub first: Exact,
    pub ratio: Exact,
    pub steps: usize,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            first: Exact::new(1, 3),
            ratio: Exact::new(1, 3),
            steps: 12,
        }
    }
}

impl StepSchedule {
    /// Ternary schedule `3^-1 .. 3^-depth`.
    pub fn ternary(depth: usize) -> Self {
        Self {
            steps: depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let zero = Exact::zero();
        let one = Exact::from_integer(1);
        if self.first <= zero {
            return Err(Error::validation("step schedule must start at a positive step"));
        }
        if self.ratio <= zero || self.ratio >= one {
            return Err(Error::validation("step schedule ratio must lie in (0, 1)"));
        }
        if self.steps == 0 {
            return Err(Error::validation("step schedule needs at least one step"));
        }
        Ok(())
    }

    pub fn steps(&self) -> Result<Vec<Exact>> {
        self.validate()?;
        let mut out = Vec::with_capacity(self.steps);
        let mut h = self.first;
        for _ in 0..self.steps {
            out.push(h);
            h = h
                .checked_mul(&self.ratio)
                .ok_or_else(|| Error::domain("step schedule overflows exact arithmetic"))?;
        }
        Ok(out)
    }

    pub fn last(&self) -> Result<Exact> {
        Ok(*self.steps()?.last().unwrap())
    }
}

/// Thresholds for classifying a Dini quotient sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiniConfig {
    /// Minimum growth ratio between consecutive tail quotients for divergence.
    pub growth_ratio: f64,
    /// Number of trailing quotients inspected.
    pub tail: usize,
    /// Relative spread under which the tail counts as settled.
    pub settle_tol: f64,
}

impl Default for DiniConfig {
    fn default() -> Self {
        Self {
            growth_ratio: 1.2,
            tail: 4,
            settle_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "verdict", content = "value")]
pub enum DiniVerdict {
    Finite(f64),
    Diverging,
    Inconclusive,
}

/// Difference quotients of a function at one point along a step schedule.
///
/// The verdict is a finite surrogate for the limsup / liminf: `Diverging`
/// when the trailing quotients grow geometrically, `Finite` when they have
/// settled, `Inconclusive` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniEstimate {
    pub point: f64,
    pub side: Side,
    pub envelope: Envelope,
    /// `(h, (f(x0 + h) - f(x0)) / h)` with `h < 0` on the left side.
    pub quotients: Vec<(f64, f64)>,
    pub verdict: DiniVerdict,
}

impl DiniEstimate {
    pub fn max_quotient(&self) -> f64 {
        self.quotients.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn classify_dini(quotients: &[f64], envelope: Envelope, config: &DiniConfig) -> DiniVerdict {
    let m = config.tail.max(2);
    if quotients.len() < m {
        return DiniVerdict::Inconclusive;
    }
    let tail = &quotients[quotients.len() - m..];
    let growing = tail.windows(2).all(|w| {
        let (a, b) = (w[0].abs(), w[1].abs());
        b > a && a > 0.0 && b / a >= config.growth_ratio
    });
    if growing {
        return DiniVerdict::Diverging;
    }
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = hi.abs().max(lo.abs()).max(1.0);
    if hi - lo <= config.settle_tol * scale {
        return DiniVerdict::Finite(match envelope {
            Envelope::Upper => hi,
            Envelope::Lower => lo,
        });
    }
    DiniVerdict::Inconclusive
}

/// Dini difference quotients of `f` at `x0` on one side.
pub fn dini(
    f: &StaircaseFunction,
    x0: &Exact,
    side: Side,
    envelope: Envelope,
    schedule: &StepSchedule,
    config: &DiniConfig,
) -> Result<DiniEstimate> {
    f.check_exact_domain(x0)?;
    let mut quotients = Vec::with_capacity(schedule.steps);
    for h in schedule.steps()? {
        let signed = match side {
            Side::Right => h,
            Side::Left => -h,
        };
        let x = x0
            .checked_add(&signed)
            .ok_or_else(|| Error::domain("evaluation point overflows exact arithmetic"))?;
        let delta = f.increment_exact(x0, &x)?;
        // 1/h is exact for schedules like 3^-n, so the quotient rounds once
        let inverse = exact_to_f64(&signed.recip());
        quotients.push((exact_to_f64(&signed), delta * inverse));
    }
    let qs: Vec<f64> = quotients.iter().map(|q| q.1).collect();
    Ok(DiniEstimate {
        point: exact_to_f64(x0),
        side,
        envelope,
        verdict: classify_dini(&qs, envelope, config),
        quotients,
    })
}

/// A scan hit: a grid point whose largest difference quotient exceeded the
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiniHit {
    pub point: f64,
    pub side: Side,
    pub max_quotient: f64,
}

fn fits_domain(f: &StaircaseFunction, x: &Exact) -> bool {
    f.check_exact_domain(x).is_ok()
}

/// Scans `resolution + 1` equispaced points of `[lo, hi]` for upper Dini
/// quotients above `threshold`.
///
/// Each point is probed on every side whose whole step schedule stays inside
/// the domain of `f`. Hits are sorted by quotient, largest first. Points of
/// infinite derivative lying between grid nodes can be missed.
pub fn find_infinite_dini(
    f: &StaircaseFunction,
    interval: (Exact, Exact),
    resolution: usize,
    threshold: f64,
    schedule: &StepSchedule,
) -> Result<Vec<DiniHit>> {
    let (lo, hi) = interval;
    if lo >= hi {
        return Err(Error::domain(format!("empty scan interval [{lo}, {hi}]")));
    }
    if !(threshold > 0.0) {
        return Err(Error::domain(format!("threshold must be positive, got {threshold}")));
    }
    if resolution == 0 {
        return Err(Error::domain("scan resolution must be positive"));
    }
    let first = schedule.steps()?[0];
    let width = hi - lo;
    let config = DiniConfig::default();
    let mut hits = Vec::new();
    for i in 0..=resolution {
        let offset = width
            .checked_mul(&Exact::new(i as i128, resolution as i128))
            .ok_or_else(|| Error::domain("scan grid overflows exact arithmetic"))?;
        let x = lo + offset;
        let mut best: Option<(Side, f64)> = None;
        for side in [Side::Right, Side::Left] {
            let reach = match side {
                Side::Right => x.checked_add(&first),
                Side::Left => x.checked_sub(&first),
            };
            match reach {
                Some(r) if fits_domain(f, &r) => {}
                _ => continue,
            }
            let est = dini(f, &x, side, Envelope::Upper, schedule, &config)?;
            let q = est.max_quotient();
            if best.is_none_or(|(_, b)| q > b) {
                best = Some((side, q));
            }
        }
        if let Some((side, q)) = best {
            if q > threshold {
                hits.push(DiniHit {
                    point: exact_to_f64(&x),
                    side,
                    max_quotient: q,
                });
            }
        }
    }
    hits.sort_by(|a, b| {
        b.max_quotient
            .total_cmp(&a.max_quotient)
            .then(a.point.total_cmp(&b.point))
    });
    Ok(hits)
}

/// Parameters for [`lebesgue_decompose`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeConfig {
    /// Difference quotients above this cap are attributed to the singular part.
    pub cap: f64,
    /// Width of the neighbourhood (centred, odd) used to refill capped quotients.
    pub window: usize,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        Self { cap: 10.0, window: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub step: f64,
    /// Density estimate on the grid; `density[0] = 0`.
    pub density: Vec<f64>,
    /// Integral of the density up to each grid point.
    pub ac_part: Vec<f64>,
    /// Nondecreasing singular remainder.
    pub singular: Vec<f64>,
    /// Grid intervals whose quotient exceeded the cap.
    pub capped: Vec<usize>,
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

/// Splits a nondecreasing grid function `F` (uniform step `step`) into
/// `ac_part + singular`.
///
/// Interval quotients above the cap are replaced by the median of the
/// uncapped quotients in the surrounding window. The singular part is then
/// projected onto nondecreasing sequences and rounded down to the ulp grid of
/// `max F`, which makes `ac_part = F - singular` exact, so
/// `ac_part[i] + singular[i] == F[i]` holds bit for bit.
/// The reported density is the grid derivative of `ac_part`.
pub fn lebesgue_decompose(values: &[f64], step: f64, config: &DecomposeConfig) -> Result<Decomposition> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::validation(format!("grid step must be positive, got {step}")));
    }
    if values.len() < 2 {
        return Err(Error::validation("decomposition needs at least two grid values"));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::validation(format!("non-finite value at index {i}")));
    }
    if let Some(i) = (1..values.len()).find(|&i| values[i] < values[i - 1]) {
        return Err(Error::validation(format!(
            "input is not nondecreasing: first decrease at index {i} ({} < {})",
            values[i],
            values[i - 1]
        )));
    }
    if values[0] < 0.0 {
        // S lies in [F(t_0), F(t)]; if F starts below zero and later comes
        // close to it, no pair of floats sums to F exactly.
        return Err(Error::validation(format!(
            "decomposition needs F(t_0) >= 0 for an exact split, got {}; shift the input",
            values[0]
        )));
    }
    let n = values.len();
    let quotients: Vec<f64> = (1..n).map(|i| (values[i] - values[i - 1]) / step).collect();
    let capped: Vec<bool> = quotients.iter().map(|&q| q > config.cap).collect();
    let half = config.window / 2;
    let mut density = vec![0.0; n];
    let mut scratch = Vec::with_capacity(config.window);
    for (j, &q) in quotients.iter().enumerate() {
        density[j + 1] = if capped[j] {
            scratch.clear();
            let lo = j.saturating_sub(half);
            let hi = (j + half).min(quotients.len() - 1);
            scratch.extend((lo..=hi).filter(|&k| k != j && !capped[k]).map(|k| quotients[k]));
            if scratch.is_empty() {
                0.0
            } else {
                median(&mut scratch)
            }
        } else {
            q
        };
    }

    let mut singular = vec![0.0; n];
    let mut acc = 0.0;
    singular[0] = values[0];
    for i in 1..n {
        acc += step * density[i];
        singular[i] = (values[i] - acc).max(singular[i - 1]);
    }

    // Snap S down to the ulp grid of max F: then F - S is a multiple of
    // ulp(F) inside [0, F], hence a float, and the sum is exact.
    let top = values[n - 1];
    let unit = top.next_up() - top;
    for v in &mut singular {
        *v = (*v / unit).floor() * unit;
    }
    let ac_part: Vec<f64> = values.iter().zip(&singular).map(|(f, s)| f - s).collect();
    density[0] = 0.0;
    for i in 1..n {
        density[i] = (ac_part[i] - ac_part[i - 1]) / step;
    }
    Ok(Decomposition {
        step,
        density,
        ac_part,
        singular,
        capped: capped
            .iter()
            .enumerate()
            .filter_map(|(j, &c)| c.then_some(j + 1))
            .collect(),
    })
}

impl Decomposition {
    /// Checks `ac_part[i] + singular[i] == values[i]` bit for bit.
    pub fn reconstructs(&self, values: &[f64]) -> bool {
        values.len() == self.singular.len()
            && values
                .iter()
                .zip(self.ac_part.iter().zip(&self.singular))
                .all(|(&f, (&a, &s))| (a + s).to_bits() == f.to_bits())
    }
}

/// Samples `f` at `t_i = lo + i * (hi - lo) / n`, `i = 0..=n`, using exact
/// grid points.
pub fn sample_uniform(f: &StaircaseFunction, lo: &Exact, hi: &Exact, n: usize) -> Result<Vec<f64>> {
    if n == 0 || lo >= hi {
        return Err(Error::domain("sampling needs a nonempty interval and n > 0"));
    }
    let width = hi - lo;
    (0..=n)
        .map(|i| {
            let x = *lo + width * Exact::new(i as i128, n as i128);
            f.eval_exact(&x)
        })
        .collect()
}
