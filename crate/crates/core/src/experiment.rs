//! Experiment configuration, orchestration and result emission.
//!
//! An experiment is one JSON document:
//!
//! ```json
//! {
//!   "version": 1,
//!   "experiment": "symbol",
//!   "spec": {"kind": "levy", "Q": 1},
//!   "params": {"seed": 7, "xi": [1, 2], "t_schedule": {"t0": 0.1, "ratio": 0.5, "count": 8}},
//!   "output_dir": "out/brownian"
//! }
//! ```
//!
//! Unknown keys anywhere are errors. Structural problems (syntax, types,
//! unknown keys) are reported at the first occurrence; semantic problems are
//! collected over the whole document, each with its key path.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{ConfigIssue, Error, Result};
use crate::indices::{
    beta0, geometric_grid, h_samples, path_growth, state_window, write_growth_csv, IndexReport, PathSource,
    DEFAULT_WINDOW_POINTS,
};
use crate::procsim::{
    check_time_homogeneity, ClockSpec, Coefficient, DiffChar, HomogeneityProbe, LevyTriplet, ProcessSpec,
};
use crate::rng::derive_seed;
use crate::singular::{
    dini, find_infinite_dini, lebesgue_decompose, sample_uniform, DecomposeConfig, DiniConfig, DiniVerdict, Envelope,
    Exact, Side, StaircaseFunction, StepSchedule,
};
use crate::symbol::{
    det_symbol_with, estimate_symbol_with, k_agreement, reference_symbol, write_symbol_table, SymbolEstimate,
    TSchedule, VerdictConfig,
};

/// Current config schema version.
pub const SCHEMA_VERSION: u32 = 1;

const GROWTH_SALT: u64 = 0x6772_6f77;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Symbol,
    DetSymbol,
    Indices,
    Singular,
    Decompose,
    Homogeneity,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Symbol => "symbol",
            ExperimentKind::DetSymbol => "det_symbol",
            ExperimentKind::Indices => "indices",
            ExperimentKind::Singular => "singular",
            ExperimentKind::Decompose => "decompose",
            ExperimentKind::Homogeneity => "homogeneity",
        }
    }

    fn needs_spec(&self) -> bool {
        !matches!(self, ExperimentKind::Singular | ExperimentKind::Decompose)
    }

    fn needs_family(&self) -> bool {
        matches!(self, ExperimentKind::DetSymbol | ExperimentKind::Homogeneity)
    }
}

/// An exact rational written as a JSON number or a `"p/q"` string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rational(pub Exact);

impl Rational {
    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            s.serialize_i64(self.0.to_integer() as i64)
        } else {
            s.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
        }
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(i) => Ok(Rational(Exact::from_integer(i as i128))),
            Repr::Num(v) => crate::singular::exact_from_f64(v)
                .map(Rational)
                .map_err(|e| D::Error::custom(e.to_string())),
            Repr::Text(s) => {
                let parse = |p: &str| {
                    p.trim()
                        .parse::<i128>()
                        .map_err(|_| D::Error::custom(format!("bad rational {s:?}")))
                };
                match s.split_once('/') {
                    Some((p, q)) => {
                        let q = parse(q)?;
                        if q == 0 {
                            return Err(D::Error::custom(format!("zero denominator in {s:?}")));
                        }
                        Ok(Rational(Ratio::new(parse(p)?, q)))
                    }
                    None => Ok(Rational(Exact::from_integer(parse(&s)?))),
                }
            }
        }
    }
}

/// A single number or a list of numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Points(pub Vec<f64>);

impl<'de> Deserialize<'de> for Points {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            One(f64),
            Many(Vec<f64>),
        }
        Ok(Points(match Repr::deserialize(d)? {
            Repr::One(v) => vec![v],
            Repr::Many(v) => v,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RGrid {
    pub r0: f64,
    pub ratio: f64,
    pub count: usize,
}

/// Explicit state list, or `points` equispaced states on `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowSpec {
    List(Vec<f64>),
    Range {
        lo: f64,
        hi: f64,
        #[serde(default = "default_window_points")]
        points: usize,
    },
}

fn default_window_points() -> usize {
    DEFAULT_WINDOW_POINTS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RationalSchedule {
    pub first: Rational,
    pub ratio: Rational,
    pub steps: usize,
}

impl RationalSchedule {
    fn to_schedule(self) -> StepSchedule {
        StepSchedule {
            first: self.first.0,
            ratio: self.ratio.0,
            steps: self.steps,
        }
    }
}

/// Experiment parameters. Every field has a default except `seed`; each
/// experiment kind reads only the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Base seed; required so no run depends on the wall clock.
    pub seed: Option<u64>,
    /// Start point(s).
    pub x: Points,
    pub xi: Vec<f64>,
    /// Ball radii for the stopped quotient.
    pub k: Vec<f64>,
    pub t_schedule: TSchedule,
    pub n_paths: u64,
    pub verdict: VerdictConfig,

    pub r_grid: RGrid,
    /// State window for `H(R)`; 41 points on `[x - 1, x + 1]` when absent.
    pub window: Option<WindowSpec>,
    pub lambda: Vec<f64>,
    pub growth_t: Vec<f64>,
    pub growth_step: f64,
    pub growth_paths: u64,

    /// Function analysed by `singular` and `decompose`.
    pub function: StaircaseFunction,
    pub interval: [Rational; 2],
    pub dini_points: Vec<Rational>,
    pub dini_schedule: RationalSchedule,
    pub resolution: usize,
    pub threshold: f64,
    pub grid_intervals: usize,
    pub cap: f64,
    pub median_window: usize,

    pub denominator: u32,
    pub probe_range: [f64; 2],
    pub t_max: f64,
    pub tol: f64,
}

impl Default for Params {
    fn default() -> Self {
        let third = Rational(Exact::new(1, 3));
        Params {
            seed: None,
            x: Points(vec![0.0]),
            xi: vec![1.0],
            k: vec![1.0],
            t_schedule: TSchedule::new(0.1, 0.5, 8),
            n_paths: 10_000,
            verdict: VerdictConfig::default(),
            r_grid: RGrid {
                r0: 10.0,
                ratio: 2.0,
                count: 11,
            },
            window: None,
            lambda: vec![0.9],
            growth_t: vec![10.0, 100.0, 1000.0],
            growth_step: 0.01,
            growth_paths: 1000,
            function: StaircaseFunction::Cantor,
            interval: [Rational(Exact::from_integer(0)), Rational(Exact::from_integer(1))],
            dini_points: vec![Rational(Exact::from_integer(0))],
            dini_schedule: RationalSchedule {
                first: third,
                ratio: third,
                steps: 12,
            },
            resolution: 729,
            threshold: 50.0,
            grid_intervals: 6561,
            cap: 10.0,
            median_window: 5,
            denominator: 8,
            probe_range: [0.0, 2.0],
            t_max: 2.0,
            tol: 1e-12,
        }
    }
}

impl Params {
    /// The validated base seed.
    pub fn base_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::validation("params.seed is required"))
    }

    pub fn state_window(&self) -> Result<Vec<f64>> {
        match &self.window {
            Some(WindowSpec::List(v)) => Ok(v.clone()),
            Some(WindowSpec::Range { lo, hi, points }) => state_window(*lo, *hi, *points),
            None => {
                let x = self.x.0.first().copied().unwrap_or(0.0);
                state_window(x - 1.0, x + 1.0, DEFAULT_WINDOW_POINTS)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<ProcessSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Normalized JSON with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize")
    }

    /// Hex SHA-256 of the normalized config, excluding `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        hex::encode(Sha256::digest(
            serde_json::to_vec(&c).expect("configs always serialize"),
        ))
    }

    /// All semantic problems, each with its key path.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut push = |path: &str, message: String| {
            out.push(ConfigIssue {
                path: path.to_string(),
                message,
            })
        };
        if self.version != SCHEMA_VERSION {
            push(
                "version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version),
            );
        }
        match (&self.spec, self.experiment.needs_spec()) {
            (None, true) => push("spec", format!("required for experiment {}", self.experiment.as_str())),
            (Some(spec), _) => {
                if self.experiment.needs_family() && !matches!(spec, ProcessSpec::DetFamily(_)) {
                    push(
                        "spec.kind",
                        format!("experiment {} needs a det_family spec", self.experiment.as_str()),
                    );
                }
                spec_issues(spec, &mut push);
            }
            (None, false) => {}
        }
        let stochastic = self.spec.as_ref().is_some_and(|s| !s.is_deterministic());
        param_issues(&self.params, self.experiment, stochastic, &mut push);
        out
    }
}

fn check(ok: bool, path: &str, message: impl FnOnce() -> String, push: &mut impl FnMut(&str, String)) {
    if !ok {
        push(path, message());
    }
}

fn finite(v: f64) -> bool {
    v.is_finite()
}

fn triplet_issues(t: &LevyTriplet, prefix: &str, push: &mut impl FnMut(&str, String)) {
    check(
        finite(t.drift),
        &format!("{prefix}.ell"),
        || format!("drift {} is not finite", t.drift),
        push,
    );
    check(
        t.diffusion >= 0.0 && finite(t.diffusion),
        &format!("{prefix}.Q"),
        || format!("diffusion coefficient must be finite and >= 0, got {}", t.diffusion),
        push,
    );
    for (i, j) in t.jumps.iter().enumerate() {
        check(
            j.rate >= 0.0 && finite(j.rate),
            &format!("{prefix}.N[{i}].rate"),
            || format!("jump rate must be finite and >= 0, got {}", j.rate),
            push,
        );
        if let Err(e) = j.size.validate() {
            push(&format!("{prefix}.N[{i}].size"), e.to_string());
        }
    }
}

fn coefficient_issue(c: &Coefficient, path: &str, push: &mut impl FnMut(&str, String)) {
    if let Err(e) = c.validate() {
        push(path, e.to_string());
    }
}

fn char_issues(ch: &DiffChar, push: &mut impl FnMut(&str, String)) {
    coefficient_issue(&ch.drift, "spec.ell", push);
    coefficient_issue(&ch.diffusion, "spec.Q", push);
    if let Coefficient::Constant(q) = ch.diffusion {
        check(
            q >= 0.0,
            "spec.Q",
            || format!("diffusion coefficient must be >= 0, got {q}"),
            push,
        );
    }
    for (i, j) in ch.jumps.iter().enumerate() {
        coefficient_issue(&j.rate, &format!("spec.N[{i}].rate"), push);
        if let Coefficient::Constant(r) = j.rate {
            check(
                r >= 0.0,
                &format!("spec.N[{i}].rate"),
                || format!("jump rate must be >= 0, got {r}"),
                push,
            );
        }
        if let Err(e) = j.size.validate() {
            push(&format!("spec.N[{i}].size"), e.to_string());
        }
    }
}

fn spec_issues(spec: &ProcessSpec, push: &mut impl FnMut(&str, String)) {
    match spec {
        ProcessSpec::Levy(t) => triplet_issues(t, "spec", push),
        ProcessSpec::LevyType(ch) => char_issues(ch, push),
        ProcessSpec::Clocked(c) => {
            triplet_issues(&c.triplet, "spec.triplet", push);
            if let Err(e) = c.clock.validate() {
                push("spec.clock", e.to_string());
            }
            if let ClockSpec::AcOfState {
                g: Coefficient::Constant(r),
            } = &c.clock
            {
                check(
                    *r >= 0.0,
                    "spec.clock.g",
                    || format!("clock rate must be >= 0, got {r}"),
                    push,
                );
            }
        }
        ProcessSpec::DetFamily(_) => {}
    }
}

fn param_issues(p: &Params, kind: ExperimentKind, stochastic: bool, push: &mut impl FnMut(&str, String)) {
    check(
        p.seed.is_some(),
        "params.seed",
        || "required (runs never seed from the clock)".into(),
        push,
    );
    check(
        !p.x.0.is_empty(),
        "params.x",
        || "needs at least one start point".into(),
        push,
    );
    check(
        p.x.0.iter().all(|v| finite(*v)),
        "params.x",
        || "start points must be finite".into(),
        push,
    );
    check(
        !p.xi.is_empty(),
        "params.xi",
        || "needs at least one frequency".into(),
        push,
    );
    check(
        p.xi.iter().all(|v| finite(*v)),
        "params.xi",
        || "frequencies must be finite".into(),
        push,
    );
    check(!p.k.is_empty(), "params.k", || "needs at least one radius".into(), push);
    check(
        p.k.iter().all(|&k| k > 0.0),
        "params.k",
        || "radii must be positive".into(),
        push,
    );

    let t = &p.t_schedule;
    check(
        t.t0 > 0.0 && finite(t.t0),
        "params.t_schedule.t0",
        || format!("must be positive, got {}", t.t0),
        push,
    );
    check(
        t.ratio > 0.0 && t.ratio < 1.0,
        "params.t_schedule.ratio",
        || format!("schedule must decrease: ratio {} not in (0, 1)", t.ratio),
        push,
    );
    check(
        t.count > 0,
        "params.t_schedule.count",
        || "needs at least one time".into(),
        push,
    );
    if kind == ExperimentKind::Symbol && stochastic {
        check(
            p.n_paths >= 1000,
            "params.n_paths",
            || format!("symbol estimation needs at least 1000 paths, got {}", p.n_paths),
            push,
        );
    }
    let v = &p.verdict;
    check(
        v.abs_tol >= 0.0,
        "params.verdict.abs_tol",
        || "must be >= 0".into(),
        push,
    );
    check(v.sigmas >= 0.0, "params.verdict.sigmas", || "must be >= 0".into(), push);
    check(
        v.agree_points >= 1,
        "params.verdict.agree_points",
        || "must be >= 1".into(),
        push,
    );
    check(
        v.growth_ratio > 1.0,
        "params.verdict.growth_ratio",
        || "must exceed 1".into(),
        push,
    );
    check(
        v.growth_points >= 2,
        "params.verdict.growth_points",
        || "must be >= 2".into(),
        push,
    );

    let r = &p.r_grid;
    check(
        r.r0 > 0.0 && finite(r.r0),
        "params.r_grid.r0",
        || "must be positive".into(),
        push,
    );
    check(
        r.ratio >= 2.0 && finite(r.ratio),
        "params.r_grid.ratio",
        || "must be at least 2".into(),
        push,
    );
    check(
        r.count >= 8,
        "params.r_grid.count",
        || "beta0 needs at least 8 radii".into(),
        push,
    );
    if let Err(e) = p.state_window() {
        push("params.window", e.to_string());
    } else if p
        .state_window()
        .is_ok_and(|w| w.is_empty() || w.iter().any(|v| !finite(*v)))
    {
        push(
            "params.window",
            "window must be a nonempty list of finite states".into(),
        );
    }
    check(
        !p.lambda.is_empty() && p.lambda.iter().all(|&l| l > 0.0 && finite(l)),
        "params.lambda",
        || "needs at least one lambda in (0, inf)".into(),
        push,
    );
    check(
        !p.growth_t.is_empty() && p.growth_t[0] > 0.0 && p.growth_t.windows(2).all(|w| w[1] > w[0]),
        "params.growth_t",
        || "must be positive and strictly increasing".into(),
        push,
    );
    check(
        p.growth_step > 0.0 && finite(p.growth_step),
        "params.growth_step",
        || "must be positive".into(),
        push,
    );
    check(
        p.growth_paths >= 1,
        "params.growth_paths",
        || "must be >= 1".into(),
        push,
    );

    if let Err(e) = p.function.validate() {
        push("params.function", e.to_string());
    }
    let [lo, hi] = p.interval;
    let (dlo, dhi) = p.function.domain();
    check(lo.0 < hi.0, "params.interval", || "needs lo < hi".into(), push);
    check(
        lo.to_f64() >= dlo && hi.to_f64() <= dhi,
        "params.interval",
        || format!("must lie inside the function domain [{dlo}, {dhi}]"),
        push,
    );
    if let Err(e) = p.dini_schedule.to_schedule().validate() {
        push("params.dini_schedule", e.to_string());
    }
    check(
        p.resolution > 0,
        "params.resolution",
        || "must be positive".into(),
        push,
    );
    check(
        p.threshold > 0.0,
        "params.threshold",
        || "must be positive".into(),
        push,
    );
    check(
        p.grid_intervals > 0,
        "params.grid_intervals",
        || "must be positive".into(),
        push,
    );
    check(p.cap > 0.0, "params.cap", || "must be positive".into(), push);
    check(
        p.median_window % 2 == 1,
        "params.median_window",
        || "must be odd".into(),
        push,
    );

    check(
        p.denominator > 0,
        "params.denominator",
        || "must be positive".into(),
        push,
    );
    check(
        p.probe_range[0] <= p.probe_range[1],
        "params.probe_range",
        || "needs lo <= hi".into(),
        push,
    );
    check(
        p.t_max > 0.0 && finite(p.t_max),
        "params.t_max",
        || "must be positive".into(),
        push,
    );
    check(p.tol >= 0.0, "params.tol", || "must be >= 0".into(), push);
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    if let Err(e) = serde_json::from_str::<serde_json::Value>(text) {
        return Err(Error::ConfigSyntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        });
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(vec![ConfigIssue {
            path: if path == "." { String::new() } else { path },
            message: e.into_inner().to_string(),
        }])
    })?;
    let issues = config.issues();
    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    Ok(config)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// Built-in experiments.
pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "sawtooth-symbol",
        "sawtooth family: converged quotient -i xi at x in {0, 0.5, 0.9}",
        include_str!("../presets/sawtooth-symbol.json"),
    ),
    (
        "quadratic-index",
        "quadratic family: beta0 = 1 while the scaled path supremum grows at lambda = 0.9",
        include_str!("../presets/quadratic-index.json"),
    ),
    (
        "cantor-clock",
        "Brownian motion run on the Cantor staircase clock: diverging quotients",
        include_str!("../presets/cantor-clock.json"),
    ),
    (
        "brownian-symbol",
        "Brownian motion: Monte Carlo symbol at three ball radii",
        include_str!("../presets/brownian-symbol.json"),
    ),
    (
        "mean-reverting",
        "Levy-type process ell(x) = -x, Q = 1 at x = 1",
        include_str!("../presets/mean-reverting.json"),
    ),
    (
        "cantor-dini",
        "Dini quotients and infinite-derivative scan of the Cantor function",
        include_str!("../presets/cantor-dini.json"),
    ),
    (
        "cantor-decompose",
        "grid decomposition of t + C(t) into density and singular parts",
        include_str!("../presets/cantor-decompose.json"),
    ),
    (
        "sawtooth-homogeneity",
        "time-homogeneity check of the sawtooth family on a 1/8 grid",
        include_str!("../presets/sawtooth-homogeneity.json"),
    ),
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, _, text) = PRESETS
        .iter()
        .find(|p| p.0 == name)
        .ok_or_else(|| Error::validation(format!("unknown preset {name:?}")))?;
    parse_config(text)
}

/// One emitted file and its digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Written as `manifest.json` next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentKind,
    pub config_sha256: String,
    pub seed: u64,
    pub schema_version: u32,
    pub probsym_version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// One-line verdict summary of the experiment.
    pub headline: String,
}

struct Emitter {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
}

impl Emitter {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes)?;
        self.outputs.push(OutputFile {
            file: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }
}

/// Runs `config`, writing data files, `plot.gp` and `manifest.json` into
/// `out_dir`. Data files are byte-identical across reruns of the same config.
pub fn run_experiment(config: &ExperimentConfig, out_dir: impl AsRef<Path>) -> Result<RunSummary> {
    let issues = config.issues();
    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    let dir = out_dir.as_ref().to_path_buf();
    fs::create_dir_all(&dir)?;
    let started = Instant::now();
    let seed = config.params.base_seed()?;
    let mut em = Emitter {
        dir: dir.clone(),
        outputs: Vec::new(),
    };
    let headline = match config.experiment {
        ExperimentKind::Symbol | ExperimentKind::DetSymbol => run_symbol(config, seed, &mut em)?,
        ExperimentKind::Indices => run_indices(config, seed, &mut em)?,
        ExperimentKind::Singular => run_singular(config, &mut em)?,
        ExperimentKind::Decompose => run_decompose(config, &mut em)?,
        ExperimentKind::Homogeneity => run_homogeneity(config, &mut em)?,
    };
    em.write("plot.gp", plot_script(config.experiment).as_bytes())?;
    em.write("config.json", (config.to_json() + "\n").as_bytes())?;
    let manifest = Manifest {
        experiment: config.experiment,
        config_sha256: config.hash(),
        seed,
        schema_version: SCHEMA_VERSION,
        probsym_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs: em.outputs.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join("manifest.json"), text)?;
    Ok(RunSummary {
        out_dir: dir,
        manifest,
        headline,
    })
}

fn spec(config: &ExperimentConfig) -> Result<&ProcessSpec> {
    config
        .spec
        .as_ref()
        .ok_or_else(|| Error::validation(format!("experiment {} needs a spec", config.experiment.as_str())))
}

#[derive(Serialize)]
struct EstimateSummary {
    x: f64,
    xi: f64,
    k: Option<f64>,
    verdict: &'static str,
    re: Option<f64>,
    im: Option<f64>,
    se: Option<f64>,
    /// Analytic value where one exists.
    reference_re: Option<f64>,
    reference_im: Option<f64>,
    abs_error: Option<f64>,
}

#[derive(Serialize)]
struct KAgreement {
    x: f64,
    xi: f64,
    ks: Vec<f64>,
    pass: bool,
    reason: Option<String>,
}

fn run_symbol(config: &ExperimentConfig, seed: u64, em: &mut Emitter) -> Result<String> {
    let spec = spec(config)?;
    let p = &config.params;
    let mut estimates: Vec<SymbolEstimate> = Vec::new();
    let mut agreements = Vec::new();
    for &x in &p.x.0 {
        for &xi in &p.xi {
            let group: Vec<SymbolEstimate> = match (config.experiment, spec) {
                (ExperimentKind::DetSymbol, ProcessSpec::DetFamily(f)) => {
                    vec![det_symbol_with(f.family, x, xi, &p.t_schedule, &p.verdict)?]
                }
                _ => {
                    p.k.iter()
                        .map(|&k| estimate_symbol_with(spec, x, xi, k, &p.t_schedule, p.n_paths, seed, &p.verdict))
                        .collect::<Result<_>>()?
                }
            };
            if group.len() > 1 {
                let (_, reason) = k_agreement(&group);
                agreements.push(KAgreement {
                    x,
                    xi,
                    ks: p.k.clone(),
                    pass: reason.is_none(),
                    reason,
                });
            }
            estimates.extend(group);
        }
    }

    let summaries: Vec<EstimateSummary> = estimates
        .iter()
        .map(|e| {
            let reference = reference_symbol(spec, e.x, e.xi, &p.t_schedule).ok();
            EstimateSummary {
                x: e.x,
                xi: e.xi,
                k: e.k,
                verdict: e.verdict.as_str(),
                re: e.value.map(|v| v.re),
                im: e.value.map(|v| v.im),
                se: e.value_se,
                reference_re: reference.map(|r| r.re),
                reference_im: reference.map(|r| r.im),
                abs_error: e.value.zip(reference).map(|(v, r)| (v - r).norm()),
            }
        })
        .collect();
    em.csv("symbol_table.csv", |buf| write_symbol_table(buf, &estimates))?;
    em.json(
        "symbol.json",
        &json!({ "estimates": summaries, "k_agreement": agreements }),
    )?;

    let mut counts = [0usize; 3];
    for e in &estimates {
        counts[e.verdict as usize] += 1;
    }
    Ok(format!(
        "{} estimates: {} converged, {} diverged, {} inconclusive",
        estimates.len(),
        counts[0],
        counts[1],
        counts[2]
    ))
}

fn run_indices(config: &ExperimentConfig, seed: u64, em: &mut Emitter) -> Result<String> {
    let spec = spec(config)?;
    let p = &config.params;
    let window = p.state_window()?;
    let rs = geometric_grid(p.r_grid.r0, p.r_grid.ratio, p.r_grid.count)?;
    let samples = h_samples(|y, xi| reference_symbol(spec, y, xi, &p.t_schedule), &window, &rs)?;
    let fit = beta0(&samples)?;
    let x = p.x.0[0];
    let source = match spec {
        ProcessSpec::DetFamily(f) => PathSource::Family {
            family: f.family,
            step: p.growth_step,
        },
        _ => PathSource::Ensemble {
            spec,
            n_paths: p.growth_paths,
            seed: derive_seed(seed, GROWTH_SALT),
            step: p.growth_step,
        },
    };
    let growth = path_growth(source, x, &p.lambda, &p.growth_t)?;
    let report = IndexReport::new(samples, fit, window, growth.rows);
    report.validate()?;

    em.csv("h_samples.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["R", "H"])?;
        for s in &report.samples {
            w.write_record([s.r.to_string(), s.h.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })?;
    em.csv("growth.csv", |buf| write_growth_csv(buf, &report.growth))?;
    em.json("index_report.json", &report)?;

    let mut verdicts = String::new();
    for &l in &p.lambda {
        if let Some(r) = report.growth.iter().find(|r| r.lambda == l) {
            let _ = write!(verdicts, ", lambda {l}: {}", r.verdict.as_str());
        }
    }
    Ok(format!(
        "beta0 = {} (residual {:.2e}){verdicts}",
        report.beta0, report.residual
    ))
}

fn side_str(side: Side) -> &'static str {
    match side {
        Side::Right => "right",
        Side::Left => "left",
    }
}

fn verdict_str(v: &DiniVerdict) -> String {
    match v {
        DiniVerdict::Finite(q) => format!("finite:{q}"),
        DiniVerdict::Diverging => "diverging".into(),
        DiniVerdict::Inconclusive => "inconclusive".into(),
    }
}

fn run_singular(config: &ExperimentConfig, em: &mut Emitter) -> Result<String> {
    let p = &config.params;
    let f = &p.function;
    let schedule = p.dini_schedule.to_schedule();
    let first = schedule.steps()?[0];
    let dini_config = DiniConfig::default();
    let mut estimates = Vec::new();
    for point in &p.dini_points {
        for side in [Side::Right, Side::Left] {
            let reach = match side {
                Side::Right => point.0 + first,
                Side::Left => point.0 - first,
            };
            if f.eval_exact(&reach).is_err() {
                continue;
            }
            estimates.push(dini(f, &point.0, side, Envelope::Upper, &schedule, &dini_config)?);
        }
    }
    let hits = find_infinite_dini(
        f,
        (p.interval[0].0, p.interval[1].0),
        p.resolution,
        p.threshold,
        &schedule,
    )?;

    em.csv("dini.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["point", "side", "h", "quotient", "verdict"])?;
        for e in &estimates {
            for (h, q) in &e.quotients {
                w.write_record([
                    e.point.to_string(),
                    side_str(e.side).to_string(),
                    h.to_string(),
                    q.to_string(),
                    verdict_str(&e.verdict),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    em.csv("dini_hits.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["point", "side", "max_quotient"])?;
        for h in &hits {
            w.write_record([
                h.point.to_string(),
                side_str(h.side).to_string(),
                h.max_quotient.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    em.json(
        "singular.json",
        &json!({
            "function": f.to_string(),
            "threshold": p.threshold,
            "hit_count": hits.len(),
            "top_hits": hits.iter().take(10).collect::<Vec<_>>(),
            "estimates": estimates.iter().map(|e| json!({
                "point": e.point,
                "side": side_str(e.side),
                "max_quotient": e.max_quotient(),
                "verdict": verdict_str(&e.verdict),
            })).collect::<Vec<_>>(),
        }),
    )?;
    Ok(format!("{} points above threshold {}", hits.len(), p.threshold))
}

fn run_decompose(config: &ExperimentConfig, em: &mut Emitter) -> Result<String> {
    let p = &config.params;
    let [lo, hi] = p.interval;
    let n = p.grid_intervals;
    let values = sample_uniform(&p.function, &lo.0, &hi.0, n)?;
    let step = Rational(hi.0 - lo.0).to_f64() / n as f64;
    let cfg = DecomposeConfig {
        cap: p.cap,
        window: p.median_window,
    };
    let d = lebesgue_decompose(&values, step, &cfg)?;
    let exact = d.reconstructs(&values);
    let width = hi.0 - lo.0;
    em.csv("decomposition.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["t", "F", "density", "ac_part", "singular"])?;
        for (i, value) in values.iter().enumerate() {
            let t = lo.0 + width * Exact::new(i as i128, n as i128);
            w.write_record([
                Rational(t).to_f64().to_string(),
                value.to_string(),
                d.density[i].to_string(),
                d.ac_part[i].to_string(),
                d.singular[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })?;
    em.json(
        "decompose.json",
        &json!({
            "function": p.function.to_string(),
            "step": step,
            "cap": p.cap,
            "median_window": p.median_window,
            "capped_intervals": d.capped.len(),
            "ac_mass": d.ac_part[n] - d.ac_part[0],
            "singular_mass": d.singular[n] - d.singular[0],
            "reconstructs_exactly": exact,
        }),
    )?;
    Ok(format!(
        "ac mass {:.6}, singular mass {:.6}, exact reconstruction: {exact}",
        d.ac_part[n] - d.ac_part[0],
        d.singular[n] - d.singular[0]
    ))
}

fn run_homogeneity(config: &ExperimentConfig, em: &mut Emitter) -> Result<String> {
    let p = &config.params;
    let ProcessSpec::DetFamily(f) = spec(config)? else {
        return Err(Error::validation("homogeneity needs a det_family spec"));
    };
    let d = p.denominator as f64;
    let grid: Vec<f64> = (0..=(p.t_max * d).floor() as u64).map(|j| j as f64 / d).collect();
    let probe = HomogeneityProbe {
        starts: f.family.probe_points(p.probe_range[0], p.probe_range[1], p.denominator),
        times: grid.clone(),
        shifts: grid[1..].to_vec(),
    };
    let report = check_time_homogeneity(&f.family, &probe, p.tol)?;
    em.json(
        "homogeneity.json",
        &json!({ "probe": probe, "tol": p.tol, "report": report }),
    )?;
    Ok(match &report.witness {
        None => format!("pass over {} matched pairs", report.matched_pairs),
        Some(w) => format!(
            "fail: f_{}({} + {}) = {} but f_{}({} + {}) = {}",
            w.x, w.s, w.h, w.left, w.y, w.t, w.h, w.right
        ),
    })
}

fn plot_script(kind: ExperimentKind) -> String {
    let body = match kind {
        ExperimentKind::Symbol | ExperimentKind::DetSymbol => {
            "set logscale x\nset xlabel 't'\nset ylabel 'quotient'\n\
             plot 'symbol_table.csv' using 4:5 with linespoints title 'Re q', \\\n     \
             '' using 4:6 with linespoints title 'Im q'\n"
        }
        ExperimentKind::Indices => {
            "set logscale xy\nset xlabel 'R'\nset ylabel 'H(R)'\n\
             plot 'h_samples.csv' using 1:2 with linespoints title 'H(R)'\n\
             pause -1\nset xlabel 't'\nset ylabel 't^(-1/lambda) sup|X - x|'\n\
             plot 'growth.csv' using 2:3:1 with linespoints lc variable title 'scaled sup'\n"
        }
        ExperimentKind::Singular => {
            "set logscale xy\nset xlabel '|h|'\nset ylabel 'quotient'\n\
             plot 'dini.csv' using (abs($3)):4 with points title 'Dini quotients'\n"
        }
        ExperimentKind::Decompose => {
            "set xlabel 't'\n\
             plot 'decomposition.csv' using 1:2 with lines title 'F', \\\n     \
             '' using 1:4 with lines title 'ac part', \\\n     \
             '' using 1:5 with lines title 'singular part'\n"
        }
        ExperimentKind::Homogeneity => "# homogeneity.json holds the report; nothing to plot\n",
    };
    format!("# gnuplot script\nset datafile separator ','\nset key autotitle columnhead\n{body}")
}

/// Process exit code for an error: 2 for bad input, 3 for failed runs.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        2
    } else {
        3
    }
}

/// Machine-readable error document.
pub fn error_json(err: &Error) -> serde_json::Value {
    let kind = if err.is_validation() { "validation" } else { "runtime" };
    let mut doc = json!({ "status": "error", "kind": kind, "message": err.to_string() });
    match err {
        Error::Config(issues) => doc["issues"] = json!(issues),
        Error::ConfigSyntax { line, column, .. } => {
            doc["line"] = json!(line);
            doc["column"] = json!(column);
        }
        _ => {}
    }
    doc
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"version": 1, "experiment": "symbol", "spec": {"kind": "levy", "Q": 1}, "params": {"seed": 3}}"#;

    fn issues_of(text: &str) -> Vec<ConfigIssue> {
        match parse_config(text) {
            Err(Error::Config(issues)) => issues,
            other => panic!("expected config issues, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.params.t_schedule, TSchedule::new(0.1, 0.5, 8));
        assert_eq!(c.params.n_paths, 10_000);
        let again = parse_config(&c.to_json()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_config("{\n  \"version\": 1,\n  oops\n}") {
            Err(Error::ConfigSyntax { line, column, .. }) => assert_eq!((line, column), (3, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_are_all_reported() {
        let text = r#"{"version": 1, "experiment": "symbol", "spec": {"kind": "levy", "Q": -1},
                       "params": {"seed": 1, "t_schedule": {"t0": 0.1, "ratio": 1.5, "count": 4}}}"#;
        let issues = issues_of(text);
        let paths: Vec<&str> = issues.iter().map(|i| i.path.as_str()).collect();
        assert_eq!(paths, ["spec.Q", "params.t_schedule.ratio"]);
        assert!(issues[1].message.contains("schedule must decrease"));
    }

    #[test]
    fn unknown_keys_and_missing_seed() {
        let issues = issues_of(r#"{"version": 1, "experiment": "symbol", "spec": {"kind": "levy"}, "parms": {}}"#);
        assert!(issues[0].message.contains("unknown field `parms`"));
        let issues =
            issues_of(r#"{"version": 1, "experiment": "symbol", "spec": {"kind": "levy"}, "params": {"sed": 1}}"#);
        assert_eq!(issues[0].path, "params.sed");
        let issues = issues_of(r#"{"version": 1, "experiment": "symbol", "spec": {"kind": "levy"}}"#);
        assert_eq!(issues[0].path, "params.seed");
    }

    #[test]
    fn family_experiments_need_a_family() {
        let issues =
            issues_of(r#"{"version": 1, "experiment": "det_symbol", "spec": {"kind": "levy"}, "params": {"seed": 1}}"#);
        assert_eq!(issues[0].path, "spec.kind");
    }

    #[test]
    fn rationals_parse() {
        let r: Rational = serde_json::from_str("\"1/3\"").unwrap();
        assert_eq!(r.0, Exact::new(1, 3));
        let r: Rational = serde_json::from_str("0.25").unwrap();
        assert_eq!(r.0, Exact::new(1, 4));
        assert_eq!(serde_json::to_string(&Rational(Exact::new(2, 6))).unwrap(), "\"1/3\"");
        assert!(serde_json::from_str::<Rational>("\"1/0\"").is_err());
    }

    #[test]
    fn presets_parse() {
        for (name, _, _) in PRESETS {
            preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn error_documents() {
        let e = parse_config("{").unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert_eq!(error_json(&e)["kind"], "validation");
        assert_eq!(exit_code(&Error::runtime("boom")), 3);
    }
}
