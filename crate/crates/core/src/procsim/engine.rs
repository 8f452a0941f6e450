use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use super::clock::ClockSpec;
use super::coeff::{Coefficient, DiffChar};
use super::family::{det_family_eval, DetFamily};
use super::path::{PathSample, TimeGrid};
use super::triplet::{JumpSize, LevyTriplet};
use super::ProcessSpec;
use crate::error::{Error, Result};
use crate::rng::path_rng;

/// Default Euler / Monte Carlo step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Largest grid step accepted for state-dependent (Euler) dynamics.
pub const MAX_EULER_STEP: f64 = 1e-2;

enum OpClock<'a> {
    /// Precomputed operational increments per grid step.
    Fixed(Vec<f64>),
    /// `dF = g(X) dt`, frozen at the start of each step.
    StateRate(&'a Coefficient),
}

enum Plan<'a> {
    Operational {
        triplet: &'a LevyTriplet,
        jumps: Vec<(f64, &'a JumpSize)>,
        total_rate: f64,
        clock: OpClock<'a>,
    },
    StateDependent(&'a DiffChar),
    Deterministic(DetFamily),
}

/// A validated (spec, start, grid) triple ready to produce paths.
///
/// Clock increments of deterministic clocks are computed once here and shared
/// by every path.
pub struct Simulator<'a> {
    spec: &'a ProcessSpec,
    x0: f64,
    grid: &'a TimeGrid,
    plan: Plan<'a>,
    fingerprint: String,
}

impl<'a> Simulator<'a> {
    pub fn new(spec: &'a ProcessSpec, x0: f64, grid: &'a TimeGrid) -> Result<Self> {
        Self::with_max_euler_step(spec, x0, grid, MAX_EULER_STEP)
    }

    pub fn with_max_euler_step(spec: &'a ProcessSpec, x0: f64, grid: &'a TimeGrid, max_step: f64) -> Result<Self> {
        spec.validate()?;
        if !x0.is_finite() {
            return Err(Error::validation(format!("start point {x0} is not finite")));
        }
        let triplet_plan = |triplet: &'a LevyTriplet, clock: OpClock<'a>| Plan::Operational {
            triplet,
            jumps: triplet.jumps.iter().map(|j| (j.rate, &j.size)).collect(),
            total_rate: triplet.total_rate(),
            clock,
        };
        let plan = match spec {
            ProcessSpec::Levy(t) => {
                let inc = ClockSpec::Identity {}.increments(grid.times())?.unwrap();
                triplet_plan(t, OpClock::Fixed(inc))
            }
            ProcessSpec::Clocked(c) => {
                let clock = match (&c.clock, c.clock.increments(grid.times())?) {
                    (_, Some(inc)) => OpClock::Fixed(inc),
                    (ClockSpec::AcOfState { g }, None) => OpClock::StateRate(g),
                    _ => unreachable!("only state clocks lack fixed increments"),
                };
                triplet_plan(&c.triplet, clock)
            }
            ProcessSpec::LevyType(ch) => {
                let step = grid.max_step();
                // grids built by dividing an interval overshoot by rounding
                if step > max_step * (1.0 + 1e-9) {
                    return Err(Error::validation(format!(
                        "grid step {step} exceeds the Euler maximum {max_step}"
                    )));
                }
                Plan::StateDependent(ch)
            }
            ProcessSpec::DetFamily(f) => {
                det_family_eval(f.family, x0, 0.0)?;
                Plan::Deterministic(f.family)
            }
        };
        Ok(Self {
            spec,
            x0,
            grid,
            plan,
            fingerprint: spec.fingerprint(),
        })
    }

    pub fn spec(&self) -> &ProcessSpec {
        self.spec
    }

    pub fn grid(&self) -> &TimeGrid {
        self.grid
    }

    pub fn start(&self) -> f64 {
        self.x0
    }

    /// Runs one path, calling `visit(t, x, is_jump)` at every recorded point
    /// in time order; the walk stops early when `visit` breaks.
    pub fn walk<R, V>(&self, rng: &mut R, mut visit: V) -> Result<()>
    where
        R: Rng + ?Sized,
        V: FnMut(f64, f64, bool) -> ControlFlow<()>,
    {
        let times = self.grid.times();
        let mut x = self.x0;
        if visit(times[0], x, false).is_break() {
            return Ok(());
        }
        match &self.plan {
            Plan::Deterministic(family) => {
                for &t in &times[1..] {
                    x = det_family_eval(*family, self.x0, t)?;
                    if visit(t, x, false).is_break() {
                        break;
                    }
                }
            }
            Plan::Operational {
                triplet,
                jumps,
                total_rate,
                clock,
            } => {
                for k in 0..times.len() - 1 {
                    let (t0, t1) = (times[k], times[k + 1]);
                    let dt = t1 - t0;
                    let dtau = match clock {
                        OpClock::Fixed(inc) => inc[k],
                        OpClock::StateRate(g) => {
                            let rate = g.eval(x);
                            if !(rate >= 0.0 && rate.is_finite()) {
                                return Err(Error::validation(format!(
                                    "clock rate g(x) = {rate} at x = {x} would decrease the clock"
                                )));
                            }
                            rate * dt
                        }
                    };
                    let step = Step {
                        t0,
                        t1,
                        dt,
                        dtau,
                        drift: triplet.drift,
                        diffusion: triplet.diffusion,
                        jumps,
                        total_rate: *total_rate,
                    };
                    if step.advance(rng, &mut x, &mut visit).is_break() || visit(t1, x, false).is_break() {
                        break;
                    }
                }
            }
            Plan::StateDependent(ch) => {
                for k in 0..times.len() - 1 {
                    let (t0, t1) = (times[k], times[k + 1]);
                    let dt = t1 - t0;
                    let frozen = ch.freeze(x)?;
                    let total_rate = frozen.jumps.iter().map(|j| j.0).sum();
                    let step = Step {
                        t0,
                        t1,
                        dt,
                        dtau: dt,
                        drift: frozen.drift,
                        diffusion: frozen.diffusion,
                        jumps: &frozen.jumps,
                        total_rate,
                    };
                    if step.advance(rng, &mut x, &mut visit).is_break() || visit(t1, x, false).is_break() {
                        break;
                    }
                }
            }
        }
        Ok(())
    }

    /// Path number `path_index` of the run seeded with `seed`.
    pub fn path(&self, seed: u64, path_index: u64) -> Result<PathSample> {
        let mut rng = path_rng(seed, path_index);
        let mut times = Vec::with_capacity(self.grid.times().len());
        let mut states = Vec::with_capacity(self.grid.times().len());
        let mut jump_times = Vec::new();
        self.walk(&mut rng, |t, x, jump| {
            times.push(t);
            states.push(x);
            if jump {
                jump_times.push(t);
            }
            ControlFlow::Continue(())
        })?;
        let deterministic = matches!(self.plan, Plan::Deterministic(_));
        Ok(PathSample {
            times,
            states,
            jump_times,
            seed: (!deterministic).then_some(seed),
            path_index,
            fingerprint: self.fingerprint.clone(),
        })
    }
}

/// One grid step of triplet dynamics run for operational time `dtau`.
struct Step<'s, 'j> {
    t0: f64,
    t1: f64,
    dt: f64,
    dtau: f64,
    drift: f64,
    diffusion: f64,
    jumps: &'s [(f64, &'j JumpSize)],
    total_rate: f64,
}

impl Step<'_, '_> {
    fn diffuse<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut f64, span: f64) {
        let z: f64 = rng.sample(StandardNormal);
        *x += self.drift * span + (self.diffusion * span).sqrt() * z;
    }

    fn jump_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u = rng.random::<f64>() * self.total_rate;
        for &(rate, size) in self.jumps {
            if u < rate {
                return size.sample(rng);
            }
            u -= rate;
        }
        let (_, size) = self
            .jumps
            .iter()
            .rev()
            .find(|j| j.0 > 0.0)
            .expect("positive total rate");
        size.sample(rng)
    }

    /// Exponential inter-arrival jumps inside the step (memoryless, so the
    /// arrival clock restarts at every step), Gaussian increments between them.
    fn advance<R, V>(&self, rng: &mut R, x: &mut f64, visit: &mut V) -> ControlFlow<()>
    where
        R: Rng + ?Sized,
        V: FnMut(f64, f64, bool) -> ControlFlow<()>,
    {
        let mut elapsed = 0.0;
        if self.total_rate > 0.0 && self.dtau > 0.0 {
            let scale = self.dt / self.dtau;
            let mut last = self.t0;
            loop {
                let wait = rng.sample::<f64, _>(Exp1) / self.total_rate;
                if elapsed + wait >= self.dtau {
                    break;
                }
                self.diffuse(rng, x, wait);
                elapsed += wait;
                *x += self.jump_size(rng);
                let mut t = self.t0 + elapsed * scale;
                if t <= last {
                    t = last.next_up();
                }
                if t >= self.t1 {
                    t = self.t1.next_down();
                }
                last = t;
                visit(t, *x, true)?;
            }
        }
        self.diffuse(rng, x, self.dtau - elapsed);
        ControlFlow::Continue(())
    }
}

/// Path `path_index` of any process spec.
pub fn simulate(spec: &ProcessSpec, x0: f64, grid: &TimeGrid, seed: u64, path_index: u64) -> Result<PathSample> {
    Simulator::new(spec, x0, grid)?.path(seed, path_index)
}

/// Lévy process with constant triplet: exact in law on the grid.
pub fn simulate_levy(triplet: &LevyTriplet, x0: f64, grid: &TimeGrid, seed: u64) -> Result<PathSample> {
    simulate(&ProcessSpec::Levy(triplet.clone()), x0, grid, seed, 0)
}

/// Euler scheme with coefficients frozen at the start of each step.
pub fn simulate_levy_type(ch: &DiffChar, x0: f64, grid: &TimeGrid, seed: u64) -> Result<PathSample> {
    simulate(&ProcessSpec::LevyType(ch.clone()), x0, grid, seed, 0)
}

/// Triplet dynamics in the operational time `F(t)` of `clock`.
pub fn simulate_clocked(
    triplet: &LevyTriplet,
    clock: &ClockSpec,
    x0: f64,
    grid: &TimeGrid,
    seed: u64,
) -> Result<PathSample> {
    simulate(&ProcessSpec::clocked(triplet.clone(), clock.clone()), x0, grid, seed, 0)
}

/// `n_paths` paths generated in parallel, returned in path-index order.
pub fn simulate_ensemble(
    spec: &ProcessSpec,
    x0: f64,
    grid: &TimeGrid,
    seed: u64,
    n_paths: usize,
) -> Result<Vec<PathSample>> {
    let sim = Simulator::new(spec, x0, grid)?;
    (0..n_paths as u64).into_par_iter().map(|i| sim.path(seed, i)).collect()
}
