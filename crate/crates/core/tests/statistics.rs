mod common;

use num_complex::Complex64;
use probsym::indices::{path_growth, GrowthVerdict, PathSource};
use probsym::procsim::{
    first_exit_time, simulate, simulate_clocked, simulate_ensemble, simulate_levy, simulate_levy_type, ClockSpec,
    Coefficient, DetFamily, DiffChar, ExitTime, JumpSize, LevyTriplet, ProcessSpec, TimeGrid,
};
use probsym::singular::staircase_extend;
use probsym::symbol::{estimate_symbol, k_independence_check_with, mc_quotient, TSchedule, Verdict};

const PATHS: usize = 10_000;

fn finals(spec: &ProcessSpec, grid: &TimeGrid, seed: u64) -> Vec<f64> {
    simulate_ensemble(spec, 0.0, grid, seed, PATHS)
        .unwrap()
        .iter()
        .map(|p| p.final_state())
        .collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn brownian_variance_at_one() {
    let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
    let (_, var) = mean_var(&finals(&ProcessSpec::Levy(LevyTriplet::brownian(1.0)), &grid, 11));
    assert!((0.95..=1.05).contains(&var), "variance {var}");
}

#[test]
fn poisson_jump_count_mean() {
    let spec = ProcessSpec::Levy(LevyTriplet::compound_poisson(1.0, JumpSize::Constant(2.0)));
    let grid = TimeGrid::new(vec![0.0, 1.0]).unwrap();
    let paths = simulate_ensemble(&spec, 0.0, &grid, 12, PATHS).unwrap();
    let mean = paths.iter().map(|p| p.jump_times.len() as f64).sum::<f64>() / PATHS as f64;
    assert!((0.95..=1.05).contains(&mean), "mean jumps {mean}");
    for p in &paths {
        assert_eq!(p.final_state(), 2.0 * p.jump_times.len() as f64);
    }
}

#[test]
fn pure_drift_and_null_characteristics_are_exact() {
    let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
    assert_eq!(
        simulate_levy(&LevyTriplet::drift(1.0), 0.0, &grid, 1).unwrap().states,
        vec![0.0, 0.5, 1.0]
    );
    let null = DiffChar {
        drift: Coefficient::Constant(0.0),
        diffusion: Coefficient::Constant(0.0),
        jumps: vec![],
    };
    let fine = TimeGrid::uniform(1.0, 1000).unwrap();
    assert!(simulate_levy_type(&null, 0.7, &fine, 1)
        .unwrap()
        .states
        .iter()
        .all(|&x| x == 0.7));
    let unit = DiffChar {
        drift: Coefficient::Constant(1.0),
        ..null
    };
    let p = simulate_levy_type(&unit, 0.25, &TimeGrid::uniform(1.0, 128).unwrap(), 1).unwrap();
    // dyadic steps keep every partial sum exact
    assert!(p.times.iter().zip(&p.states).all(|(t, x)| *x == 0.25 + t));
}

#[test]
fn euler_tracks_linear_ode() {
    let ch = DiffChar {
        diffusion: Coefficient::Constant(0.0),
        ..common::mean_reverting()
    };
    let grid = TimeGrid::uniform(1.0, 1000).unwrap();
    let x1 = simulate_levy_type(&ch, 1.0, &grid, 0).unwrap().final_state();
    assert!((x1 - (-1.0f64).exp()).abs() <= 5e-3, "{x1}");
}

#[test]
fn identity_clock_reproduces_levy_bit_for_bit() {
    let grid = TimeGrid::uniform(1.0, 50).unwrap();
    for t in common::triplet_battery() {
        for seed in [0, 1, 99] {
            let plain = simulate_levy(&t, 0.2, &grid, seed).unwrap();
            let clocked = simulate_clocked(&t, &ClockSpec::Identity {}, 0.2, &grid, seed).unwrap();
            assert_eq!(plain.times, clocked.times);
            assert_eq!(plain.states, clocked.states);
            assert_eq!(plain.jump_times, clocked.jump_times);
        }
    }
}

#[test]
fn unit_state_clock_matches_levy_in_law() {
    let mut t = LevyTriplet::brownian(1.0);
    t.drift = 0.5;
    t.jumps = LevyTriplet::compound_poisson(2.0, JumpSize::Uniform { low: -1.0, high: 1.5 }).jumps;
    let g = ClockSpec::AcOfState {
        g: Coefficient::Constant(1.0),
    };
    let grid = TimeGrid::uniform(1.0, 100).unwrap();
    let a = finals(&ProcessSpec::Levy(t.clone()), &grid, 21);
    let b = finals(&ProcessSpec::clocked(t, g), &grid, 22);
    let d = ks_statistic(&a, &b);
    // c(1e-3) = sqrt(-ln(5e-4) / 2)
    let critical = 1.9495 * (2.0 / PATHS as f64).sqrt();
    assert!(d <= critical, "KS statistic {d} > {critical}");
}

#[test]
fn cantor_clock_variance_follows_the_clock() {
    let spec = ProcessSpec::clocked(LevyTriplet::brownian(1.0), ClockSpec::cantor());
    for t in [1.0 / 3.0, 1.0, 2.0] {
        let grid = TimeGrid::uniform(t, 81).unwrap();
        let (_, var) = mean_var(&finals(&spec, &grid, 31));
        let clock = staircase_extend(t).unwrap();
        assert!(
            (var / clock - 1.0).abs() <= 0.1,
            "t = {t}: variance {var}, clock {clock}"
        );
    }
}

#[test]
fn cantor_clock_paths_freeze_on_the_middle_third() {
    let spec = ProcessSpec::clocked(LevyTriplet::brownian(1.0), ClockSpec::cantor());
    let grid = TimeGrid::uniform(1.0, 270).unwrap();
    for i in 0..20 {
        let p = simulate(&spec, 0.0, &grid, 5, i).unwrap();
        let gap: Vec<f64> = p
            .times
            .iter()
            .zip(&p.states)
            .filter(|(t, _)| **t >= 0.34 && **t <= 0.66)
            .map(|(_, x)| *x)
            .collect();
        assert!(gap.len() > 50);
        assert!(gap.iter().all(|x| *x == gap[0]));
    }
}

#[test]
fn first_exit_time_examples() {
    let grid = TimeGrid::uniform(1.0, 1000).unwrap();
    let constant = simulate_levy(&LevyTriplet::default(), 0.0, &grid, 0).unwrap();
    assert_eq!(first_exit_time(&constant, 0.0, 0.01), ExitTime::EndOfPath);
    let drift = simulate_levy(&LevyTriplet::drift(1.0), 0.0, &grid, 0).unwrap();
    let exit = first_exit_time(&drift, 0.0, 0.5).time().unwrap();
    assert!(exit > 0.5 && exit <= 0.5 + 1e-3 + 1e-12, "{exit}");
    let saw = simulate(
        &ProcessSpec::family(DetFamily::Sawtooth),
        0.9,
        &TimeGrid::uniform(1.0, 100).unwrap(),
        0,
        0,
    )
    .unwrap();
    match first_exit_time(&saw, 0.9, 0.5) {
        ExitTime::At { index, time } => {
            assert!((time - 0.1).abs() < 1e-12, "{time}");
            assert_eq!(saw.states[index], 0.0);
        }
        ExitTime::EndOfPath => panic!("sawtooth never left the ball"),
    }
}

#[test]
fn quotient_examples() {
    let drift = ProcessSpec::Levy(LevyTriplet::drift(1.0));
    let q = mc_quotient(&drift, 0.0, 1.0, 10.0, 1e-3, 100, 0).unwrap();
    let exact = -(Complex64::new(0.0, 1e-3).exp() - 1.0) / 1e-3;
    assert!((q.value - exact).norm() < 1e-12);
    assert_eq!((q.se_re, q.se_im), (0.0, 0.0));

    let bm = ProcessSpec::Levy(LevyTriplet::brownian(1.0));
    let q = mc_quotient(&bm, 0.0, 1.0, 10.0, 1e-3, 200_000, 3).unwrap();
    let exact = (1.0 - (-5e-4f64).exp()) / 1e-3;
    assert!((q.value.re - exact).abs() <= 4.0 * q.se_re, "{} vs {exact}", q.value.re);
    assert!((exact - 0.49988).abs() < 1e-5);
}

#[test]
fn null_triplet_converges_to_zero() {
    let est = estimate_symbol(
        &ProcessSpec::Levy(LevyTriplet::default()),
        0.0,
        1.0,
        1.0,
        &TSchedule::new(0.1, 0.5, 8),
        1000,
        0,
    )
    .unwrap();
    assert_eq!(est.verdict, Verdict::Converged);
    assert_eq!(est.value.unwrap(), Complex64::new(0.0, 0.0));
}

#[test]
fn mismatched_specs_fail_the_k_check() {
    let report = k_independence_check_with(
        |k| ProcessSpec::Levy(LevyTriplet::drift(k)),
        0.0,
        1.0,
        &[0.5, 1.0, 2.0],
        &TSchedule::new(0.1, 0.1, 6),
        1000,
        0,
    )
    .unwrap();
    assert!(!report.pass);
    assert!(report.reason.is_some());
}

#[test]
fn brownian_growth_decays_for_small_lambda() {
    let spec = ProcessSpec::Levy(LevyTriplet::brownian(1.0));
    let table = path_growth(
        PathSource::Ensemble {
            spec: &spec,
            n_paths: 1000,
            seed: 41,
            step: 0.01,
        },
        0.0,
        &[0.5],
        &[10.0, 100.0, 1000.0],
    )
    .unwrap();
    assert_eq!(table.verdict(0.5), Some(GrowthVerdict::Decays));
}

#[test]
fn constant_path_growth_decays() {
    let spec = ProcessSpec::Levy(LevyTriplet::default());
    let table = path_growth(
        PathSource::Ensemble {
            spec: &spec,
            n_paths: 10,
            seed: 0,
            step: 0.1,
        },
        0.0,
        &[0.9],
        &[10.0, 100.0, 1000.0],
    )
    .unwrap();
    assert!(table.sup.iter().all(|s| *s == 0.0));
    assert_eq!(table.verdict(0.9), Some(GrowthVerdict::Decays));
}
