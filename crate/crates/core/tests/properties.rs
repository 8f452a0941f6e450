mod common;

use num_complex::Complex64;
use probsym::indices::{beta0, geometric_grid, h_of_r, h_samples, state_window, Beta0, HSample};
use probsym::procsim::{
    det_family_eval, first_exit_time, simulate, simulate_ensemble, DetFamily, ExitTime, ProcessSpec, TimeGrid,
};
use probsym::singular::{
    cantor_q64, lebesgue_decompose, minkowski_eval, DecomposeConfig, Exact, StaircaseFunction, Q64,
};
use probsym::symbol::{lk_eval, lk_eval_state, mc_quotient, Cutoff};
use proptest::prelude::*;
use rayon::ThreadPoolBuilder;

fn pool(threads: usize) -> rayon::ThreadPool {
    ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
}

fn two_pow_neg_60() -> u128 {
    // Q64 has 64 fractional bits, so 2^-60 is 16 units.
    1 << 4
}

proptest! {
    #[test]
    fn lk_symbol_is_hermitian(idx in 0usize..6, xi in -40.0f64..40.0) {
        let t = &common::triplet_battery()[idx];
        let p = lk_eval(t, xi, Cutoff::UnitBall).unwrap();
        let m = lk_eval(t, -xi, Cutoff::UnitBall).unwrap();
        prop_assert_eq!(m, p.conj());
    }

    #[test]
    fn lk_state_symbol_is_hermitian(idx in 0usize..2, x in -3.0f64..3.0, xi in -40.0f64..40.0) {
        let ch = &common::char_battery()[idx];
        let p = lk_eval_state(ch, x, xi, Cutoff::UnitBall).unwrap();
        let m = lk_eval_state(ch, x, -xi, Cutoff::UnitBall).unwrap();
        prop_assert_eq!(m, p.conj());
    }

    #[test]
    fn lk_real_part_is_nonnegative(idx in 0usize..6, xi in -100.0f64..100.0) {
        let t = &common::triplet_battery()[idx];
        prop_assert!(lk_eval(t, xi, Cutoff::UnitBall).unwrap().re >= 0.0);
    }

    #[test]
    fn lk_state_real_part_is_nonnegative(idx in 0usize..2, x in -3.0f64..3.0, xi in -100.0f64..100.0) {
        let ch = &common::char_battery()[idx];
        prop_assert!(lk_eval_state(ch, x, xi, Cutoff::UnitBall).unwrap().re >= 0.0);
    }

    #[test]
    fn lk_vanishes_at_zero(idx in 0usize..6, x in -3.0f64..3.0) {
        let zero = Complex64::new(0.0, 0.0);
        prop_assert_eq!(lk_eval(&common::triplet_battery()[idx], 0.0, Cutoff::UnitBall).unwrap(), zero);
        for ch in common::char_battery() {
            prop_assert_eq!(lk_eval_state(&ch, x, 0.0, Cutoff::UnitBall).unwrap(), zero);
        }
    }

    #[test]
    fn cantor_is_self_similar_and_symmetric((p, q) in (1i128..=1_000_000).prop_flat_map(|q| (0..=q, Just(q)))) {
        let t = Exact::new(p, q);
        let c = cantor_q64(&t).unwrap();
        let third = cantor_q64(&(t / Exact::from_integer(3))).unwrap();
        prop_assert!(third.abs_diff(Q64(c.0 / 2)) <= two_pow_neg_60());
        let mirror = cantor_q64(&(Exact::from_integer(1) - t)).unwrap();
        let one = Q64(1u128 << 64);
        prop_assert!(mirror.abs_diff(Q64(one.0 - c.0)) <= two_pow_neg_60());
    }

    #[test]
    fn staircases_are_monotone(mut ts in prop::collection::vec(0.0f64..=1.0, 2..60)) {
        ts.sort_by(f64::total_cmp);
        for f in [
            StaircaseFunction::Cantor,
            StaircaseFunction::Minkowski,
            StaircaseFunction::Composite { slope: 1.0, weight: 1.0 },
            StaircaseFunction::cantor_extended(),
        ] {
            let v: Vec<f64> = ts.iter().map(|&t| f.eval(t).unwrap()).collect();
            prop_assert!(v.windows(2).all(|w| w[0] <= w[1]), "{f} not monotone on {ts:?}");
        }
        let m: Vec<f64> = ts.iter().map(|&t| minkowski_eval(t).unwrap()).collect();
        prop_assert!(m.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn decomposition_reconstructs_exactly(
        incs in prop::collection::vec(prop_oneof![3 => 0.0f64..2.0, 1 => 0.0f64..500.0, 1 => Just(0.0)], 4..300),
        start in 0.0f64..10.0,
        cap in 1.0f64..50.0,
    ) {
        let step = 1.0 / incs.len() as f64;
        let mut values = vec![start];
        for d in &incs {
            values.push(values.last().unwrap() + d * step);
        }
        let dec = lebesgue_decompose(&values, step, &DecomposeConfig { cap, window: 5 }).unwrap();
        prop_assert!(dec.reconstructs(&values));
        prop_assert!(dec.singular.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn beta0_ignores_power_of_two_scaling(k in -20i32..20, beta in 0.1f64..3.0, noise in prop::collection::vec(0.9f64..1.1, 11)) {
        let rs = geometric_grid(10.0, 2.0, 11).unwrap();
        let samples: Vec<HSample> = rs.iter().zip(&noise).map(|(&r, n)| HSample { r, h: n * r.powf(-beta) }).collect();
        let c = 2f64.powi(k);
        let scaled: Vec<HSample> = samples.iter().map(|s| HSample { r: s.r, h: c * s.h }).collect();
        let a = beta0(&samples).unwrap();
        let b = beta0(&scaled).unwrap();
        prop_assert_eq!(a.beta0, b.beta0);
        prop_assert_eq!(a.slope.to_bits(), b.slope.to_bits());
    }

    #[test]
    fn beta0_ignores_general_scaling(c in 1e-6f64..1e6, beta in 0.1f64..3.0, noise in prop::collection::vec(0.9f64..1.1, 11)) {
        let rs = geometric_grid(10.0, 2.0, 11).unwrap();
        let samples: Vec<HSample> = rs.iter().zip(&noise).map(|(&r, n)| HSample { r, h: n * r.powf(-beta) }).collect();
        let scaled: Vec<HSample> = samples.iter().map(|s| HSample { r: s.r, h: c * s.h }).collect();
        let a = beta0(&samples).unwrap().beta0.finite().unwrap();
        let b = beta0(&scaled).unwrap().beta0.finite().unwrap();
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn beta0_recovers_power_laws(c in 1e-3f64..1e3, beta in 0.05f64..4.0, r0 in 1.0f64..100.0, ratio in 2.0f64..4.0) {
        let rs = geometric_grid(r0, ratio, 12).unwrap();
        let samples: Vec<HSample> = rs.iter().map(|&r| HSample { r, h: c * r.powf(-beta) }).collect();
        let fit = beta0(&samples).unwrap();
        prop_assert!((fit.beta0.finite().unwrap() - beta).abs() <= 1e-6);
    }

    #[test]
    fn h_is_nonincreasing_in_r(idx in 0usize..6, r0 in 1.0f64..5.0) {
        let t = common::triplet_battery()[idx].clone();
        let window = state_window(-1.0, 1.0, 5).unwrap();
        let rs = geometric_grid(r0, 2.0, 10).unwrap();
        let hs = h_samples(|_, xi| lk_eval(&t, xi, Cutoff::UnitBall), &window, &rs).unwrap();
        prop_assert!(hs.windows(2).all(|w| w[1].h <= w[0].h), "{hs:?}");
    }

    #[test]
    fn sawtooth_stays_in_its_cell(x in -5.0f64..5.0, t in 0.0f64..10.0) {
        let v = det_family_eval(DetFamily::Sawtooth, x, t).unwrap();
        prop_assert!(x.floor() <= v && v < x.floor() + 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stopped_paths_stay_in_the_ball(idx in 0usize..8, seed in any::<u64>(), x in -1.0f64..1.0, k in 0.05f64..2.0) {
        let spec = &common::mc_battery()[idx];
        let grid = TimeGrid::uniform(2.0, 200).unwrap();
        for i in 0..8 {
            let path = simulate(spec, x, &grid, seed, i).unwrap();
            let stop = match first_exit_time(&path, x, k) {
                ExitTime::At { index, .. } => {
                    prop_assert!((path.states[index] - x).abs() > k);
                    index
                }
                ExitTime::EndOfPath => path.len(),
            };
            prop_assert!(path.states[..stop].iter().all(|s| (s - x).abs() <= k));
        }
    }

    #[test]
    fn mc_quotient_vanishes_at_zero(idx in 0usize..8, seed in any::<u64>()) {
        let q = mc_quotient(&common::mc_battery()[idx], 0.5, 0.0, 1.0, 0.05, 200, seed).unwrap();
        prop_assert_eq!(q.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn paths_ignore_thread_count(idx in 0usize..8, seed in any::<u64>()) {
        let spec = &common::mc_battery()[idx];
        let grid = TimeGrid::uniform(1.0, 128).unwrap();
        let one = pool(1).install(|| simulate_ensemble(spec, 0.3, &grid, seed, 300).unwrap());
        let four = pool(4).install(|| simulate_ensemble(spec, 0.3, &grid, seed, 300).unwrap());
        prop_assert_eq!(one, four);
    }

    #[test]
    fn quotients_ignore_thread_count(idx in 0usize..8, seed in any::<u64>(), xi in -3.0f64..3.0) {
        let spec = &common::mc_battery()[idx];
        // more than one 2048-path block so the parallel reduction is exercised
        let n = 5000;
        let one = pool(1).install(|| mc_quotient(spec, 0.2, xi, 1.0, 0.05, n, seed).unwrap());
        let four = pool(4).install(|| mc_quotient(spec, 0.2, xi, 1.0, 0.05, n, seed).unwrap());
        prop_assert_eq!(one.value.re.to_bits(), four.value.re.to_bits());
        prop_assert_eq!(one.value.im.to_bits(), four.value.im.to_bits());
        prop_assert_eq!(one.se_re.to_bits(), four.se_re.to_bits());
        prop_assert_eq!(one.se_im.to_bits(), four.se_im.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn mc_quotient_is_hermitian(idx in 0usize..8, x in -1.0f64..1.0, xi in 0.1f64..3.0, seed in any::<u64>()) {
        let spec = &common::mc_battery()[idx];
        let p = mc_quotient(spec, x, xi, 2.0, 0.05, 2000, seed).unwrap();
        // common random numbers: the same paths serve both frequencies
        let m = mc_quotient(spec, x, -xi, 2.0, 0.05, 2000, seed).unwrap();
        let gap = m.value - p.value.conj();
        let se_re = (p.se_re.powi(2) + m.se_re.powi(2)).sqrt();
        let se_im = (p.se_im.powi(2) + m.se_im.powi(2)).sqrt();
        prop_assert!(gap.re.abs() <= 3.0 * se_re + 1e-12, "re gap {} se {}", gap.re, se_re);
        prop_assert!(gap.im.abs() <= 3.0 * se_im + 1e-12, "im gap {} se {}", gap.im, se_im);
    }
}

#[test]
fn null_symbol_gives_infinite_beta0() {
    let rs = geometric_grid(10.0, 2.0, 11).unwrap();
    let hs = h_samples(|_, _| Ok(Complex64::new(0.0, 0.0)), &[0.0], &rs).unwrap();
    assert_eq!(beta0(&hs).unwrap().beta0, Beta0::Infinite);
}

#[test]
fn h_of_r_rejects_nonpositive_radius() {
    let sym = |_: f64, xi: f64| Ok(Complex64::new(xi * xi / 2.0, 0.0));
    assert!(h_of_r(sym, &[0.0], 0.0).is_err());
    assert!(h_of_r(sym, &[0.0], -1.0).is_err());
    assert!((h_of_r(sym, &[0.0], 10.0).unwrap() - 0.005).abs() < 1e-15);
}

#[test]
fn cantor_invariants_on_uniform_grid() {
    let one = Q64(1u128 << 64);
    for i in 0..1000i128 {
        let t = Exact::new(i, 999);
        let c = cantor_q64(&t).unwrap();
        assert!(
            cantor_q64(&(t / Exact::from_integer(3)))
                .unwrap()
                .abs_diff(Q64(c.0 / 2))
                <= two_pow_neg_60()
        );
        let mirror = cantor_q64(&(Exact::from_integer(1) - t)).unwrap();
        assert!(mirror.abs_diff(Q64(one.0 - c.0)) <= two_pow_neg_60());
    }
}

#[test]
fn converged_mc_real_parts_are_not_negative() {
    use probsym::symbol::{estimate_symbol, TSchedule, Verdict};
    let schedule = TSchedule::new(0.1, 0.5, 5);
    for (i, spec) in common::mc_battery().iter().enumerate() {
        for xi in [0.5, 1.5] {
            let est = estimate_symbol(spec, 0.0, xi, 5.0, &schedule, 4000, 100 + i as u64).unwrap();
            if est.verdict == Verdict::Converged {
                let v = est.value.unwrap();
                assert!(v.re >= -3.0 * est.value_se.unwrap(), "{spec:?} xi {xi}: {v}");
            }
        }
    }
}

#[test]
fn deterministic_specs_are_seed_independent() {
    let spec = ProcessSpec::Levy(probsym::procsim::LevyTriplet::drift(1.0));
    let grid = TimeGrid::uniform(1.0, 10).unwrap();
    let a = simulate(&spec, 0.0, &grid, 1, 0).unwrap();
    let b = simulate(&spec, 0.0, &grid, 2, 5).unwrap();
    assert_eq!(a.states, b.states);
}

#[test]
fn decomposition_rejects_negative_start() {
    let err = lebesgue_decompose(&[-1.0, 0.0, 1.0], 0.5, &DecomposeConfig::default()).unwrap_err();
    assert!(err.is_validation());
}
