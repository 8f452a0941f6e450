//! Monte Carlo symbol estimates against the Lévy–Khintchine formula.
//!
//! Run with `--release`; the paths count is an optional first argument.

use probsym::procsim::{Coefficient, DiffChar, JumpSize, LevyTriplet, ProcessSpec};
use probsym::symbol::{estimate_symbol, reference_symbol, TSchedule};

fn main() -> probsym::Result<()> {
    let n_paths: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let mean_reverting = DiffChar {
        drift: Coefficient::Polynomial { poly: vec![0.0, -1.0] },
        diffusion: Coefficient::Constant(1.0),
        jumps: vec![],
    };
    let fixtures = [
        ("brownian", ProcessSpec::Levy(LevyTriplet::brownian(1.0)), 0.0),
        ("drift", ProcessSpec::Levy(LevyTriplet::drift(1.0)), 0.0),
        (
            "poisson +2",
            ProcessSpec::Levy(LevyTriplet::compound_poisson(1.0, JumpSize::Constant(2.0))),
            0.0,
        ),
        ("ell(x) = -x", ProcessSpec::LevyType(mean_reverting), 1.0),
    ];
    let schedule = TSchedule::new(0.1, 0.5, 8);
    let exact = TSchedule::new(0.1, 0.1, 6);
    for (name, spec, x) in &fixtures {
        for xi in [1.0, 2.0] {
            let est = estimate_symbol(spec, *x, xi, 10.0, &schedule, n_paths, 42)?;
            let reference = reference_symbol(spec, *x, xi, &exact)?;
            match est.value {
                Some(v) => println!(
                    "{name:<12} xi = {xi}: {:.4} vs {:.4}, |err| = {:.4}, SE = {:.4}",
                    v,
                    reference,
                    (v - reference).norm(),
                    est.value_se.unwrap_or(0.0)
                ),
                None => println!("{name:<12} xi = {xi}: {}", est.verdict.as_str()),
            }
        }
    }
    Ok(())
}
