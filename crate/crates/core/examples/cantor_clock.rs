//! Brownian motion run on the Cantor staircase clock. At t = 3^-n the clock
//! has advanced by 2^-n, so the quotient grows like (3/2)^n and the small-time
//! limit does not exist.

use probsym::procsim::{ClockSpec, LevyTriplet, ProcessSpec};
use probsym::symbol::{estimate_symbol, TSchedule};

fn main() -> probsym::Result<()> {
    let spec = ProcessSpec::clocked(LevyTriplet::brownian(1.0), ClockSpec::cantor());
    let schedule = TSchedule::new(1.0 / 9.0, 1.0 / 3.0, 7);
    let est = estimate_symbol(&spec, 0.0, 1.0, 10.0, &schedule, 100_000, 7)?;
    let mut prev: Option<f64> = None;
    for (n, row) in est.rows.iter().enumerate() {
        let n = n as i32 + 2;
        let exact = (1.0 - (-(0.5f64.powi(n + 1))).exp()) * 3f64.powi(n);
        let q = row.quotient.value.re;
        let ratio = prev.map(|p| format!("{:.3}", q / p)).unwrap_or_default();
        println!("t = 3^-{n}: Re q = {q:>8.4} (exact {exact:>8.4}) ratio {ratio}");
        prev = Some(q);
    }
    println!("verdict: {}", est.verdict.as_str());
    Ok(())
}
