//! Quotients of the sawtooth family f_x(t) = floor(x) + frac(x + t) shrink
//! onto the drift symbol -i xi.

use probsym::procsim::DetFamily;
use probsym::symbol::{det_symbol, TSchedule};

fn main() -> probsym::Result<()> {
    let schedule = TSchedule::new(0.1, 0.1, 6);
    for x in [0.0, 0.5, 0.9] {
        for xi in [-2.0, -1.0, 1.0, 2.0] {
            let est = det_symbol(DetFamily::Sawtooth, x, xi, &schedule)?;
            let v = est.value.expect("sawtooth quotients converge");
            println!(
                "x = {x:<4} xi = {xi:>4}: {:<10} p = {:+.6} {:+.6}i",
                est.verdict.as_str(),
                v.re,
                v.im
            );
        }
    }
    Ok(())
}
