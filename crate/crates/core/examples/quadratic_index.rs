//! The quadratic family has symbol -i xi / 2, so H(R) = 1 / (2R) and
//! beta0 = 1. Its paths still grow like t^2, so t^(-1/lambda) sup|X - x|
//! blows up for lambda = 0.9.

use probsym::indices::{beta0, geometric_grid, h_samples, path_growth, PathSource};
use probsym::procsim::{DetFamily, ProcessSpec};
use probsym::symbol::{reference_symbol, TSchedule};

fn main() -> probsym::Result<()> {
    let spec = ProcessSpec::family(DetFamily::Quadratic);
    let schedule = TSchedule::new(0.1, 0.1, 6);
    let window = [0.0, 0.25, 1.0, 1.25, 4.0, 4.25];
    let rs = geometric_grid(10.0, 2.0, 11)?;
    let samples = h_samples(|y, xi| reference_symbol(&spec, y, xi, &schedule), &window, &rs)?;
    for s in &samples {
        println!("R = {:>6}  H = {:.6e}", s.r, s.h);
    }
    let fit = beta0(&samples)?;
    println!("beta0 = {} (residual {:.1e})", fit.beta0, fit.residual);

    let source = PathSource::Family {
        family: DetFamily::Quadratic,
        step: 0.01,
    };
    let table = path_growth(source, 0.0, &[0.4, 0.9], &[10.0, 100.0, 1000.0])?;
    for row in &table.rows {
        println!(
            "lambda = {} t = {:>6}  scaled sup = {:.4e}  {}",
            row.lambda,
            row.t,
            row.scaled_sup,
            row.verdict.as_str()
        );
    }
    Ok(())
}
