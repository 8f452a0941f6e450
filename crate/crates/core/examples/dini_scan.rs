//! Right Dini quotients of the Cantor function at 0 are exactly (3/2)^n on
//! ternary steps; a grid scan finds many points with quotients above 50.

use probsym::singular::{dini, find_infinite_dini, DiniConfig, Envelope, Exact, Side, StaircaseFunction, StepSchedule};

fn main() -> probsym::Result<()> {
    let cantor = StaircaseFunction::Cantor;
    let schedule = StepSchedule::ternary(12);
    let zero = Exact::from_integer(0);
    let est = dini(
        &cantor,
        &zero,
        Side::Right,
        Envelope::Upper,
        &schedule,
        &DiniConfig::default(),
    )?;
    for (n, (h, q)) in est.quotients.iter().enumerate() {
        println!(
            "h = {h:.3e}  q = {q:>10.4}  (3/2)^{} = {:>10.4}",
            n + 1,
            1.5f64.powi(n as i32 + 1)
        );
    }
    println!("verdict at 0: {:?}", est.verdict);

    let hits = find_infinite_dini(&cantor, (zero, Exact::from_integer(1)), 729, 50.0, &schedule)?;
    println!("{} grid points exceed 50; largest:", hits.len());
    for hit in hits.iter().take(5) {
        println!("  x = {:.6} ({:?}) q = {:.2}", hit.point, hit.side, hit.max_quotient);
    }
    Ok(())
}
