//! Time-homogeneity of deterministic families on a 1/8 grid, plus the
//! counterexample f_x(t) = x + t^2.

use probsym::procsim::{check_time_homogeneity, DetFamily, HomogeneityProbe};

fn main() -> probsym::Result<()> {
    let grid: Vec<f64> = (0..=16).map(|j| j as f64 / 8.0).collect();
    for family in [DetFamily::Sawtooth, DetFamily::Quadratic] {
        let probe = HomogeneityProbe {
            starts: family.probe_points(0.0, 2.0, 8),
            times: grid.clone(),
            shifts: grid[1..].to_vec(),
        };
        let report = check_time_homogeneity(&family, &probe, 1e-12)?;
        println!(
            "{family:?}: pass = {} ({} matched pairs)",
            report.pass, report.matched_pairs
        );
    }

    let broken = |x: f64, t: f64| x + t * t;
    let probe = HomogeneityProbe {
        starts: vec![0.0, 1.0],
        times: vec![0.0, 1.0],
        shifts: vec![1.0],
    };
    let report = check_time_homogeneity(&broken, &probe, 1e-12)?;
    if let Some(w) = report.witness {
        println!(
            "x + t^2: f_{}({} + {}) = {} but f_{}({} + {}) = {}",
            w.x, w.s, w.h, w.left, w.y, w.t, w.h, w.right
        );
    }
    Ok(())
}
