//! Simulates a few jump-diffusion paths and writes them as CSV to stdout.

use probsym::procsim::{
    simulate_ensemble, write_paths_csv, JumpComponent, JumpSize, LevyTriplet, ProcessSpec, TimeGrid,
};

fn main() -> probsym::Result<()> {
    let triplet = LevyTriplet {
        drift: 0.5,
        diffusion: 0.25,
        jumps: vec![JumpComponent {
            rate: 2.0,
            size: JumpSize::Uniform { low: -1.0, high: 1.0 },
        }],
    };
    let grid = TimeGrid::uniform(1.0, 100)?;
    let paths = simulate_ensemble(&ProcessSpec::Levy(triplet), 0.0, &grid, 2024, 3)?;
    for p in &paths {
        eprintln!(
            "path {}: {} jumps, X_1 = {:.4}",
            p.path_index,
            p.jump_times.len(),
            p.final_state()
        );
    }
    write_paths_csv(std::io::stdout().lock(), &paths)
}
