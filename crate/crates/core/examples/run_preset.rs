//! Runs a built-in experiment into a temporary directory and lists what it
//! wrote. Usage: `run_preset [name]`.

use probsym::experiment::{preset, run_experiment, PRESETS};

fn main() -> probsym::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "sawtooth-symbol".to_string());
    if !PRESETS.iter().any(|p| p.0 == name) {
        eprintln!(
            "presets: {}",
            PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
        );
    }
    let config = preset(&name)?;
    let dir = std::env::temp_dir().join(format!("probsym-{name}"));
    let summary = run_experiment(&config, &dir)?;
    println!("{}", summary.headline);
    for out in &summary.manifest.outputs {
        println!("{:>8} bytes  {}", out.bytes, dir.join(&out.file).display());
    }
    Ok(())
}
