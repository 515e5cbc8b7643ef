//! Twelve-qubit campaign over the angle grid; writes `campaign12.csv` and its manifest.
//!
//! `cargo run --release --example campaign12 -- [seeds]`

use std::path::Path;

use readout_twirl::experiment::{emit_results, run_experiment, ExperimentConfig, Method};

fn main() -> readout_twirl::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = ExperimentConfig::new(12);
    cfg.seeds = (1..=seeds).collect();

    let out = run_experiment(&cfg)?;
    emit_results(&cfg, &out, Path::new("campaign12.csv"))?;

    for &seed in &cfg.seeds {
        print!("seed {seed}:");
        for m in [Method::Twirl, Method::BitflipInverse, Method::FullInverse, Method::Unmitigated] {
            print!("  {m} {:.4}", out.max_error(m, seed, None));
        }
        println!();
    }
    println!("{} rows in {:.1}s", out.rows.len(), out.wall_time_s);
    Ok(())
}
