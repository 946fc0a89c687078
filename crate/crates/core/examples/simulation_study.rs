//! A reduced simulation table: every estimator, several δ², a few
//! replicates. Writes the same CSV tree as `gpev simulate`.
//!
//! cargo run --release --example simulation_study -- [replicates] [iterations] [out_dir]

use std::path::PathBuf;

use gpev::config::Method;
use gpev::harness::{run_table, write_experiment_outputs, TrueFunction};
use gpev::{RngSeed, RunConfig};

fn main() -> gpev::Result<()> {
    let mut args = std::env::args().skip(1);
    let replicates: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let iterations: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "simulation_out".into()));

    let mut config = RunConfig::default();
    config.sampler.iterations = iterations;
    config.sampler.burn_in = iterations / 2;
    let delta2s = [0.01, 0.2, 1.0];
    let results = run_table(100, TrueFunction::F2, &delta2s, &Method::ALL, replicates, &config, RngSeed(42))?;

    print!("{:<8}", "method");
    for d in delta2s {
        print!(" {:>14}", format!("delta2={d}"));
    }
    println!();
    for m in Method::ALL {
        print!("{:<8}", m.name());
        for r in &results {
            let cell = r.mean_amse(m).map_or("-".into(), |a| format!("{:.2}", 100.0 * a));
            print!(" {cell:>14}");
        }
        println!();
    }
    write_experiment_outputs(&out, &results)?;
    println!("AMSE x 100; outputs in {}", out.display());
    Ok(())
}
