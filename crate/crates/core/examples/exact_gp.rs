//! Exact GP regression: predictive mean and variance at fixed
//! hyperparameters, then the collapsed errors-in-variables chain on a small
//! data set and its cost per sweep relative to the random-feature sampler.
//!
//! cargo run --release --example exact_gp

use std::time::Instant;

use gpev::config::linspace;
use gpev::gp_exact::{gp_predict, log_marginal_likelihood, run_chain_gpev_f};
use gpev::harness::{generate, simulation_config, SyntheticSpec, TrueFunction};
use gpev::sampler::{run_chain, Variant};
use gpev::summaries::posterior_mean;
use gpev::{RngSeed, RunConfig};

fn main() -> gpev::Result<()> {
    let spec = SyntheticSpec::standard(150, TrueFunction::F2, 0.05);
    let sim = generate(&spec, &mut RngSeed(9).rng())?;
    let x_star = linspace(-2.0, 2.0, 5);

    for lambda in [0.5, 2.0, 8.0] {
        let lml = log_marginal_likelihood(&sim.x, sim.data.y(), lambda, 0.04)?;
        let pred = gp_predict(&sim.x, sim.data.y(), &x_star, lambda, 0.04)?;
        println!("lambda {lambda}: log marginal likelihood {lml:.2}");
        for ((x, m), s) in x_star.iter().zip(&pred.mean).zip(pred.sd()) {
            println!("  f({x:+.1}) = {m:+.3} ± {s:.3} (truth {:+.3})", spec.function.eval(*x));
        }
    }

    let mut config = simulation_config(&RunConfig::default(), &spec);
    config.sampler.iterations = 300;
    config.sampler.burn_in = 100;
    let t = Instant::now();
    let exact = run_chain_gpev_f(&sim.data, &config, &mut RngSeed(1).rng())?;
    let t_exact = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let rff = run_chain(&sim.data, &config, Variant::Mixture, &mut RngSeed(1).rng())?;
    let t_rff = t.elapsed().as_secs_f64();
    let grid = config.grid.values();
    let (fe, fr) = (posterior_mean(&exact, &grid)?, posterior_mean(&rff, &grid)?);
    let gap = fe.iter().zip(&fr).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("exact chain {t_exact:.2} s, random-feature chain {t_rff:.2} s, max gap {gap:.3}");
    Ok(())
}
