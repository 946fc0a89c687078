//! Two-group workflow: each group gets its own fit and the summaries report
//! the change from baseline Δ(x) = f(x) - x. The treated group is simulated
//! with a positive effect that grows with the baseline.
//!
//! cargo run --release --example case_study -- [iterations]

use gpev::harness::{case_study, case_study_config, case_study_grid};
use gpev::math::std_normal;
use gpev::{Dataset, NoiseParam, RngSeed, RunConfig};

fn main() -> gpev::Result<()> {
    let iterations: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let mut rng = RngSeed(8).rng();
    let (mut y, mut w, mut group) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..240 {
        let treated = i % 2 == 0;
        let x = 0.8 * std_normal(&mut rng);
        let effect = if treated { 0.3 + 0.2 * x } else { 0.0 };
        y.push(x + effect + 0.2 * std_normal(&mut rng));
        w.push(x + 0.35f64.sqrt() * std_normal(&mut rng));
        group.push(if treated { "treatment" } else { "control" }.to_string());
    }
    let data = Dataset::with_groups(y, w, group)?;

    let mut config = case_study_config(&RunConfig::default());
    config.noise.delta2 = NoiseParam::Fixed(0.35);
    config.sampler.iterations = iterations;
    config.sampler.burn_in = iterations / 2;
    let grid = case_study_grid();
    for fit in case_study(&data, &config, RngSeed(1))? {
        let s = fit.delta_summary(&grid)?;
        println!("{} (n = {}), band radius {:.3}", fit.group, fit.n, s.band_radius);
        for k in (0..grid.len()).step_by(11) {
            println!(
                "  Δ({:+.2}) = {:+.3}  [{:+.3}, {:+.3}]",
                grid[k], s.mean[k], s.lower[k], s.upper[k]
            );
        }
    }
    Ok(())
}
