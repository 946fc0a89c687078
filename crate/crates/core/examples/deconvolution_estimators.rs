//! Deconvoluting kernel density and regression estimates with a
//! cross-validated bandwidth, compared with the naive estimate that ignores
//! the measurement error.
//!
//! cargo run --release --example deconvolution_estimators -- [delta2] [out.csv]

use gpev::config::{linspace, KernelChoice};
use gpev::decon::{decon_regression, select_bandwidth, DeconKernelSpec};
use gpev::harness::{generate, SyntheticSpec, TrueFunction};
use gpev::output::write_decon;
use gpev::summaries::amse;
use gpev::RngSeed;

fn main() -> gpev::Result<()> {
    let mut args = std::env::args().skip(1);
    let delta2: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let out = args.next();

    let spec = SyntheticSpec::standard(500, TrueFunction::F1, delta2);
    let sim = generate(&spec, &mut RngSeed(3).rng())?;
    let grid = linspace(-3.0, 3.0, 100);
    let candidates: Vec<f64> = (0..15).map(|k| 0.15 * 1.15f64.powi(k)).collect();

    for (label, delta) in [("naive", 0.0), ("deconvoluting", delta2.sqrt())] {
        let template = DeconKernelSpec::new(KernelChoice::Smooth, 1.0, delta, 513)?;
        let h = select_bandwidth(&sim.data, &template, &candidates, 5)?;
        let est = decon_regression(&sim.data, &template.with_bandwidth(h)?, &grid)?;
        let err = amse(&est.f_hat, |x| spec.function.eval(x), &grid)?;
        let clipped = est.clipped.iter().filter(|c| **c).count();
        println!("{label:>14}: h = {h:.3}, AMSE = {err:.4}, clipped points = {clipped}");
        if let (Some(path), true) = (&out, delta > 0.0) {
            write_decon(path.as_ref(), &est)?;
        }
    }
    Ok(())
}
