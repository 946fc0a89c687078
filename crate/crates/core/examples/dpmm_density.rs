//! Blocked Gibbs sampling of a truncated Dirichlet-process mixture on
//! directly observed bimodal data.
//!
//! cargo run --release --example dpmm_density

use gpev::config::linspace;
use gpev::dpmm::DpmmState;
use gpev::math::std_normal;
use gpev::types::DpmmHyper;
use gpev::RngSeed;
use rand::Rng;

fn main() {
    let mut rng = RngSeed(5).rng();
    let x: Vec<f64> = (0..400)
        .map(|_| {
            let centre = if rng.random::<f64>() < 0.3 { -1.5 } else { 1.0 };
            centre + 0.4 * std_normal(&mut rng)
        })
        .collect();
    let hyper = DpmmHyper::default();
    let mut state = DpmmState::from_prior(&x, &hyper, &mut rng);
    let grid = linspace(-3.0, 3.0, 13);
    let mut avg = vec![0.0; grid.len()];
    let (burn, keep) = (200, 800);
    for it in 0..burn + keep {
        state.gibbs_sweep(&x, &hyper, &mut rng);
        if it >= burn {
            let mix = state.summary();
            for (a, t) in avg.iter_mut().zip(&grid) {
                *a += mix.density(*t) / keep as f64;
            }
        }
    }
    let truth = |t: f64| {
        let n = |m: f64| (-(t - m).powi(2) / (2.0 * 0.16)).exp() / (2.0 * std::f64::consts::PI * 0.16).sqrt();
        0.3 * n(-1.5) + 0.7 * n(1.0)
    };
    println!("active components at the last sweep: {}", state.summary().active_components());
    println!("{:>6} {:>9} {:>9}", "x", "estimate", "truth");
    for (t, a) in grid.iter().zip(&avg) {
        println!("{t:>6.2} {a:>9.4} {:>9.4}", truth(*t));
    }
}
