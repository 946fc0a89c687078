//! Monte Carlo moments of the random-feature prior against the squared
//! exponential kernel it approximates.
//!
//! cargo run --release --example rff_prior_moments -- [draws]

use gpev::rff::{sample_basis, se_kernel};
use gpev::RngSeed;

fn main() -> gpev::Result<()> {
    let draws: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let mut rng = RngSeed(11).rng();
    let points = [0.0, 0.5, 1.0, 2.0];
    println!("{:>4} {:>6} {:>6} {:>10} {:>10}", "N", "lambda", "y", "cov", "k(0,y)");
    for n_basis in [1, 10, 100] {
        for lambda in [0.5, 2.0] {
            let mut values = vec![Vec::with_capacity(draws); points.len()];
            for _ in 0..draws {
                let basis = sample_basis(n_basis, lambda, &mut rng)?;
                for (v, x) in values.iter_mut().zip(points) {
                    v.push(basis.eval(x));
                }
            }
            for (k, y) in points.iter().enumerate() {
                let cov = values[0].iter().zip(&values[k]).map(|(a, b)| a * b).sum::<f64>() / draws as f64;
                println!(
                    "{n_basis:>4} {lambda:>6} {y:>6} {cov:>10.4} {:>10.4}",
                    se_kernel(0.0, *y, lambda)?
                );
            }
        }
    }
    Ok(())
}
