use gpev::config::{validate_config, RawConfig};
use gpev::gp_exact::{gp_predict, kernel_matrix, log_marginal_likelihood, run_chain_gpev_f, sample_mvn, JITTER};
use gpev::math::std_normal;
use gpev::{Dataset, RngSeed};
use nalgebra::{DMatrix, DVector};

fn k(a: f64, b: f64, lambda: f64) -> f64 {
    (-(a - b).powi(2) / lambda).exp()
}

#[test]
fn predictive_matches_explicit_inverse() {
    let x = [-1.0, -0.2, 0.5, 1.3];
    let y = [0.3, -0.1, 0.6, 1.0];
    let xs = [-0.5, 0.0, 2.0];
    let (lambda, s2) = (0.8, 0.05);
    let kxx = DMatrix::from_fn(4, 4, |i, j| k(x[i], x[j], lambda) + if i == j { s2 + JITTER } else { 0.0 });
    let inv = kxx.try_inverse().unwrap();
    let ksx = DMatrix::from_fn(3, 4, |i, j| k(xs[i], x[j], lambda));
    let kss = DMatrix::from_fn(3, 3, |i, j| k(xs[i], xs[j], lambda));
    let mean = &ksx * &inv * DVector::from_column_slice(&y);
    let cov = kss - &ksx * &inv * ksx.transpose();
    let pred = gp_predict(&x, &y, &xs, lambda, s2).unwrap();
    for i in 0..3 {
        assert!((pred.mean[i] - mean[i]).abs() < 1e-10);
        for j in 0..3 {
            assert!((pred.covariance[(i, j)] - cov[(i, j)]).abs() < 1e-10);
        }
    }
    assert_eq!(kernel_matrix(&x, &xs, lambda).shape(), (4, 3));
}

#[test]
fn marginal_likelihood_matches_dense_formula() {
    let x = [0.0, 0.7, 1.1];
    let y = [0.2, -0.4, 0.1];
    let (lambda, s2) = (1.3, 0.2);
    let kxx = DMatrix::from_fn(3, 3, |i, j| k(x[i], x[j], lambda) + if i == j { s2 + JITTER } else { 0.0 });
    let yv = DVector::from_column_slice(&y);
    let quad = (yv.transpose() * kxx.clone().try_inverse().unwrap() * &yv)[(0, 0)];
    let want = -0.5 * quad - 0.5 * kxx.determinant().ln() - 1.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((log_marginal_likelihood(&x, &y, lambda, s2).unwrap() - want).abs() < 1e-10);
    assert!(log_marginal_likelihood(&x, &y, 0.0, s2).is_err());
}

#[test]
fn mvn_draws_have_requested_moments() {
    let mean = [1.0, -1.0];
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 0.5]);
    let mut rng = RngSeed(12).rng();
    let m = 40_000;
    let (mut s0, mut s01) = (0.0, 0.0);
    for _ in 0..m {
        let d = sample_mvn(&mean, &cov, &mut rng);
        s0 += d[0];
        s01 += (d[0] - 1.0) * (d[1] + 1.0);
    }
    assert!((s0 / m as f64 - 1.0).abs() < 0.02);
    assert!((s01 / m as f64 - 0.6).abs() < 0.03);
}

#[test]
fn collapsed_chain_fits_and_repeats() {
    let mut rng = RngSeed(3).rng();
    let (mut y, mut w) = (Vec::new(), Vec::new());
    for i in 0..60 {
        let x = -2.0 + 4.0 * i as f64 / 59.0;
        y.push(x.sin() + 0.1 * std_normal(&mut rng));
        w.push(x + 0.1 * std_normal(&mut rng));
    }
    let data = Dataset::new(y, w).unwrap();
    let json = r#"{"iterations": 200, "burn_in": 100, "sigma2": 0.01, "delta2": 0.01}"#;
    let cfg = validate_config(&RawConfig::from_json(json).unwrap()).unwrap();
    let a = run_chain_gpev_f(&data, &cfg, &mut RngSeed(1).rng()).unwrap();
    let b = run_chain_gpev_f(&data, &cfg, &mut RngSeed(1).rng()).unwrap();
    assert_eq!(a, b);
    let grid = cfg.grid.values();
    let draws = a.function_draws(&grid).unwrap();
    let inner: Vec<usize> = (0..grid.len()).filter(|k| grid[*k].abs() <= 1.8).collect();
    let err: f64 = inner
        .iter()
        .map(|k| (draws.iter().map(|d| d[*k]).sum::<f64>() / draws.len() as f64 - grid[*k].sin()).powi(2))
        .sum::<f64>()
        / inner.len() as f64;
    assert!(err < 0.02, "{err}");
}
