use std::f64::consts::PI;

use gpev::config::KernelChoice;
use gpev::decon::{
    cross_validation_errors, decon_density, decon_kernel, decon_regression, phi_k, select_bandwidth,
    DeconKernel, DeconKernelSpec,
};
use gpev::{Dataset, Error};
use proptest::prelude::*;

/// `(1/π) ∫_0^1 cos(tu) φ(t) exp(a t²) dt` by composite Simpson.
fn simpson_kernel(u: f64, kernel: KernelChoice, a: f64) -> f64 {
    let m = 40_000;
    let h = 1.0 / m as f64;
    let g = |t: f64| {
        let phi = match kernel {
            KernelChoice::Smooth => (1.0 - t * t).powi(3),
            KernelChoice::Flat => 1.0,
        };
        (t * u).cos() * phi * (a * t * t).exp()
    };
    let mut s = g(0.0) + g(1.0);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    s * h / 3.0 / PI
}

#[test]
fn kernel_matches_simpson_with_error() {
    for (h, delta) in [(1.0, 0.0), (0.5, 0.3), (0.4, 0.4), (0.2, 0.1)] {
        let spec = DeconKernelSpec::new(KernelChoice::Smooth, h, delta, 513).unwrap();
        let a = delta * delta / (2.0 * h * h);
        for u in [0.0, 0.7, 2.5, 9.0] {
            let got = decon_kernel(u, &spec).unwrap();
            let want = simpson_kernel(u, KernelChoice::Smooth, a);
            assert!((got - want).abs() < 1e-9, "h={h} δ={delta} u={u}: {got} vs {want}");
        }
    }
}

#[test]
fn flat_kernel_is_sinc() {
    let spec = DeconKernelSpec::new(KernelChoice::Flat, 1.0, 0.0, 2049).unwrap();
    let k = DeconKernel::new(spec).unwrap();
    for u in [0.3, 1.0, 4.0] {
        assert!((k.eval(u) - u.sin() / (PI * u)).abs() < 1e-6);
    }
    assert_eq!(phi_k(KernelChoice::Flat, 0.5), 1.0);
    assert_eq!(phi_k(KernelChoice::Smooth, 1.5), 0.0);
    assert!((phi_k(KernelChoice::Smooth, 0.5) - 0.421875).abs() < 1e-15);
}

#[test]
fn overflow_guard() {
    // δ²/(2h²) = 0.25 / 0.0002 = 1250.
    let err = DeconKernelSpec::new(KernelChoice::Smooth, 0.01, 0.5, 513)
        .and_then(DeconKernel::new)
        .unwrap_err();
    assert!(matches!(err, Error::KernelOverflow { .. }));
    assert!(err.to_string().contains("larger bandwidth"));
}

fn fixture() -> Dataset {
    let w: Vec<f64> = (0..50).map(|i| -2.0 + 4.0 * ((i * 13) % 50) as f64 / 49.0).collect();
    let y = w.iter().map(|v| v * v - 0.5 * v).collect();
    Dataset::new(y, w).unwrap()
}

#[test]
fn delta_zero_reduces_to_kde_and_nadaraya_watson() {
    let data = fixture();
    let h = 0.35;
    let spec = DeconKernelSpec::new(KernelChoice::Smooth, h, 0.0, 513).unwrap();
    let grid: Vec<f64> = (0..30).map(|i| -1.8 + 0.12 * i as f64).collect();
    let p = decon_density(&data, &spec, &grid).unwrap();
    let r = decon_regression(&data, &spec, &grid).unwrap();
    for (k, x) in grid.iter().enumerate() {
        let weights: Vec<f64> = data
            .w()
            .iter()
            .map(|w| simpson_kernel((x - w) / h, KernelChoice::Smooth, 0.0))
            .collect();
        let kde = weights.iter().sum::<f64>() / (50.0 * h);
        let nw = weights.iter().zip(data.y()).map(|(a, b)| a * b).sum::<f64>() / weights.iter().sum::<f64>();
        assert!((p.p_hat[k] - kde).abs() < 1e-8);
        assert!((r.f_hat[k] - nw).abs() < 1e-8);
        assert!(!r.clipped[k]);
    }
}

#[test]
fn clipping_flags_sparse_regions() {
    let data = fixture();
    let spec = DeconKernelSpec::new(KernelChoice::Smooth, 0.2, 0.0, 513).unwrap();
    let r = decon_regression(&data, &spec, &[0.0, 8.0]).unwrap();
    assert!(!r.clipped[0]);
    assert!(r.clipped[1]);
    assert!(r.f_hat[1].is_finite());
}

#[test]
fn bandwidth_selection_skips_overflowing_candidates() {
    let data = fixture();
    let template = DeconKernelSpec::new(KernelChoice::Smooth, 1.0, 0.5, 257).unwrap();
    let candidates = [0.01, 0.3, 0.6];
    let errs = cross_validation_errors(&data, &template, &candidates, 5).unwrap();
    assert!(errs[0].is_none());
    assert!(errs[1].is_some() && errs[2].is_some());
    let h = select_bandwidth(&data, &template, &candidates, 5).unwrap();
    assert!(h == 0.3 || h == 0.6);
    assert!(matches!(
        select_bandwidth(&data, &template, &[0.01, 0.015], 5),
        Err(Error::NoUsableBandwidth)
    ));
}

#[test]
fn constant_truth_picks_largest_bandwidth() {
    // A ratio estimator reproduces constants exactly, so every candidate
    // has the same CV error and the tie rule prefers the smoothest.
    let w: Vec<f64> = (0..80).map(|i| -2.0 + 4.0 * ((i * 31) % 80) as f64 / 79.0).collect();
    let data = Dataset::new(vec![1.25; 80], w).unwrap();
    let template = DeconKernelSpec::new(KernelChoice::Smooth, 1.0, 0.0, 257).unwrap();
    let candidates = [0.1, 0.2, 0.3, 0.4];
    let errs = cross_validation_errors(&data, &template, &candidates, 5).unwrap();
    assert!(errs.iter().all(|e| e.unwrap() < 1e-20));
    assert_eq!(select_bandwidth(&data, &template, &candidates, 5).unwrap(), 0.4);
}

#[test]
fn linear_truth_boundary_bias_grows_with_bandwidth() {
    let w: Vec<f64> = (0..80).map(|i| -2.0 + 4.0 * ((i * 31) % 80) as f64 / 79.0).collect();
    let y = w.iter().map(|v| 0.5 + 2.0 * v).collect();
    let data = Dataset::new(y, w).unwrap();
    let template = DeconKernelSpec::new(KernelChoice::Smooth, 1.0, 0.0, 257).unwrap();
    let errs: Vec<f64> = cross_validation_errors(&data, &template, &[0.1, 0.2, 0.4], 5)
        .unwrap()
        .into_iter()
        .map(Option::unwrap)
        .collect();
    assert!(errs[0] < errs[1] && errs[1] < errs[2], "{errs:?}");
}

proptest! {
    #[test]
    fn kernel_is_even(u in 0.0f64..30.0, ratio in 0.0f64..1.0) {
        let spec = DeconKernelSpec::new(KernelChoice::Smooth, 0.5, 0.5 * ratio, 257).unwrap();
        let k = DeconKernel::new(spec).unwrap();
        prop_assert_eq!(k.eval(u), k.eval(-u));
    }
}
