use gpev::diagnostics::{ks_statistic, ks_test};
use gpev::dpmm::{stick_to_weights, update_atoms, update_sticks, DpmmState};
use gpev::summaries::{amse, band_radius, fraction_in_band, mean_curve, nearest_rank, pointwise_bounds, FunctionSummary};
use gpev::types::DpmmHyper;
use gpev::RngSeed;
use proptest::prelude::*;

#[test]
fn pointwise_bounds_of_integer_ladder() {
    // Values 1..=100 at every grid point: nearest-rank 2.5% is element 3, 97.5% is element 98.
    let draws: Vec<Vec<f64>> = (1..=100).map(|v| vec![v as f64, -(v as f64)]).collect();
    let (lo, hi) = pointwise_bounds(&draws, 0.95).unwrap();
    assert_eq!(lo, vec![3.0, -98.0]);
    assert_eq!(hi, vec![98.0, -3.0]);
    assert_eq!(mean_curve(&draws).unwrap(), vec![50.5, -50.5]);
}

#[test]
fn band_radius_from_sorted_distances() {
    // Draw j is the centre shifted by j/100 at one grid point.
    let draws: Vec<Vec<f64>> = (1..=80).map(|j| vec![0.0, j as f64 / 100.0, 0.0]).collect();
    let r = band_radius(&draws, &[0.0; 3], 0.9).unwrap();
    assert!((r - 0.72).abs() < 1e-12);
    assert_eq!(fraction_in_band(&draws, &[0.0; 3], r), 0.9);
    let s = FunctionSummary::from_draws(&[0.0, 1.0, 2.0], &draws, 0.9).unwrap();
    // Around the mean curve the distances are |j/100 - 0.405|, each of
    // 0.005 + 0.01k twice; the 72nd smallest is 0.355.
    assert!((s.band_radius - 0.355).abs() < 1e-12);
    assert!((s.band_lower()[1] - (0.405 - 0.355)).abs() < 1e-12);
    assert_eq!(nearest_rank(&[5.0], 0.3), 5.0);
}

#[test]
fn amse_against_known_offset() {
    let grid: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
    let f: Vec<f64> = grid.iter().map(|t| t * t + if *t < 0.5 { 0.1 } else { -0.2 }).collect();
    // Five points off by 0.1, six by 0.2.
    let want = (5.0 * 0.01 + 6.0 * 0.04) / 11.0;
    assert!((amse(&f, |t| t * t, &grid).unwrap() - want).abs() < 1e-14);
}

#[test]
fn stick_weights_hand_values() {
    let w = stick_to_weights(&[0.5, 0.5, 1.0]).unwrap();
    assert_eq!(w, vec![0.5, 0.25, 0.25]);
    assert!(stick_to_weights(&[0.0, 1.0]).is_err());
    assert!(stick_to_weights(&[1.2]).is_err());
}

#[test]
fn atoms_concentrate_on_data() {
    let hyper = DpmmHyper { truncation: 3, ..DpmmHyper::default() };
    let x: Vec<f64> = (0..2000).map(|i| 2.0 + 0.01 * ((i % 7) as f64 - 3.0)).collect();
    let labels = vec![1usize; x.len()];
    let mut rng = RngSeed(3).rng();
    let (means, precisions) = update_atoms(&x, &labels, &hyper, &mut rng);
    assert!((means[1] - 2.0).abs() < 0.01);
    // τ | x ~ Ga(a + n/2, b + ss/2 + n κ⁻¹ (x̄ - μ0)² / (2(κ⁻¹ + n))).
    let n = x.len() as f64;
    let xbar = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - xbar).powi(2)).sum();
    let shape = hyper.a_tau + n / 2.0;
    let rate = hyper.b_tau + ss / 2.0 + n * xbar * xbar / (2.0 * (1.0 + n));
    let (m, sd) = (shape / rate, shape.sqrt() / rate);
    assert!((precisions[1] - m).abs() < 4.0 * sd, "{} vs {m} ± {sd}", precisions[1]);
    let sticks = update_sticks(&labels, 1.0, 3, &mut rng);
    assert_eq!(sticks[2], 1.0);
    // ν_1 ~ Beta(1 + 2000, 1), so it is near 1.
    assert!(sticks[1] > 0.99);
}

#[test]
fn state_from_prior_is_consistent() {
    let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
    let hyper = DpmmHyper::default();
    let mut rng = RngSeed(1).rng();
    let mut s = DpmmState::from_prior(&x, &hyper, &mut rng);
    for _ in 0..20 {
        s.gibbs_sweep(&x, &hyper, &mut rng);
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.labels().iter().all(|l| *l < hyper.truncation));
    }
    // The density integrates to about one.
    let mix = s.summary();
    let total: f64 = (0..4000).map(|i| mix.density(-20.0 + 0.01 * i as f64) * 0.01).sum();
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn ks_detects_wrong_law() {
    let mut rng = RngSeed(9).rng();
    use rand::Rng;
    let u: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    let (_, p) = ks_test(&u, |x| x.clamp(0.0, 1.0));
    assert!(p > 0.01);
    let (_, p) = ks_test(&u, |x| x.clamp(0.0, 1.0).powi(2));
    assert!(p < 1e-6);
    assert!((ks_statistic(&[0.5], |x| x) - 0.5).abs() < 1e-15);
}

proptest! {
    #[test]
    fn weights_close_the_simplex(sticks in prop::collection::vec(0.001f64..1.0, 0..30)) {
        let mut s = sticks.clone();
        s.push(1.0);
        let w = stick_to_weights(&s).unwrap();
        prop_assert!(w.iter().all(|v| *v >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
