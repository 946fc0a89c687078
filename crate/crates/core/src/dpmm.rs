//! Truncated stick-breaking Dirichlet-process Gaussian mixture with blocked
//! Gibbs updates.
//!
//! Component `h` has mean `μ_h` and precision `τ_h`. The base measure is
//! normal–gamma: `μ_h | τ_h ~ N(mu0, kappa0/τ_h)`, `τ_h ~ Ga(a_tau, rate b_tau)`.
//! The last stick is pinned to 1, so the `H` weights always form a simplex.
//! Labels are zero-based component indices.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::math::{ln_normal_pdf, normal_pdf, sample_categorical_log};
use crate::types::DpmmHyper;

#[derive(Clone, Debug, PartialEq)]
pub struct DpmmState {
    sticks: Vec<f64>,
    weights: Vec<f64>,
    means: Vec<f64>,
    precisions: Vec<f64>,
    labels: Vec<usize>,
}

/// Mixture parameters retained per posterior draw.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureSummary {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub precisions: Vec<f64>,
}

impl MixtureSummary {
    pub fn density(&self, x: f64) -> f64 {
        density(&self.weights, &self.means, &self.precisions, x)
    }

    /// Components holding non-negligible weight.
    pub fn active_components(&self) -> usize {
        self.weights.iter().filter(|w| **w > 1e-3).count()
    }
}

fn density(weights: &[f64], means: &[f64], precisions: &[f64], x: f64) -> f64 {
    weights
        .iter()
        .zip(means)
        .zip(precisions)
        .map(|((w, m), t)| w * normal_pdf(x, *m, 1.0 / t))
        .sum()
}

impl DpmmState {
    /// Builds a state from explicit parameters. Labels must index components.
    pub fn new(
        sticks: Vec<f64>,
        means: Vec<f64>,
        precisions: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let h = sticks.len();
        if h == 0 || means.len() != h || precisions.len() != h {
            return Err(Error::InvalidArgument(
                "sticks, means and precisions must share a nonzero length".into(),
            ));
        }
        if precisions.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument("precisions must be > 0".into()));
        }
        if let Some(l) = labels.iter().find(|l| **l >= h) {
            return Err(Error::InvalidArgument(format!("label {l} outside 0..{h}")));
        }
        let weights = stick_to_weights(&sticks)?;
        Ok(Self {
            sticks,
            weights,
            means,
            precisions,
            labels,
        })
    }

    /// Draws every component from the prior and assigns labels given `x`.
    pub fn from_prior<R: Rng + ?Sized>(x: &[f64], hyper: &DpmmHyper, rng: &mut R) -> Self {
        let h = hyper.truncation;
        let empty = vec![0usize; 0];
        let sticks = update_sticks(&empty, hyper.alpha, h, rng);
        let (means, precisions) = update_atoms(&[], &empty, hyper, rng);
        let weights = stick_to_weights(&sticks).expect("sampled sticks are valid");
        let mut state = Self {
            sticks,
            weights,
            means,
            precisions,
            labels: vec![0; x.len()],
        };
        state.labels = update_labels(x, &state, rng);
        state
    }

    pub fn truncation(&self) -> usize {
        self.sticks.len()
    }

    pub fn sticks(&self) -> &[f64] {
        &self.sticks
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn precisions(&self) -> &[f64] {
        &self.precisions
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// `(μ, τ)` of the component `x_i` is assigned to.
    pub fn atom_of(&self, i: usize) -> (f64, f64) {
        let h = self.labels[i];
        (self.means[h], self.precisions[h])
    }

    pub fn summary(&self) -> MixtureSummary {
        MixtureSummary {
            weights: self.weights.clone(),
            means: self.means.clone(),
            precisions: self.precisions.clone(),
        }
    }

    /// One blocked Gibbs sweep: labels, then atoms, then sticks.
    pub fn gibbs_sweep<R: Rng + ?Sized>(&mut self, x: &[f64], hyper: &DpmmHyper, rng: &mut R) {
        self.labels = update_labels(x, self, rng);
        let (means, precisions) = update_atoms(x, &self.labels, hyper, rng);
        self.means = means;
        self.precisions = precisions;
        self.sticks = update_sticks(&self.labels, hyper.alpha, self.truncation(), rng);
        self.weights = stick_to_weights(&self.sticks).expect("sampled sticks are valid");
    }
}

/// `π_h = ν_h Π_{l<h} (1 - ν_l)`. Sticks must lie in `(0, 1]`; with the last
/// stick equal to 1 the weights sum to one.
pub fn stick_to_weights(sticks: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = sticks.iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
        return Err(Error::InvalidArgument(format!("stick {v} outside (0, 1]")));
    }
    let mut remaining = 1.0;
    let mut weights = Vec::with_capacity(sticks.len());
    for (h, v) in sticks.iter().enumerate() {
        if h + 1 == sticks.len() && *v == 1.0 {
            // Remainder taken exactly so the simplex closes without rounding drift.
            let used: f64 = weights.iter().sum();
            weights.push((1.0 - used).max(0.0));
        } else {
            weights.push(v * remaining);
        }
        remaining *= 1.0 - v;
    }
    Ok(weights)
}

/// Draws each label from `p(S_i = h) ∝ π_h N(x_i; μ_h, 1/τ_h)`, in log space.
pub fn update_labels<R: Rng + ?Sized>(x: &[f64], state: &DpmmState, rng: &mut R) -> Vec<usize> {
    let log_w: Vec<f64> = state.weights.iter().map(|w| w.ln()).collect();
    let mut log_mass = vec![0.0; state.truncation()];
    x.iter()
        .map(|xi| {
            for (h, lm) in log_mass.iter_mut().enumerate() {
                *lm = log_w[h] + ln_normal_pdf(*xi, state.means[h], 1.0 / state.precisions[h]);
            }
            sample_categorical_log(&log_mass, rng)
        })
        .collect()
}

/// Conjugate normal–gamma draw of every atom; empty components come from the
/// prior. Returns `(means, precisions)` of length `hyper.truncation`.
pub fn update_atoms<R: Rng + ?Sized>(
    x: &[f64],
    labels: &[usize],
    hyper: &DpmmHyper,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let h_max = hyper.truncation;
    let mut count = vec![0usize; h_max];
    let mut sum = vec![0.0; h_max];
    for (xi, &h) in x.iter().zip(labels) {
        count[h] += 1;
        sum[h] += xi;
    }
    let mut ss = vec![0.0; h_max];
    for (xi, &h) in x.iter().zip(labels) {
        let d = xi - sum[h] / count[h] as f64;
        ss[h] += d * d;
    }

    let prior_prec = 1.0 / hyper.kappa0;
    let mut means = Vec::with_capacity(h_max);
    let mut precisions = Vec::with_capacity(h_max);
    for h in 0..h_max {
        let (k_n, m_n, a_n, b_n) = if count[h] == 0 {
            (prior_prec, hyper.mu0, hyper.a_tau, hyper.b_tau)
        } else {
            let n = count[h] as f64;
            let xbar = sum[h] / n;
            let k_n = prior_prec + n;
            let m_n = (prior_prec * hyper.mu0 + n * xbar) / k_n;
            let a_n = hyper.a_tau + 0.5 * n;
            let b_n = hyper.b_tau
                + 0.5 * ss[h]
                + 0.5 * prior_prec * n * (xbar - hyper.mu0).powi(2) / k_n;
            (k_n, m_n, a_n, b_n)
        };
        let tau = Gamma::new(a_n, 1.0 / b_n)
            .expect("positive gamma parameters")
            .sample(rng)
            .max(f64::MIN_POSITIVE);
        let mu = Normal::new(m_n, (1.0 / (k_n * tau)).sqrt())
            .expect("finite normal parameters")
            .sample(rng);
        means.push(mu);
        precisions.push(tau);
    }
    (means, precisions)
}

/// `ν_h ~ Beta(1 + n_h, α + Σ_{l>h} n_l)` for `h < H`, and `ν_H = 1`.
pub fn update_sticks<R: Rng + ?Sized>(
    labels: &[usize],
    alpha: f64,
    truncation: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut count = vec![0usize; truncation];
    for &h in labels {
        count[h] += 1;
    }
    let mut tail: usize = labels.len();
    let mut sticks = Vec::with_capacity(truncation);
    for h in 0..truncation {
        tail -= count[h];
        if h + 1 == truncation {
            sticks.push(1.0);
        } else {
            let beta = Beta::new(1.0 + count[h] as f64, alpha + tail as f64)
                .expect("positive beta parameters");
            sticks.push(beta.sample(rng).clamp(f64::MIN_POSITIVE, 1.0));
        }
    }
    sticks
}

/// `Σ_h π_h N(x; μ_h, 1/τ_h)`.
pub fn mixture_density(state: &DpmmState, x: f64) -> f64 {
    density(&state.weights, &state.means, &state.precisions, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RngSeed;
    use std::f64::consts::PI;

    #[test]
    fn weights_from_sticks() {
        assert_eq!(stick_to_weights(&[1.0]).unwrap(), vec![1.0]);
        assert_eq!(stick_to_weights(&[0.5, 0.5, 1.0]).unwrap(), vec![0.5, 0.25, 0.25]);
        let w = stick_to_weights(&[0.3, 1.0]).unwrap();
        assert!((w[0] - 0.3).abs() < 1e-15 && (w[1] - 0.7).abs() < 1e-15);
        assert!(stick_to_weights(&[0.0, 1.0]).is_err());
        assert!(stick_to_weights(&[1.2]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn closed_sticks_form_simplex(mut sticks in proptest::collection::vec(1e-9f64..1.0, 0..40)) {
            sticks.push(1.0);
            let w = stick_to_weights(&sticks).unwrap();
            proptest::prop_assert!(w.iter().all(|v| *v >= 0.0));
            proptest::prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn two_component(mu: (f64, f64)) -> DpmmState {
        DpmmState::new(vec![0.5, 1.0], vec![mu.0, mu.1], vec![1.0, 1.0], vec![]).unwrap()
    }

    #[test]
    fn single_component_labels() {
        let state = DpmmState::new(vec![1.0], vec![3.0], vec![0.1], vec![]).unwrap();
        let mut rng = RngSeed(2).rng();
        let labels = update_labels(&[-100.0, 0.0, 100.0], &state, &mut rng);
        assert_eq!(labels, vec![0, 0, 0]);
    }

    #[test]
    fn distant_component_is_chosen() {
        // Mass ratio of the near component is 1 - O(e^{-20000}).
        let state = two_component((-100.0, 100.0));
        let mut rng = RngSeed(4).rng();
        for _ in 0..1000 {
            assert_eq!(update_labels(&[100.0], &state, &mut rng), vec![1]);
        }
    }

    #[test]
    fn equidistant_point_is_a_fair_coin() {
        let state = two_component((-1.0, 1.0));
        let mut rng = RngSeed(8).rng();
        let m = 10_000;
        let ones = (0..m)
            .filter(|_| update_labels(&[0.0], &state, &mut rng)[0] == 1)
            .count();
        let freq = ones as f64 / m as f64;
        assert!((freq - 0.5).abs() < 3.0 * (0.25 / m as f64).sqrt(), "{freq}");
    }

    #[test]
    fn empty_components_from_prior() {
        // Every component empty: μ follows a Student-t with 2 a_tau dof, so
        // E[τ] = a_tau / b_tau is the easier moment to check.
        let hyper = DpmmHyper {
            truncation: 4000,
            ..DpmmHyper::default()
        };
        let mut rng = RngSeed(12).rng();
        let (_, tau) = update_atoms(&[], &[], &hyper, &mut rng);
        let mean_tau = tau.iter().sum::<f64>() / tau.len() as f64;
        assert!((mean_tau - 1.0).abs() < 4.0 * (1.0 / 4000f64).sqrt(), "{mean_tau}");
    }

    #[test]
    fn large_cluster_mean_concentrates() {
        // Posterior mean of μ is (μ0/κ0 + n c)/(1/κ0 + n) → c.
        let hyper = DpmmHyper {
            truncation: 1,
            ..DpmmHyper::default()
        };
        let c = 2.5;
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|i| c + 0.01 * ((i % 7) as f64 - 3.0)).collect();
        let labels = vec![0; n];
        let mut rng = RngSeed(13).rng();
        let draws: Vec<f64> = (0..200)
            .map(|_| update_atoms(&x, &labels, &hyper, &mut rng).0[0])
            .collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        let exact = (n as f64 * c) / (1.0 + n as f64);
        assert!((m - exact).abs() < 1e-3, "{m} vs {exact}");
        assert!((m - c).abs() < 1e-3);
    }

    #[test]
    fn symmetric_single_observation() {
        let hyper = DpmmHyper {
            truncation: 1,
            ..DpmmHyper::default()
        };
        let mut rng = RngSeed(14).rng();
        let m = 40_000;
        let draws: Vec<f64> = (0..m)
            .map(|_| update_atoms(&[0.0], &[0], &hyper, &mut rng).0[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        // Marginal posterior of μ: Student-t, 3 dof, scale² 1/3, so unit variance.
        assert!(mean.abs() < 4.0 / (m as f64).sqrt(), "{mean}");
    }

    #[test]
    fn sticks_without_data_follow_prior() {
        let mut rng = RngSeed(15).rng();
        let alpha = 2.0;
        let m = 20_000;
        let mean = (0..m)
            .map(|_| update_sticks(&[], alpha, 2, &mut rng)[0])
            .sum::<f64>()
            / m as f64;
        // Beta(1, α) has mean 1/(1+α) and variance α/((1+α)²(2+α)).
        let sd = (alpha / ((1.0 + alpha).powi(2) * (2.0 + alpha))).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 4.0 * sd / (m as f64).sqrt(), "{mean}");
    }

    #[test]
    fn concentrated_labels_push_first_stick_up() {
        let n = 200;
        let alpha = 1.0;
        let labels = vec![0usize; n];
        let mut rng = RngSeed(16).rng();
        let m = 20_000;
        let mean = (0..m)
            .map(|_| update_sticks(&labels, alpha, 5, &mut rng)[0])
            .sum::<f64>()
            / m as f64;
        let exact = (1.0 + n as f64) / (1.0 + n as f64 + alpha);
        assert!((mean - exact).abs() < 1e-3, "{mean} vs {exact}");
    }

    #[test]
    fn large_alpha_shrinks_sticks() {
        let mut rng = RngSeed(17).rng();
        let m = 5000;
        let mean = (0..m)
            .map(|_| update_sticks(&[], 1e4, 3, &mut rng)[0])
            .sum::<f64>()
            / m as f64;
        assert!(mean < 1e-3);
    }

    #[test]
    fn density_values_and_mass() {
        let single = DpmmState::new(vec![1.0], vec![0.0], vec![1.0], vec![]).unwrap();
        assert!((mixture_density(&single, 0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);

        let mirrored =
            DpmmState::new(vec![0.5, 1.0], vec![-1.3, 1.3], vec![2.0, 2.0], vec![]).unwrap();
        for x in [0.2, 1.0, 3.7] {
            assert!((mixture_density(&mirrored, x) - mixture_density(&mirrored, -x)).abs() < 1e-15);
        }

        let mut rng = RngSeed(18).rng();
        let hyper = DpmmHyper::default();
        let state = DpmmState::from_prior(&[0.0, 1.0, 2.0], &hyper, &mut rng);
        // Composite Simpson on [-50, 50]; components have sd ≤ a few units.
        let k = 200_000;
        let h = 100.0 / k as f64;
        let mut total = 0.0;
        for i in 0..=k {
            let x = -50.0 + h * i as f64;
            let wgt = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            total += wgt * mixture_density(&state, x);
        }
        total *= h / 3.0;
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn sweep_keeps_invariants() {
        let mut rng = RngSeed(19).rng();
        let hyper = DpmmHyper::default();
        let x: Vec<f64> = (0..100).map(|i| -3.0 + 0.06 * i as f64).collect();
        let mut state = DpmmState::from_prior(&x, &hyper, &mut rng);
        for _ in 0..50 {
            state.gibbs_sweep(&x, &hyper, &mut rng);
            assert!((state.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(state.precisions().iter().all(|t| *t > 0.0));
            assert_eq!(*state.sticks().last().unwrap(), 1.0);
            assert!(state.labels().iter().all(|l| *l < 20));
        }
    }
}
