//! Metropolis-within-Gibbs sampler for the surrogate errors-in-variables model
//!
//! ```text
//! Y_i = f(X_i) + ε_i,   ε_i ~ N(0, σ²)
//! W_i = X_i + u_i,      u_i ~ N(0, δ²)
//! X_i ~ DP Gaussian mixture,  f = random-Fourier-feature surrogate
//! ```
//!
//! One sweep updates, in order: frequencies (random-walk MH), phases
//! (independence MH), amplitudes (exact Gaussian draw), the mixture (blocked
//! Gibbs), latent covariates (MH with the prior-times-measurement proposal),
//! the bandwidth λ, σ² and finally δ².
//!
//! The residual vector `Y - Φa` and the design matrix are cached and patched
//! in place whenever one frequency, phase or covariate changes, so the MH
//! blocks cost O(nN) per sweep.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::config::{Method, RunConfig};
use crate::dpmm::{DpmmState, MixtureSummary};
use crate::error::{Error, Result};
use crate::math::{ln_normal_pdf, sample_inverse_gamma};
use crate::rff::{sample_basis, RffBasis};
use crate::types::{DpmmHyper, Dataset, NoiseParam};

/// Floor applied to residual sums of squares in inverse-gamma scales.
pub const RSS_FLOOR: f64 = 1e-12;

/// Which prior the latent covariates get.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Dirichlet-process mixture prior on X.
    Mixture,
    /// A single normal prior on X (a one-component mixture).
    SingleNormal,
    /// X pinned to W; measurement error ignored.
    FixedX,
}

impl Variant {
    pub fn method(self) -> Method {
        match self {
            Variant::Mixture => Method::GpevA,
            Variant::SingleNormal => Method::GpevN,
            Variant::FixedX => Method::Gp,
        }
    }

    pub fn from_method(method: Method) -> Option<Self> {
        match method {
            Method::GpevA => Some(Variant::Mixture),
            Method::GpevN => Some(Variant::SingleNormal),
            Method::Gp => Some(Variant::FixedX),
            _ => None,
        }
    }

    fn dpmm_hyper(self, base: &DpmmHyper) -> DpmmHyper {
        match self {
            Variant::SingleNormal => DpmmHyper {
                truncation: 1,
                ..*base
            },
            _ => *base,
        }
    }
}

/// Full latent state of the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub basis: RffBasis,
    /// `None` when covariates are pinned to W.
    pub dpmm: Option<DpmmState>,
    pub x: Vec<f64>,
    pub sigma2: f64,
    pub delta2: f64,
}

/// Accepted / proposed counts for one Metropolis–Hastings block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counter {
    pub accepted: u64,
    pub proposed: u64,
}

impl Counter {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    /// Acceptance rate; zero before any proposal.
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Acceptance {
    pub frequencies: Counter,
    pub phases: Counter,
    pub latent_x: Counter,
    /// Only used by the exact-GP chain.
    pub lambda: Counter,
}

/// One retained posterior draw.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    /// Regression function on the chain's output grid.
    pub f: Vec<f64>,
    /// Surrogate basis, when the function is represented by one.
    pub basis: Option<RffBasis>,
    /// Latent covariates, when retained.
    pub x: Option<Vec<f64>>,
    pub mixture: Option<MixtureSummary>,
    pub sigma2: f64,
    pub delta2: f64,
    pub lambda: f64,
    pub log_likelihood: f64,
    /// Cumulative acceptance rates when the draw was taken.
    pub acceptance: Acceptance,
}

/// Draws kept after burn-in and thinning, plus acceptance diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainSamples {
    pub method: Method,
    pub grid: Vec<f64>,
    pub draws: Vec<Draw>,
    pub acceptance: Acceptance,
}

impl ChainSamples {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Function draws on `grid`: the stored tabulation when the grid matches,
    /// otherwise re-evaluated from each draw's basis.
    pub fn function_draws(&self, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        if grid == self.grid.as_slice() {
            return Ok(self.draws.iter().map(|d| d.f.clone()).collect());
        }
        self.draws
            .iter()
            .map(|d| match &d.basis {
                Some(b) => Ok(grid.iter().map(|t| b.eval(*t)).collect()),
                None => Err(Error::GridMismatch),
            })
            .collect()
    }
}

/// Target and proposal of the latent-covariate MH update for one observation.
///
/// The proposal `N(m, v)` with `v = 1/(1/δ² + τ)` and `m = v (W/δ² + μτ)` is
/// exactly the prior-times-measurement factor of the target, so the
/// acceptance ratio reduces to the regression likelihood ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatentTarget {
    pub y: f64,
    pub w: f64,
    pub sigma2: f64,
    pub delta2: f64,
    pub mu: f64,
    pub tau: f64,
}

impl LatentTarget {
    /// `(mean, variance)` of the proposal.
    pub fn proposal(&self) -> (f64, f64) {
        let v = 1.0 / (1.0 / self.delta2 + self.tau);
        (v * (self.w / self.delta2 + self.mu * self.tau), v)
    }

    /// Unnormalized log target at covariate `x` with regression value `fx`.
    pub fn log_target(&self, x: f64, fx: f64) -> f64 {
        ln_normal_pdf(self.y, fx, self.sigma2) + self.log_prior_measurement(x)
    }

    /// `log N(W; x, δ²) + log N(x; μ, 1/τ)`.
    pub fn log_prior_measurement(&self, x: f64) -> f64 {
        ln_normal_pdf(self.w, x, self.delta2) + ln_normal_pdf(x, self.mu, 1.0 / self.tau)
    }

    pub fn log_proposal(&self, x: f64) -> f64 {
        let (m, v) = self.proposal();
        ln_normal_pdf(x, m, v)
    }

    /// `min(0, log α)` for moving from `(x, fx)` to `(x_new, fx_new)`.
    pub fn log_acceptance(&self, from: (f64, f64), to: (f64, f64)) -> f64 {
        let ratio = self.log_target(to.0, to.1) - self.log_target(from.0, from.1)
            + self.log_proposal(from.0)
            - self.log_proposal(to.0);
        ratio.min(0.0)
    }
}

#[inline]
fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio >= 0.0 {
        return true;
    }
    rng.random::<f64>().ln() < log_ratio
}

/// Settings the sampler reads from a [`RunConfig`].
#[derive(Clone, Debug)]
struct Model {
    variant: Variant,
    dpmm: DpmmHyper,
    lambda_shape: f64,
    lambda_scale: f64,
    lambda_fixed: bool,
    lambda_shape_literal: bool,
    sigma2: NoiseParam,
    delta2: NoiseParam,
    freq_sd: f64,
}

/// Gibbs sampler holding the chain state and its caches.
#[derive(Clone, Debug)]
pub struct Sampler<'a> {
    data: &'a Dataset,
    model: Model,
    state: ChainState,
    /// `Φ` at the current `(x, w, s)`.
    phi: DMatrix<f64>,
    /// `Y - Φa`.
    resid: Vec<f64>,
    acceptance: Acceptance,
    buf: Vec<f64>,
}

impl<'a> Sampler<'a> {
    /// Starts a chain: X = W, λ at its prior mean (or fixed value), basis from
    /// the prior, amplitudes from their conditional, mixture from the prior.
    pub fn new<R: Rng + ?Sized>(
        data: &'a Dataset,
        config: &RunConfig,
        variant: Variant,
        rng: &mut R,
    ) -> Result<Self> {
        let n_basis = config.gp.n_basis_for(data.n());
        let basis = sample_basis(n_basis, config.gp.initial_lambda(), rng)?;
        let x = data.w().to_vec();
        let sigma2 = match config.noise.sigma2 {
            NoiseParam::Fixed(v) => v,
            NoiseParam::Sampled => 0.25 * sample_var(data.y()).max(1e-6),
        };
        let delta2 = match (variant, config.noise.delta2) {
            (_, NoiseParam::Fixed(v)) => v,
            (Variant::FixedX, NoiseParam::Sampled) => 0.0,
            (_, NoiseParam::Sampled) => 0.1 * sample_var(data.w()).max(1e-6),
        };
        let dpmm = match variant {
            Variant::FixedX => None,
            _ => Some(DpmmState::from_prior(
                &x,
                &variant.dpmm_hyper(&config.dpmm),
                rng,
            )),
        };
        let state = ChainState {
            basis,
            dpmm,
            x,
            sigma2,
            delta2,
        };
        let mut sampler = Self::from_state(data, config, variant, state)?;
        sampler.step_amplitudes(rng)?;
        Ok(sampler)
    }

    /// Wraps an explicit state; caches are rebuilt from it.
    pub fn from_state(
        data: &'a Dataset,
        config: &RunConfig,
        variant: Variant,
        state: ChainState,
    ) -> Result<Self> {
        if state.x.len() != data.n() {
            return Err(Error::InvalidArgument(format!(
                "state has {} covariates for {} observations",
                state.x.len(),
                data.n()
            )));
        }
        if !(state.sigma2 > 0.0) || (variant != Variant::FixedX && !(state.delta2 > 0.0)) {
            return Err(Error::InvalidArgument("variances must be > 0".into()));
        }
        if variant != Variant::FixedX && state.dpmm.is_none() {
            return Err(Error::InvalidArgument(
                "latent-covariate variants need a mixture state".into(),
            ));
        }
        let model = Model {
            variant,
            dpmm: variant.dpmm_hyper(&config.dpmm),
            lambda_shape: config.gp.lambda_prior_shape,
            lambda_scale: config.gp.lambda_prior_scale,
            lambda_fixed: config.gp.fixed_lambda.is_some(),
            lambda_shape_literal: config.sampler.lambda_shape_literal,
            sigma2: config.noise.sigma2,
            delta2: config.noise.delta2,
            freq_sd: config.sampler.freq_proposal_sd,
        };
        let phi = state.basis.design_matrix(&state.x);
        let n_basis = state.basis.n_basis();
        let mut sampler = Self {
            data,
            model,
            state,
            phi,
            resid: Vec::new(),
            acceptance: Acceptance::default(),
            buf: vec![0.0; data.n().max(n_basis)],
        };
        sampler.refresh_residuals();
        Ok(sampler)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn into_state(self) -> ChainState {
        self.state
    }

    pub fn acceptance(&self) -> Acceptance {
        self.acceptance
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn residuals(&self) -> &[f64] {
        &self.resid
    }

    pub fn rss(&self) -> f64 {
        self.resid.iter().map(|r| r * r).sum()
    }

    /// `log N(Y; Φa, σ² I)`.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.data.n() as f64;
        -0.5 * n * (TAU * self.state.sigma2).ln() - 0.5 * self.rss() / self.state.sigma2
    }

    fn refresh_residuals(&mut self) {
        let a = DVector::from_column_slice(self.state.basis.amplitudes());
        let fitted = &self.phi * a;
        self.resid = self
            .data
            .y()
            .iter()
            .zip(fitted.iter())
            .map(|(y, f)| y - f)
            .collect();
    }

    /// Change in log-likelihood when column `j` of Φ is replaced by `buf[..n]`.
    fn column_delta(&self, j: usize) -> f64 {
        let a_j = self.state.basis.amplitudes()[j];
        let col = self.phi.column(j);
        let mut delta_rss = 0.0;
        for i in 0..self.data.n() {
            let d = a_j * (self.buf[i] - col[i]);
            delta_rss += d * (d - 2.0 * self.resid[i]);
        }
        -0.5 * delta_rss / self.state.sigma2
    }

    fn commit_column(&mut self, j: usize) {
        let a_j = self.state.basis.amplitudes()[j];
        let n = self.data.n();
        let mut col = self.phi.column_mut(j);
        for i in 0..n {
            self.resid[i] -= a_j * (self.buf[i] - col[i]);
            col[i] = self.buf[i];
        }
    }

    fn fill_column(&mut self, w: f64, s: f64) {
        let scale = self.state.basis.scale();
        for (b, x) in self.buf.iter_mut().zip(&self.state.x) {
            *b = scale * (w * x + s).cos();
        }
    }

    /// Random-walk MH on each frequency with target ∝ likelihood · N(w; 0, 2/λ).
    pub fn step_frequencies<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let prior_var = 2.0 / self.state.basis.lambda();
        for j in 0..self.state.basis.n_basis() {
            let w = self.state.basis.frequencies()[j];
            let z: f64 = StandardNormal.sample(rng);
            let proposal = w + self.model.freq_sd * z;
            let s = self.state.basis.phases()[j];
            self.fill_column(proposal, s);
            let log_ratio =
                self.column_delta(j) - 0.5 * (proposal * proposal - w * w) / prior_var;
            let ok = accept(log_ratio, rng);
            self.acceptance.frequencies.record(ok);
            if ok {
                self.commit_column(j);
                self.state.basis.set_frequency(j, proposal);
            }
        }
    }

    /// Independence MH on each phase with a uniform proposal on [0, 2π).
    pub fn step_phases<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for j in 0..self.state.basis.n_basis() {
            let proposal = rng.random::<f64>() * TAU;
            let proposal = if proposal >= TAU { 0.0 } else { proposal };
            let w = self.state.basis.frequencies()[j];
            self.fill_column(w, proposal);
            let ok = accept(self.column_delta(j), rng);
            self.acceptance.phases.record(ok);
            if ok {
                self.commit_column(j);
                self.state.basis.set_phase(j, proposal);
            }
        }
    }

    /// Exact draw `a ~ N(μ̃, Σ̃)` with `Σ̃⁻¹ = ΦᵀΦ/σ² + I`, `μ̃ = Σ̃ ΦᵀY/σ²`.
    pub fn step_amplitudes<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let y = DVector::from_column_slice(self.data.y());
        let a = sample_amplitudes(&self.phi, &y, self.state.sigma2, rng)?;
        self.state
            .basis
            .amplitudes_mut()
            .copy_from_slice(a.as_slice());
        self.refresh_residuals();
        Ok(())
    }

    /// Blocked Gibbs update of labels, atoms and sticks.
    pub fn step_mixture<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if let Some(dpmm) = self.state.dpmm.as_mut() {
            dpmm.gibbs_sweep(&self.state.x, &self.model.dpmm, rng);
        }
    }

    /// MH update of each latent covariate.
    pub fn step_latent_x<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let Some(dpmm) = self.state.dpmm.as_ref() else {
            return;
        };
        let n_basis = self.state.basis.n_basis();
        let mut row = vec![0.0; n_basis];
        for i in 0..self.data.n() {
            let (mu, tau) = dpmm.atom_of(i);
            let target = LatentTarget {
                y: self.data.y()[i],
                w: self.data.w()[i],
                sigma2: self.state.sigma2,
                delta2: self.state.delta2,
                mu,
                tau,
            };
            let (m, v) = target.proposal();
            let z: f64 = StandardNormal.sample(rng);
            let x_new = m + v.sqrt() * z;
            self.state.basis.features_into(x_new, &mut row);
            let f_new: f64 = row
                .iter()
                .zip(self.state.basis.amplitudes())
                .map(|(p, a)| p * a)
                .sum();
            let x_old = self.state.x[i];
            let f_old = target.y - self.resid[i];
            let log_a = target.log_acceptance((x_old, f_old), (x_new, f_new));
            let ok = accept(log_a, rng);
            self.acceptance.latent_x.record(ok);
            if ok {
                self.state.x[i] = x_new;
                self.resid[i] = target.y - f_new;
                for (j, p) in row.iter().enumerate() {
                    self.phi[(i, j)] = *p;
                }
            }
        }
    }

    /// Gamma draw of λ given the frequencies; skipped when λ is fixed.
    pub fn step_lambda<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.model.lambda_fixed {
            return;
        }
        let lambda = sample_lambda(
            self.state.basis.frequencies(),
            self.model.lambda_shape,
            self.model.lambda_scale,
            self.model.lambda_shape_literal,
            rng,
        );
        self.state.basis.set_lambda(lambda);
    }

    /// `σ² ~ IG(n/2, RSS/2)`; skipped when σ² is fixed.
    pub fn step_sigma2<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if !self.model.sigma2.is_sampled() {
            return;
        }
        self.state.sigma2 = sample_variance(self.rss(), self.data.n(), rng);
    }

    /// `δ² ~ IG(n/2, Σ(W - X)²/2)`; skipped when δ² is fixed or X is pinned.
    pub fn step_delta2<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if !self.model.delta2.is_sampled() || self.model.variant == Variant::FixedX {
            return;
        }
        let ss: f64 = self
            .data
            .w()
            .iter()
            .zip(&self.state.x)
            .map(|(w, x)| (w - x).powi(2))
            .sum();
        self.state.delta2 = sample_variance(ss, self.data.n(), rng);
    }

    /// One full sweep in the fixed step order.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.step_frequencies(rng);
        self.step_phases(rng);
        self.step_amplitudes(rng)?;
        self.step_mixture(rng);
        self.step_latent_x(rng);
        self.step_lambda(rng);
        self.step_sigma2(rng);
        self.step_delta2(rng);
        Ok(())
    }

    fn snapshot(&self, iteration: usize, grid: &[f64], retain_latent: bool) -> Draw {
        let basis = &self.state.basis;
        Draw {
            iteration,
            f: grid.iter().map(|t| basis.eval(*t)).collect(),
            basis: Some(basis.clone()),
            x: retain_latent.then(|| self.state.x.clone()),
            mixture: self.state.dpmm.as_ref().map(DpmmState::summary),
            sigma2: self.state.sigma2,
            delta2: self.state.delta2,
            lambda: basis.lambda(),
            log_likelihood: self.log_likelihood(),
            acceptance: self.acceptance,
        }
    }
}

fn sample_var(xs: &[f64]) -> f64 {
    crate::math::sample_sd(xs).powi(2)
}

/// `a ~ N(μ̃, Σ̃)` through a Cholesky factor of the posterior precision.
pub fn sample_amplitudes<R: Rng + ?Sized>(
    phi: &DMatrix<f64>,
    y: &DVector<f64>,
    sigma2: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n_basis = phi.ncols();
    let mut precision = phi.tr_mul(phi) / sigma2;
    for j in 0..n_basis {
        precision[(j, j)] += 1.0;
    }
    let chol = precision.cholesky().ok_or_else(|| {
        Error::Factorization("amplitude posterior precision is not positive definite".into())
    })?;
    let rhs = phi.tr_mul(y) / sigma2;
    let mean = chol.solve(&rhs);
    let z = DVector::from_fn(n_basis, |_, _| StandardNormal.sample(rng));
    let offset = chol
        .l()
        .tr_solve_lower_triangular(&z)
        .ok_or_else(|| Error::Factorization("triangular solve failed".into()))?;
    Ok(mean + offset)
}

/// Gamma draw of λ. The conjugate shape is `a0 + N/2`; `literal_shape`
/// switches to shape `a0`. Scale is `b0 / (1 + b0 Σ w_j² / 4)`.
pub fn sample_lambda<R: Rng + ?Sized>(
    frequencies: &[f64],
    prior_shape: f64,
    prior_scale: f64,
    literal_shape: bool,
    rng: &mut R,
) -> f64 {
    let (shape, scale) = lambda_conditional(frequencies, prior_shape, prior_scale, literal_shape);
    Gamma::new(shape, scale)
        .expect("positive gamma parameters")
        .sample(rng)
        .max(f64::MIN_POSITIVE)
}

/// `(shape, scale)` of the λ full conditional.
pub fn lambda_conditional(
    frequencies: &[f64],
    prior_shape: f64,
    prior_scale: f64,
    literal_shape: bool,
) -> (f64, f64) {
    let ss: f64 = frequencies.iter().map(|w| w * w).sum();
    let scale = prior_scale / (1.0 + prior_scale * ss / 4.0);
    let shape = if literal_shape {
        prior_shape
    } else {
        prior_shape + 0.5 * frequencies.len() as f64
    };
    (shape, scale)
}

/// `IG(n/2, max(ss, RSS_FLOOR)/2)`: the full conditional of a Gaussian
/// variance under the prior `p(v) ∝ 1/v`.
pub fn sample_variance<R: Rng + ?Sized>(ss: f64, n: usize, rng: &mut R) -> f64 {
    sample_inverse_gamma(0.5 * n as f64, 0.5 * ss.max(RSS_FLOOR), rng).max(f64::MIN_POSITIVE)
}

/// Runs one chain of the surrogate model and keeps every `thin`-th draw
/// after burn-in.
pub fn run_chain<R: Rng + ?Sized>(
    data: &Dataset,
    config: &RunConfig,
    variant: Variant,
    rng: &mut R,
) -> Result<ChainSamples> {
    let settings = &config.sampler;
    let grid = config.grid.values();
    let mut sampler = Sampler::new(data, config, variant, rng)?;
    let mut draws = Vec::with_capacity(settings.retained_draws());
    for it in 0..settings.iterations {
        sampler
            .sweep(rng)
            .map_err(|_| Error::NonFiniteLogLikelihood { sweep: it })?;
        if !sampler.log_likelihood().is_finite() {
            return Err(Error::NonFiniteLogLikelihood { sweep: it });
        }
        if it >= settings.burn_in && (it - settings.burn_in + 1) % settings.thin == 0 {
            draws.push(sampler.snapshot(it, &grid, settings.retain_latent));
        }
    }
    Ok(ChainSamples {
        method: variant.method(),
        grid,
        draws,
        acceptance: sampler.acceptance(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RawConfig;
    use crate::config::validate_config;
    use crate::types::RngSeed;

    fn toy_data(n: usize, seed: u64) -> Dataset {
        let mut rng = RngSeed(seed).rng();
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        let y = x
            .iter()
            .map(|v| (v * 1.2).sin() + 0.2 * crate::math::std_normal(&mut rng))
            .collect();
        let w = x
            .iter()
            .map(|v| v + 0.1 * crate::math::std_normal(&mut rng))
            .collect();
        Dataset::new(y, w).unwrap()
    }

    fn config(json: &str) -> RunConfig {
        validate_config(&RawConfig::from_json(json).unwrap()).unwrap()
    }

    #[test]
    fn counters() {
        let mut c = Counter::default();
        assert_eq!(c.rate(), 0.0);
        c.record(true);
        c.record(false);
        c.record(true);
        assert_eq!((c.accepted, c.proposed), (2, 3));
        assert!((c.rate() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn caches_track_state_through_sweeps() {
        let data = toy_data(60, 1);
        let cfg = config(r#"{"n_basis": 12, "sigma2": "sample", "delta2": "sample"}"#);
        let mut rng = RngSeed(2).rng();
        let mut s = Sampler::new(&data, &cfg, Variant::Mixture, &mut rng).unwrap();
        for _ in 0..30 {
            s.sweep(&mut rng).unwrap();
            let fresh = s.state().basis.design_matrix(&s.state().x);
            assert!((&fresh - s.design()).amax() < 1e-12);
            for (i, x) in s.state().x.iter().enumerate() {
                let r = data.y()[i] - s.state().basis.eval(*x);
                assert!((r - s.residuals()[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_step_frequency_proposal_always_accepts() {
        let data = toy_data(30, 3);
        let cfg = config(r#"{"n_basis": 8, "sigma2": 0.04, "delta2": 0.01, "freq_proposal_sd": 0.0}"#);
        let mut rng = RngSeed(4).rng();
        let mut s = Sampler::new(&data, &cfg, Variant::Mixture, &mut rng).unwrap();
        let before = s.state().basis.clone();
        s.step_frequencies(&mut rng);
        assert_eq!(s.state().basis, before);
        let acc = s.acceptance().frequencies;
        assert_eq!(acc.accepted, acc.proposed);
        assert_eq!(acc.proposed, 8);
    }

    #[test]
    fn flat_likelihood_accepts_every_phase() {
        let data = toy_data(30, 5);
        let cfg = config(r#"{"n_basis": 6, "sigma2": 0.04, "delta2": 0.01}"#);
        let mut rng = RngSeed(6).rng();
        let mut s = Sampler::new(&data, &cfg, Variant::FixedX, &mut rng).unwrap();
        s.state.basis.amplitudes_mut().fill(0.0);
        s.refresh_residuals();
        for _ in 0..50 {
            s.step_phases(&mut rng);
            assert!(s.state().basis.phases().iter().all(|p| (0.0..TAU).contains(p)));
        }
        let acc = s.acceptance().phases;
        assert_eq!(acc.accepted, acc.proposed);
    }

    #[test]
    fn tiny_measurement_error_pins_covariates() {
        let data = toy_data(40, 7);
        let cfg = config(r#"{"n_basis": 10, "sigma2": 0.04, "delta2": 1e-8}"#);
        let mut rng = RngSeed(8).rng();
        let mut s = Sampler::new(&data, &cfg, Variant::Mixture, &mut rng).unwrap();
        let mut close = 0;
        let mut total = 0;
        for _ in 0..50 {
            s.sweep(&mut rng).unwrap();
            for (x, w) in s.state().x.iter().zip(data.w()) {
                total += 1;
                close += ((x - w).abs() < 3.0 * 1e-4) as usize;
            }
        }
        assert!(close as f64 >= 0.99 * total as f64);
    }

    #[test]
    fn fixed_x_variant_never_moves_covariates() {
        let data = toy_data(30, 9);
        let cfg = config(r#"{"n_basis": 10, "sigma2": "sample", "delta2": "sample"}"#);
        let mut rng = RngSeed(10).rng();
        let mut s = Sampler::new(&data, &cfg, Variant::FixedX, &mut rng).unwrap();
        for _ in 0..20 {
            s.sweep(&mut rng).unwrap();
        }
        assert_eq!(s.state().x, data.w());
        assert!(s.state().dpmm.is_none());
        assert_eq!(s.acceptance().latent_x.proposed, 0);
    }

    #[test]
    fn single_normal_variant_has_one_component() {
        let data = toy_data(30, 11);
        let cfg = config(r#"{"n_basis": 10, "sigma2": 0.04, "delta2": 0.05}"#);
        let mut rng = RngSeed(12).rng();
        let mut s = Sampler::new(&data, &cfg, Variant::SingleNormal, &mut rng).unwrap();
        s.sweep(&mut rng).unwrap();
        let dpmm = s.state().dpmm.as_ref().unwrap();
        assert_eq!(dpmm.truncation(), 1);
        assert_eq!(dpmm.weights(), &[1.0]);
    }

    #[test]
    fn lambda_conditional_forms() {
        let (shape, scale) = lambda_conditional(&[0.0; 4], 5.0, 1.0, false);
        assert_eq!((shape, scale), (7.0, 1.0));
        let (shape, _) = lambda_conditional(&[0.0; 4], 5.0, 1.0, true);
        assert_eq!(shape, 5.0);
        let (_, scale) = lambda_conditional(&[2.0], 5.0, 2.0, false);
        assert!((scale - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_residual_uses_floor() {
        let mut rng = RngSeed(13).rng();
        let v = sample_variance(0.0, 10, &mut rng);
        assert!(v > 0.0 && v < 1e-9, "{v}");
    }

    #[test]
    fn empty_retention_is_not_an_error() {
        let data = toy_data(20, 14);
        let cfg = config(r#"{"n_basis": 5, "iterations": 10, "burn_in": 10, "sigma2": 0.04, "delta2": 0.01}"#);
        let mut rng = RngSeed(15).rng();
        let out = run_chain(&data, &cfg, Variant::Mixture, &mut rng).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn draw_count_and_determinism() {
        let data = toy_data(25, 16);
        let cfg = config(
            r#"{"n_basis": 6, "iterations": 37, "burn_in": 10, "thin": 4, "sigma2": "sample", "delta2": "sample", "grid_points": 7}"#,
        );
        let a = run_chain(&data, &cfg, Variant::Mixture, &mut RngSeed(17).rng()).unwrap();
        let b = run_chain(&data, &cfg, Variant::Mixture, &mut RngSeed(17).rng()).unwrap();
        assert_eq!(a.len(), (37 - 10) / 4);
        assert_eq!(a, b);
        assert!(a.draws.iter().all(|d| d.log_likelihood.is_finite()));
        assert!(a.draws.iter().all(|d| d.f.len() == 7));
        let acc = a.acceptance;
        for c in [acc.frequencies, acc.phases, acc.latent_x] {
            assert!((0.0..=1.0).contains(&c.rate()));
            assert!(c.accepted <= c.proposed);
        }
    }

    #[test]
    fn function_draws_on_other_grids() {
        let data = toy_data(25, 18);
        let cfg = config(r#"{"n_basis": 6, "iterations": 12, "burn_in": 2, "thin": 5, "sigma2": 0.04, "delta2": 0.01}"#);
        let out = run_chain(&data, &cfg, Variant::Mixture, &mut RngSeed(19).rng()).unwrap();
        let same = out.function_draws(&out.grid).unwrap();
        assert_eq!(same[0], out.draws[0].f);
        let other = out.function_draws(&[0.0, 1.0]).unwrap();
        let b = out.draws[1].basis.as_ref().unwrap();
        assert_eq!(other[1], vec![b.eval(0.0), b.eval(1.0)]);
    }
}
