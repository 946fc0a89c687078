//! Exact Gaussian-process regression: the predictive distribution, the log
//! marginal likelihood, and a chain that integrates the regression function
//! out analytically (GPEV_f).
//!
//! With `K = C_λ(X, X) + σ² I`, the predictive law at `X*` is
//!
//! ```text
//! mean = C(X*, X) K⁻¹ Y
//! cov  = C(X*, X*) - C(X*, X) K⁻¹ C(X, X*)
//! ```
//!
//! Every factorization adds [`JITTER`] to the diagonal of `K`.

use std::f64::consts::TAU;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{Method, RunConfig};
use crate::dpmm::DpmmState;
use crate::error::{Error, Result};
use crate::math::ln_normal_pdf;
use crate::rff::se_kernel_unchecked;
use crate::sampler::{
    run_chain, sample_variance, Acceptance, ChainSamples, Draw, LatentTarget, Variant,
};
use crate::types::{Dataset, NoiseParam};

/// Diagonal jitter added before every factorization of `C + σ² I`.
pub const JITTER: f64 = 1e-8;

/// Slack below zero tolerated on predictive variances before clamping.
const VARIANCE_SLACK: f64 = -1e-10;

/// Predictive mean and covariance at a set of points.
#[derive(Clone, Debug, PartialEq)]
pub struct GpPredictive {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
}

impl GpPredictive {
    /// Pointwise predictive standard deviations.
    pub fn sd(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

fn check_hyper(lambda: f64, sigma2: f64) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be > 0, got {sigma2}")));
    }
    Ok(())
}

/// `C(a, b)` with the squared-exponential kernel.
pub fn kernel_matrix(a: &[f64], b: &[f64], lambda: f64) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| se_kernel_unchecked(a[i], b[j], lambda))
}

/// Cholesky factor of `C(x, x) + (σ² + JITTER) I`.
fn factor(x: &[f64], lambda: f64, sigma2: f64) -> Result<Cholesky<f64, Dyn>> {
    let mut k = kernel_matrix(x, x, lambda);
    for i in 0..x.len() {
        k[(i, i)] += sigma2 + JITTER;
    }
    k.cholesky()
        .ok_or_else(|| Error::Factorization("kernel matrix is not positive definite".into()))
}

/// Predictive distribution of `f(x_star)` given noisy observations.
pub fn gp_predict(
    x_train: &[f64],
    y_train: &[f64],
    x_star: &[f64],
    lambda: f64,
    sigma2: f64,
) -> Result<GpPredictive> {
    check_hyper(lambda, sigma2)?;
    if x_train.len() != y_train.len() {
        return Err(Error::LengthMismatch {
            y: y_train.len(),
            w: x_train.len(),
        });
    }
    let prior = kernel_matrix(x_star, x_star, lambda);
    if x_train.is_empty() {
        return Ok(GpPredictive {
            mean: vec![0.0; x_star.len()],
            covariance: prior,
        });
    }
    let chol = factor(x_train, lambda, sigma2)?;
    let cross = kernel_matrix(x_train, x_star, lambda);
    let alpha = chol.solve(&DVector::from_column_slice(y_train));
    let mean = cross.tr_mul(&alpha);
    let v = chol
        .l()
        .solve_lower_triangular(&cross)
        .ok_or_else(|| Error::Factorization("triangular solve failed".into()))?;
    let mut covariance = prior - v.tr_mul(&v);
    covariance = (&covariance + covariance.transpose()) * 0.5;
    for i in 0..x_star.len() {
        let d = covariance[(i, i)];
        if d < VARIANCE_SLACK {
            return Err(Error::Factorization(format!(
                "negative predictive variance {d:e}"
            )));
        }
        covariance[(i, i)] = d.max(0.0);
    }
    Ok(GpPredictive {
        mean: mean.as_slice().to_vec(),
        covariance,
    })
}

fn log_marginal_from(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let alpha = chol.solve(y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    -0.5 * (y.dot(&alpha) + log_det + n * TAU.ln())
}

/// `log N(Y; 0, C(X, X) + (σ² + JITTER) I)`.
pub fn log_marginal_likelihood(x: &[f64], y: &[f64], lambda: f64, sigma2: f64) -> Result<f64> {
    check_hyper(lambda, sigma2)?;
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            y: y.len(),
            w: x.len(),
        });
    }
    let chol = factor(x, lambda, sigma2)?;
    Ok(log_marginal_from(&chol, &DVector::from_column_slice(y)))
}

/// Draw from `N(mean, cov)`. Cholesky is tried with jitter growing tenfold from
/// 1e-8; a clamped eigendecomposition is the last resort.
pub fn sample_mvn<R: Rng + ?Sized>(mean: &[f64], cov: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = mean.len();
    let z = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
    let mut jitter = 1e-8;
    while jitter <= 1e-2 {
        let mut c = cov.clone();
        for i in 0..n {
            c[(i, i)] += jitter;
        }
        if let Some(chol) = c.cholesky() {
            let draw = chol.l() * z;
            return mean.iter().zip(draw.iter()).map(|(m, d)| m + d).collect();
        }
        jitter *= 10.0;
    }
    let eig = SymmetricEigen::new(cov.clone());
    let scaled = DVector::from_fn(n, |i, _| eig.eigenvalues[i].max(0.0).sqrt() * z[i]);
    let draw = eig.eigenvectors * scaled;
    mean.iter().zip(draw.iter()).map(|(m, d)| m + d).collect()
}

/// Marginalized chain state: covariates, mixture, λ, σ², δ², and the cached
/// inverse `P = (C + σ² I + JITTER I)⁻¹` with `u = P Y`.
struct ExactState {
    x: Vec<f64>,
    dpmm: DpmmState,
    lambda: f64,
    sigma2: f64,
    delta2: f64,
    p: DMatrix<f64>,
    u: DVector<f64>,
    log_lik: f64,
}

impl ExactState {
    fn refresh(&mut self, y: &DVector<f64>) -> Result<()> {
        let chol = factor(&self.x, self.lambda, self.sigma2)?;
        self.log_lik = log_marginal_from(&chol, y);
        self.p = chol.inverse();
        self.u = &self.p * y;
        Ok(())
    }
}

struct ExactChain<'a> {
    data: &'a Dataset,
    y: DVector<f64>,
    config: &'a RunConfig,
    state: ExactState,
    acceptance: Acceptance,
}

impl<'a> ExactChain<'a> {
    fn new<R: Rng + ?Sized>(data: &'a Dataset, config: &'a RunConfig, rng: &mut R) -> Result<Self> {
        let y = DVector::from_column_slice(data.y());
        let var = |v: &[f64]| crate::math::sample_sd(v).powi(2).max(1e-6);
        let sigma2 = match config.noise.sigma2 {
            NoiseParam::Fixed(v) => v,
            NoiseParam::Sampled => 0.25 * var(data.y()),
        };
        let delta2 = match config.noise.delta2 {
            NoiseParam::Fixed(v) => v,
            NoiseParam::Sampled => 0.1 * var(data.w()),
        };
        let x = data.w().to_vec();
        let dpmm = DpmmState::from_prior(&x, &config.dpmm, rng);
        let n = data.n();
        let mut state = ExactState {
            x,
            dpmm,
            lambda: config.gp.initial_lambda(),
            sigma2,
            delta2,
            p: DMatrix::zeros(n, n),
            u: DVector::zeros(n),
            log_lik: 0.0,
        };
        state.refresh(&y)?;
        Ok(Self {
            data,
            y,
            config,
            state,
            acceptance: Acceptance::default(),
        })
    }

    /// MH update of each covariate against the conditional `y_i | y_{-i}`.
    fn step_latent_x<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.data.n();
        let lambda = self.state.lambda;
        let diag = 1.0 + self.state.sigma2 + JITTER;
        let mut k_new = DVector::zeros(n);
        for i in 0..n {
            let (mu, tau) = self.state.dpmm.atom_of(i);
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
            let x_old = self.state.x[i];

            let p_col = self.state.p.column(i).into_owned();
            let p_ii = p_col[i];
            let u_i = self.state.u[i];
            let cur_mean = target.y - u_i / p_ii;
            let cur_var = 1.0 / p_ii;

            for (j, k) in k_new.iter_mut().enumerate() {
                *k = if j == i {
                    0.0
                } else {
                    se_kernel_unchecked(x_new, self.state.x[j], lambda)
                };
            }
            // A⁻¹v = Pv - p (pᵀv) / p_ii for v with v_i = 0.
            let a_inv_y = &self.state.u - &p_col * (u_i / p_ii);
            let new_mean = k_new.dot(&a_inv_y);
            let pk = &self.state.p * &k_new;
            let mut g = &pk - &p_col * (p_col.dot(&k_new) / p_ii);
            let new_var = diag - k_new.dot(&g);

            let log_ratio = if new_var > 0.0 {
                ln_normal_pdf(target.y, new_mean, new_var) - ln_normal_pdf(target.y, cur_mean, cur_var)
                    + target.log_prior_measurement(x_new)
                    - target.log_prior_measurement(x_old)
                    + target.log_proposal(x_old)
                    - target.log_proposal(x_new)
            } else {
                f64::NEG_INFINITY
            };
            let ok = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
            self.acceptance.latent_x.record(ok);
            if ok {
                g[i] = -1.0;
                let gy = g.dot(&self.y);
                self.state.p.ger(-1.0 / p_ii, &p_col, &p_col, 1.0);
                self.state.p.ger(1.0 / new_var, &g, &g, 1.0);
                self.state.u = a_inv_y + &g * (gy / new_var);
                self.state.x[i] = x_new;
            }
        }
    }

    fn log_lik_at(&self, lambda: f64, sigma2: f64) -> Result<f64> {
        Ok(log_marginal_from(&factor(&self.state.x, lambda, sigma2)?, &self.y))
    }

    /// Random walk on log λ under the Ga(a0, b0) prior.
    fn step_lambda<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.config.gp.fixed_lambda.is_some() {
            return Ok(());
        }
        let shape = self.config.gp.lambda_prior_shape;
        let scale = self.config.gp.lambda_prior_scale;
        let log_prior = |l: f64| shape * l.ln() - l / scale;
        let sd = self.config.sampler.log_lambda_proposal_sd;
        let z: f64 = StandardNormal.sample(rng);
        let current = self.state.lambda;
        let proposal = current * (sd * z).exp();
        let ll_new = self.log_lik_at(proposal, self.state.sigma2)?;
        let log_ratio = ll_new - self.state.log_lik + log_prior(proposal) - log_prior(current);
        let ok = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
        self.acceptance.lambda.record(ok);
        if ok {
            self.state.lambda = proposal;
            self.state.log_lik = ll_new;
        }
        Ok(())
    }

    /// Random walk on log σ² under the prior `1/σ²` (flat in log σ²).
    fn step_sigma2<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if !self.config.noise.sigma2.is_sampled() {
            return Ok(());
        }
        let sd = self.config.sampler.log_lambda_proposal_sd;
        let z: f64 = StandardNormal.sample(rng);
        let proposal = self.state.sigma2 * (sd * z).exp();
        let ll_new = self.log_lik_at(self.state.lambda, proposal)?;
        let log_ratio = ll_new - self.state.log_lik;
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            self.state.sigma2 = proposal;
            self.state.log_lik = ll_new;
        }
        Ok(())
    }

    fn step_delta2<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if !self.config.noise.delta2.is_sampled() {
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

    fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.state.dpmm.gibbs_sweep(&self.state.x, &self.config.dpmm, rng);
        self.step_latent_x(rng);
        // Rebuilding from scratch also clears drift from the rank-one updates.
        self.state.refresh(&self.y)?;
        self.step_lambda(rng)?;
        self.step_sigma2(rng)?;
        self.step_delta2(rng);
        self.state.refresh(&self.y)
    }

    fn snapshot<R: Rng + ?Sized>(&self, iteration: usize, grid: &[f64], rng: &mut R) -> Result<Draw> {
        let pred = gp_predict(&self.state.x, self.data.y(), grid, self.state.lambda, self.state.sigma2)?;
        Ok(Draw {
            iteration,
            f: sample_mvn(&pred.mean, &pred.covariance, rng),
            basis: None,
            x: self.config.sampler.retain_latent.then(|| self.state.x.clone()),
            mixture: Some(self.state.dpmm.summary()),
            sigma2: self.state.sigma2,
            delta2: self.state.delta2,
            lambda: self.state.lambda,
            log_likelihood: self.state.log_lik,
            acceptance: self.acceptance,
        })
    }
}

/// Chain for the full-scale model with the regression function integrated out.
/// Function draws on the output grid come from the exact predictive law at
/// each retained state.
pub fn run_chain_gpev_f<R: Rng + ?Sized>(
    data: &Dataset,
    config: &RunConfig,
    rng: &mut R,
) -> Result<ChainSamples> {
    let settings = &config.sampler;
    let grid = config.grid.values();
    let mut chain = ExactChain::new(data, config, rng)?;
    let mut draws = Vec::with_capacity(settings.retained_draws());
    for it in 0..settings.iterations {
        chain.sweep(rng).map_err(|e| match e {
            Error::Factorization(msg) => Error::Factorization(format!("sweep {it}: {msg}")),
            other => other,
        })?;
        if !chain.state.log_lik.is_finite() {
            return Err(Error::NonFiniteLogLikelihood { sweep: it });
        }
        if it >= settings.burn_in && (it - settings.burn_in + 1) % settings.thin == 0 {
            draws.push(chain.snapshot(it, &grid, rng)?);
        }
    }
    Ok(ChainSamples {
        method: Method::GpevF,
        grid,
        draws,
        acceptance: chain.acceptance,
    })
}

/// Surrogate GP fitted with the covariates taken at face value (X := W).
pub fn run_gp_ignore_error<R: Rng + ?Sized>(
    data: &Dataset,
    config: &RunConfig,
    rng: &mut R,
) -> Result<ChainSamples> {
    run_chain(data, config, Variant::FixedX, rng)
}
