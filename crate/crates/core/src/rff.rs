//! Random-Fourier-feature surrogate of the squared-exponential Gaussian process
//!
//! ```text
//! f(x) = sqrt(2/N) Σ_j a_j cos(w_j x + s_j),
//! a_j ~ N(0, 1),  w_j ~ N(0, 2/λ),  s_j ~ Unif(0, 2π)
//! ```
//!
//! has mean zero and covariance `exp(-(x - y)² / λ)` for every `N`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};

use crate::error::{Error, Result};

/// Squared-exponential covariance `exp(-(x - x2)² / λ)`.
pub fn se_kernel(x: f64, x2: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "kernel bandwidth must be > 0, got {lambda}"
        )));
    }
    Ok(se_kernel_unchecked(x, x2, lambda))
}

#[inline]
pub(crate) fn se_kernel_unchecked(x: f64, x2: f64, lambda: f64) -> f64 {
    let d = x - x2;
    (-d * d / lambda).exp()
}

/// Amplitudes, frequencies and phases of one surrogate draw.
#[derive(Clone, Debug, PartialEq)]
pub struct RffBasis {
    amplitudes: Vec<f64>,
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    lambda: f64,
}

impl RffBasis {
    pub fn new(
        amplitudes: Vec<f64>,
        frequencies: Vec<f64>,
        phases: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let n = amplitudes.len();
        if n == 0 || frequencies.len() != n || phases.len() != n {
            return Err(Error::InvalidArgument(format!(
                "basis vectors must share a nonzero length, got {}, {}, {}",
                n,
                frequencies.len(),
                phases.len()
            )));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
        }
        if let Some(s) = phases.iter().find(|s| !(0.0..TAU).contains(*s)) {
            return Err(Error::InvalidArgument(format!("phase {s} outside [0, 2π)")));
        }
        Ok(Self {
            amplitudes,
            frequencies,
            phases,
            lambda,
        })
    }

    pub fn n_basis(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `sqrt(2/N)`.
    pub fn scale(&self) -> f64 {
        (2.0 / self.n_basis() as f64).sqrt()
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [f64] {
        &mut self.amplitudes
    }

    pub(crate) fn set_frequency(&mut self, j: usize, w: f64) {
        self.frequencies[j] = w;
    }

    pub(crate) fn set_phase(&mut self, j: usize, s: f64) {
        self.phases[j] = s;
    }

    pub(crate) fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    /// Surrogate value at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let sum: f64 = self
            .amplitudes
            .iter()
            .zip(&self.frequencies)
            .zip(&self.phases)
            .map(|((a, w), s)| a * (w * x + s).cos())
            .sum();
        self.scale() * sum
    }

    /// Feature row `sqrt(2/N) cos(w_j x + s_j)` written into `out`.
    pub fn features_into(&self, x: f64, out: &mut [f64]) {
        let scale = self.scale();
        for ((o, w), s) in out.iter_mut().zip(&self.frequencies).zip(&self.phases) {
            *o = scale * (w * x + s).cos();
        }
    }

    /// `n × N` design matrix with `Φ[i, j] = sqrt(2/N) cos(w_j x_i + s_j)`.
    pub fn design_matrix(&self, xs: &[f64]) -> DMatrix<f64> {
        let scale = self.scale();
        DMatrix::from_fn(xs.len(), self.n_basis(), |i, j| {
            scale * (self.frequencies[j] * xs[i] + self.phases[j]).cos()
        })
    }
}

/// Free-function form of [`RffBasis::eval`].
pub fn eval_surrogate(basis: &RffBasis, x: f64) -> f64 {
    basis.eval(x)
}

/// Free-function form of [`RffBasis::design_matrix`].
pub fn design_matrix(basis: &RffBasis, xs: &[f64]) -> DMatrix<f64> {
    basis.design_matrix(xs)
}

/// Draws a basis from the prior at bandwidth `lambda`.
pub fn sample_basis<R: Rng + ?Sized>(n_basis: usize, lambda: f64, rng: &mut R) -> Result<RffBasis> {
    if n_basis == 0 {
        return Err(Error::InvalidArgument("n_basis must be ≥ 1".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be > 0, got {lambda}")));
    }
    let freq = Normal::new(0.0, (2.0 / lambda).sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let phase = Uniform::new(0.0, TAU).expect("valid range");
    let mut amplitudes = Vec::with_capacity(n_basis);
    let mut frequencies = Vec::with_capacity(n_basis);
    let mut phases = Vec::with_capacity(n_basis);
    for _ in 0..n_basis {
        amplitudes.push(StandardNormal.sample(rng));
        frequencies.push(freq.sample(rng));
        phases.push(phase.sample(rng));
    }
    RffBasis::new(amplitudes, frequencies, phases, lambda)
}
