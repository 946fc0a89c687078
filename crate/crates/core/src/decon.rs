//! Deconvoluting-kernel estimators for Gaussian measurement error.
//!
//! ```text
//! K_n(u)  = (1/2π) ∫_{-1}^{1} cos(t u) φ_K(t) exp(δ² t² / (2h²)) dt
//! p̂(x)   = (nh)⁻¹ Σ_i K_n((x - W_i)/h)
//! f̂(x)   = (nh)⁻¹ Σ_i K_n((x - W_i)/h) Y_i / p̂(x)
//! ```
//!
//! The integrand is even, so the integral is taken over `[0, 1]` with the
//! composite trapezoid rule on the nonnegative half of an odd node count on
//! `[-1, 1]`. With the default `φ_K(t) = (1 - t²)³` the integrand and its
//! first two derivatives vanish at `t = 1`, which keeps the rule accurate to
//! about `Δt⁴`.

use std::f64::consts::PI;

use crate::config::KernelChoice;
use crate::error::{Error, Result};
use crate::types::Dataset;

/// Largest admissible `δ² / (2h²)`.
pub const MAX_EXPONENT: f64 = 400.0;

/// Denominator floor for the regression ratio, relative to `max p̂`.
pub const DENSITY_FLOOR: f64 = 0.05;

/// Base-kernel Fourier transform, bandwidth, error sd and quadrature size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeconKernelSpec {
    pub kernel: KernelChoice,
    pub h: f64,
    /// Measurement-error standard deviation δ.
    pub delta: f64,
    /// Quadrature nodes on `[-1, 1]`; odd.
    pub nodes: usize,
}

impl DeconKernelSpec {
    pub fn new(kernel: KernelChoice, h: f64, delta: f64, nodes: usize) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {h}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "measurement-error sd must be ≥ 0, got {delta}"
            )));
        }
        if nodes < 3 || nodes % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs an odd node count ≥ 3, got {nodes}"
            )));
        }
        Ok(Self {
            kernel,
            h,
            delta,
            nodes,
        })
    }

    pub fn with_bandwidth(&self, h: f64) -> Result<Self> {
        Self::new(self.kernel, h, self.delta, self.nodes)
    }

    /// `δ² / (2h²)`.
    pub fn exponent(&self) -> f64 {
        self.delta * self.delta / (2.0 * self.h * self.h)
    }
}

/// `φ_K(t)` for `|t| ≤ 1`.
pub fn phi_k(kernel: KernelChoice, t: f64) -> f64 {
    if t.abs() > 1.0 {
        return 0.0;
    }
    match kernel {
        KernelChoice::Smooth => (1.0 - t * t).powi(3),
        KernelChoice::Flat => 1.0,
    }
}

/// `K_n` tabulated as a cosine sum `Σ_k c_k cos(k Δ u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeconKernel {
    spec: DeconKernelSpec,
    step: f64,
    coeffs: Vec<f64>,
}

impl DeconKernel {
    pub fn new(spec: DeconKernelSpec) -> Result<Self> {
        let exponent = spec.exponent();
        if exponent > MAX_EXPONENT {
            return Err(Error::KernelOverflow {
                exponent,
                bandwidth: spec.h,
            });
        }
        let half = (spec.nodes - 1) / 2;
        let step = 1.0 / half as f64;
        let coeffs = (0..=half)
            .map(|k| {
                let t = k as f64 * step;
                let w = if k == 0 || k == half { 0.5 * step } else { step };
                w * phi_k(spec.kernel, t) * (exponent * t * t).exp() / PI
            })
            .collect();
        Ok(Self { spec, step, coeffs })
    }

    pub fn spec(&self) -> &DeconKernelSpec {
        &self.spec
    }

    /// `K_n(u)`, with `cos(kθ)` generated by the Chebyshev recurrence.
    pub fn eval(&self, u: f64) -> f64 {
        let theta = u * self.step;
        let c1 = theta.cos();
        let two_c1 = 2.0 * c1;
        let mut prev = 1.0;
        let mut cur = c1;
        let mut sum = self.coeffs[0];
        for c in &self.coeffs[1..] {
            sum += c * cur;
            let next = two_c1 * cur - prev;
            prev = cur;
            cur = next;
        }
        sum
    }
}

/// `K_n(u)` for one spec; build a [`DeconKernel`] for repeated evaluation.
pub fn decon_kernel(u: f64, spec: &DeconKernelSpec) -> Result<f64> {
    Ok(DeconKernel::new(*spec)?.eval(u))
}

/// Density and regression estimates on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DeconEstimate {
    pub grid: Vec<f64>,
    pub p_hat: Vec<f64>,
    /// Empty for density-only estimates.
    pub f_hat: Vec<f64>,
    /// Grid points whose denominator was raised to the floor.
    pub clipped: Vec<bool>,
    pub h: f64,
}

fn weighted_sums(kernel: &DeconKernel, w: &[f64], y: Option<&[f64]>, x: f64) -> (f64, f64) {
    let h = kernel.spec.h;
    let mut k_sum = 0.0;
    let mut ky_sum = 0.0;
    for (i, wi) in w.iter().enumerate() {
        let k = kernel.eval((x - wi) / h);
        k_sum += k;
        if let Some(y) = y {
            ky_sum += k * y[i];
        }
    }
    let scale = 1.0 / (w.len() as f64 * h);
    (k_sum * scale, ky_sum * scale)
}

/// `p̂` on `grid`.
pub fn decon_density(data: &Dataset, spec: &DeconKernelSpec, grid: &[f64]) -> Result<DeconEstimate> {
    let kernel = DeconKernel::new(*spec)?;
    let p_hat = grid
        .iter()
        .map(|x| weighted_sums(&kernel, data.w(), None, *x).0)
        .collect();
    Ok(DeconEstimate {
        grid: grid.to_vec(),
        p_hat,
        f_hat: Vec::new(),
        clipped: vec![false; grid.len()],
        h: spec.h,
    })
}

fn regression_with(kernel: &DeconKernel, w: &[f64], y: &[f64], grid: &[f64]) -> DeconEstimate {
    let (p_hat, num): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .map(|x| weighted_sums(kernel, w, Some(y), *x))
        .unzip();
    let p_max = p_hat.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = DENSITY_FLOOR * p_max;
    let mut clipped = Vec::with_capacity(grid.len());
    let f_hat = p_hat
        .iter()
        .zip(&num)
        .map(|(p, m)| {
            let low = !(*p >= floor) || *p <= 0.0;
            clipped.push(low);
            let denom = if low { floor.max(f64::MIN_POSITIVE) } else { *p };
            m / denom
        })
        .collect();
    DeconEstimate {
        grid: grid.to_vec(),
        p_hat,
        f_hat,
        clipped,
        h: kernel.spec.h,
    }
}

/// `f̂` (and `p̂`) on `grid`. Denominators below `0.05 · max p̂` are raised to
/// that floor and flagged.
pub fn decon_regression(
    data: &Dataset,
    spec: &DeconKernelSpec,
    grid: &[f64],
) -> Result<DeconEstimate> {
    let kernel = DeconKernel::new(*spec)?;
    Ok(regression_with(&kernel, data.w(), data.y(), grid))
}

/// Cross-validated prediction error per candidate; `None` where the overflow
/// guard fires. Fold `k` holds observations `i` with `i % folds == k`.
pub fn cross_validation_errors(
    data: &Dataset,
    template: &DeconKernelSpec,
    candidates: &[f64],
    folds: usize,
) -> Result<Vec<Option<f64>>> {
    if folds < 2 || folds > data.n() {
        return Err(Error::InvalidArgument(format!(
            "need 2 ≤ folds ≤ n, got {folds} folds for n = {}",
            data.n()
        )));
    }
    let splits: Vec<_> = (0..folds)
        .map(|k| {
            let (mut tw, mut ty, mut vw, mut vy) = (vec![], vec![], vec![], vec![]);
            for i in 0..data.n() {
                if i % folds == k {
                    vw.push(data.w()[i]);
                    vy.push(data.y()[i]);
                } else {
                    tw.push(data.w()[i]);
                    ty.push(data.y()[i]);
                }
            }
            (tw, ty, vw, vy)
        })
        .collect();
    candidates
        .iter()
        .map(|h| {
            let spec = template.with_bandwidth(*h)?;
            let kernel = match DeconKernel::new(spec) {
                Ok(k) => k,
                Err(Error::KernelOverflow { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut sse = 0.0;
            for (tw, ty, vw, vy) in &splits {
                let est = regression_with(&kernel, tw, ty, vw);
                sse += est
                    .f_hat
                    .iter()
                    .zip(vy)
                    .map(|(f, y)| (f - y).powi(2))
                    .sum::<f64>();
            }
            let err = sse / data.n() as f64;
            Ok(err.is_finite().then_some(err))
        })
        .collect()
}

/// Relative gap below which two cross-validation errors count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Candidate with the smallest cross-validated error; ties go to the larger
/// bandwidth.
pub fn select_bandwidth(
    data: &Dataset,
    template: &DeconKernelSpec,
    candidates: &[f64],
    folds: usize,
) -> Result<f64> {
    if candidates.len() < 2 {
        return Err(Error::InvalidArgument(
            "bandwidth selection needs at least two candidates".into(),
        ));
    }
    let errors = cross_validation_errors(data, template, candidates, folds)?;
    let mut best: Option<(f64, f64)> = None;
    for (h, err) in candidates.iter().zip(errors) {
        let Some(err) = err else { continue };
        best = match best {
            None => Some((*h, err)),
            Some((bh, be)) => {
                let tie = (err - be).abs() <= TIE_TOLERANCE * be.max(TIE_TOLERANCE);
                if (tie && *h > bh) || (!tie && err < be) {
                    Some((*h, err))
                } else {
                    Some((bh, be))
                }
            }
        };
    }
    best.map(|(h, _)| h).ok_or(Error::NoUsableBandwidth)
}
