//! Posterior summaries of function draws on a grid.
//!
//! Quantiles follow the nearest-rank convention: the `q` quantile of `m`
//! sorted values is element `ceil(q m) - 1`. The simultaneous band is the
//! sup-norm ball `{f : max_grid |f - f̂| ≤ r}` with `r` the `level` quantile of
//! the per-draw sup distances, so exactly `ceil(level · m)` draws (plus ties)
//! lie inside it.

use crate::error::{Error, Result};
use crate::sampler::ChainSamples;

/// Minimum number of draws for interval and band summaries.
pub const MIN_DRAWS: usize = 40;

/// Nearest-rank quantile of an ascending slice.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let m = sorted.len();
    let rank = (q * m as f64).ceil() as usize;
    sorted[rank.clamp(1, m) - 1]
}

fn check_shape(draws: &[Vec<f64>], needed: usize) -> Result<usize> {
    if draws.len() < needed.max(1) {
        return Err(Error::TooFewDraws {
            needed: needed.max(1),
            found: draws.len(),
        });
    }
    let k = draws[0].len();
    if draws.iter().any(|d| d.len() != k) {
        return Err(Error::GridMismatch);
    }
    Ok(k)
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Coordinatewise mean of the draws.
pub fn mean_curve(draws: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = check_shape(draws, 1)?;
    let mut acc = vec![0.0; k];
    for d in draws {
        for (a, v) in acc.iter_mut().zip(d) {
            *a += v;
        }
    }
    let m = draws.len() as f64;
    Ok(acc.into_iter().map(|a| a / m).collect())
}

/// Pointwise `(1 - level)/2` and `(1 + level)/2` quantiles.
pub fn pointwise_bounds(draws: &[Vec<f64>], level: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_level(level)?;
    let k = check_shape(draws, MIN_DRAWS)?;
    let mut lower = Vec::with_capacity(k);
    let mut upper = Vec::with_capacity(k);
    let mut column = vec![0.0; draws.len()];
    for j in 0..k {
        for (c, d) in column.iter_mut().zip(draws) {
            *c = d[j];
        }
        column.sort_by(f64::total_cmp);
        lower.push(nearest_rank(&column, 0.5 * (1.0 - level)));
        upper.push(nearest_rank(&column, 0.5 * (1.0 + level)));
    }
    Ok((lower, upper))
}

/// `max_grid |f_j - center|` for each draw.
pub fn sup_distances(draws: &[Vec<f64>], center: &[f64]) -> Vec<f64> {
    draws
        .iter()
        .map(|d| {
            d.iter()
                .zip(center)
                .map(|(v, c)| (v - c).abs())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Radius `r` of the simultaneous band around `center`.
pub fn band_radius(draws: &[Vec<f64>], center: &[f64], level: f64) -> Result<f64> {
    check_level(level)?;
    let k = check_shape(draws, MIN_DRAWS)?;
    if center.len() != k {
        return Err(Error::GridMismatch);
    }
    let mut d = sup_distances(draws, center);
    d.sort_by(f64::total_cmp);
    Ok(nearest_rank(&d, level))
}

/// Fraction of draws inside the band of radius `r` around `center`.
pub fn fraction_in_band(draws: &[Vec<f64>], center: &[f64], r: f64) -> f64 {
    let inside = sup_distances(draws, center)
        .iter()
        .filter(|d| **d <= r)
        .count();
    inside as f64 / draws.len() as f64
}

/// Posterior mean of `f` on `grid`.
pub fn posterior_mean(samples: &ChainSamples, grid: &[f64]) -> Result<Vec<f64>> {
    mean_curve(&samples.function_draws(grid)?)
}

/// Pointwise credible interval of `f` on `grid`.
pub fn pointwise_interval(
    samples: &ChainSamples,
    grid: &[f64],
    level: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    pointwise_bounds(&samples.function_draws(grid)?, level)
}

/// Simultaneous band radius around the posterior mean of `f` on `grid`.
pub fn simultaneous_band(samples: &ChainSamples, grid: &[f64], level: f64) -> Result<f64> {
    let draws = samples.function_draws(grid)?;
    let center = mean_curve(&draws)?;
    band_radius(&draws, &center, level)
}

/// Average squared error `K⁻¹ Σ_k (f̂(t_k) - f(t_k))²`.
pub fn amse(f_hat: &[f64], truth: impl Fn(f64) -> f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() || f_hat.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let sse: f64 = f_hat
        .iter()
        .zip(grid)
        .map(|(f, t)| (f - truth(*t)).powi(2))
        .sum();
    Ok(sse / grid.len() as f64)
}

/// Posterior mean of the covariate mixture density on `grid`.
pub fn covariate_density_summary(samples: &ChainSamples, grid: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::TooFewDraws {
            needed: 1,
            found: 0,
        });
    }
    let mut acc = vec![0.0; grid.len()];
    for d in &samples.draws {
        let mix = d.mixture.as_ref().ok_or(Error::NoDensity)?;
        for (a, t) in acc.iter_mut().zip(grid) {
            *a += mix.density(*t);
        }
    }
    let m = samples.len() as f64;
    Ok(acc.into_iter().map(|a| a / m).collect())
}

/// Mean curve with pointwise and simultaneous credible sets.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionSummary {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub band_radius: f64,
    pub level: f64,
}

impl FunctionSummary {
    pub fn from_draws(grid: &[f64], draws: &[Vec<f64>], level: f64) -> Result<Self> {
        let k = check_shape(draws, MIN_DRAWS)?;
        if k != grid.len() {
            return Err(Error::GridMismatch);
        }
        let mean = mean_curve(draws)?;
        let (lower, upper) = pointwise_bounds(draws, level)?;
        let band_radius = band_radius(draws, &mean, level)?;
        Ok(Self {
            grid: grid.to_vec(),
            mean,
            lower,
            upper,
            band_radius,
            level,
        })
    }

    pub fn from_samples(samples: &ChainSamples, grid: &[f64], level: f64) -> Result<Self> {
        Self::from_draws(grid, &samples.function_draws(grid)?, level)
    }

    pub fn band_lower(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m - self.band_radius).collect()
    }

    pub fn band_upper(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m + self.band_radius).collect()
    }
}
