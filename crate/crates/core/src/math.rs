//! Small numeric helpers shared across modules.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log density of `N(mean, var)` at `x`.
#[inline]
pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

#[inline]
pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
}

/// Draw from the inverse-gamma law with density ∝ `v^{-shape-1} exp(-scale / v)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / scale).expect("positive inverse-gamma parameters");
    1.0 / g.sample(rng)
}

/// Index drawn with probability proportional to `exp(log_masses[k])`.
///
/// Masses are shifted by their maximum before exponentiation, so components
/// far in the tails never underflow the whole vector to zero.
pub fn sample_categorical_log<R: Rng + ?Sized>(log_masses: &[f64], rng: &mut R) -> usize {
    let max = log_masses
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    debug_assert!(max.is_finite(), "all categorical masses are zero");
    let mut total = 0.0;
    let probs: Vec<f64> = log_masses
        .iter()
        .map(|l| {
            let p = (l - max).exp();
            total += p;
            p
        })
        .collect();
    let mut u = rng.random::<f64>() * total;
    for (k, p) in probs.iter().enumerate() {
        if u < *p {
            return k;
        }
        u -= p;
    }
    // Rounding can leave u marginally above the last mass.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// One standard normal draw.
#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `len - 1`); zero for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RngSeed;

    #[test]
    fn normal_density_agrees_with_log_form() {
        for (x, m, v) in [(0.0, 0.0, 1.0), (1.3, -0.2, 0.3), (-4.0, 2.0, 9.0)] {
            assert!((normal_pdf(x, m, v).ln() - ln_normal_pdf(x, m, v)).abs() < 1e-12);
        }
        assert!((normal_pdf(0.0, 0.0, 1.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn categorical_survives_extreme_logs() {
        let mut rng = RngSeed(1).rng();
        let k = sample_categorical_log(&[-1e6, -1e6 + 50.0, f64::NEG_INFINITY], &mut rng);
        assert_eq!(k, 1);
    }

    #[test]
    fn categorical_shift_invariance() {
        let logs = [-3.0, 0.5, -0.2, -8.0];
        let shifted: Vec<f64> = logs.iter().map(|l| l + 700.0).collect();
        let mut r1 = RngSeed(9).rng();
        let mut r2 = RngSeed(9).rng();
        for _ in 0..2000 {
            assert_eq!(
                sample_categorical_log(&logs, &mut r1),
                sample_categorical_log(&shifted, &mut r2)
            );
        }
    }
}
