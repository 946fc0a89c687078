//! Self-check suites run by `gpev check`.
//!
//! Each suite compares library output with a closed form, a brute-force
//! computation or a distributional test at a fixed seed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::gamma_ur;

use crate::config::{validate_config, KernelChoice, RawConfig};
use crate::decon::{decon_density, decon_regression, DeconKernel, DeconKernelSpec};
use crate::diagnostics::ks_test;
use crate::dpmm::{stick_to_weights, update_atoms, update_sticks};
use crate::error::{Error, Result};
use crate::math::{mean, sample_sd};
use crate::rff::{sample_basis, se_kernel, RffBasis};
use crate::sampler::{lambda_conditional, sample_lambda, ChainState, LatentTarget, Sampler, Variant};
use crate::types::{Dataset, DpmmHyper, RngSeed};

/// Named group of checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    RffMoments,
    Kernel,
    Conjugacy,
    Invariance,
    Dpmm,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::RffMoments,
        Suite::Kernel,
        Suite::Conjugacy,
        Suite::Invariance,
        Suite::Dpmm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::RffMoments => "rff-moments",
            Suite::Kernel => "kernel",
            Suite::Conjugacy => "conjugacy",
            Suite::Invariance => "invariance",
            Suite::Dpmm => "dpmm",
        }
    }

    pub fn run(self, seed: RngSeed) -> Vec<CheckOutcome> {
        match self {
            Suite::RffMoments => rff_moments(seed),
            Suite::Kernel => kernel(),
            Suite::Conjugacy => conjugacy(seed),
            Suite::Invariance => invariance(seed),
            Suite::Dpmm => dpmm(seed),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| {
                Error::config(
                    "suite",
                    format!(
                        "unknown suite `{s}`; expected one of rff-moments, kernel, conjugacy, invariance, dpmm"
                    ),
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}::{} {}", self.suite, self.name, self.detail)
    }
}

fn outcome(suite: Suite, name: impl Into<String>, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        suite,
        name: name.into(),
        passed,
        detail,
    }
}

/// Mean and Monte Carlo standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    (mean(xs), sample_sd(xs) / (xs.len() as f64).sqrt())
}

fn rff_moments(seed: RngSeed) -> Vec<CheckOutcome> {
    const M: usize = 100_000;
    let points = [0.0, 0.5, 1.0];
    let mut out = Vec::new();
    for n_basis in [1usize, 5, 50] {
        for lambda in [0.5f64, 2.0] {
            let mut rng = seed.derive(&[n_basis as u64, lambda.to_bits()]).rng();
            let mut at = [Vec::with_capacity(M), Vec::with_capacity(M), Vec::with_capacity(M)];
            for _ in 0..M {
                let b = sample_basis(n_basis, lambda, &mut rng).expect("valid basis");
                at[0].push(b.eval(0.0));
                at[1].push(b.eval(0.5));
                at[2].push(b.eval(1.0));
            }
            let (m0, se0) = mean_se(&at[0]);
            let ok_mean = m0.abs() <= 4.0 * se0;
            let mut worst = 0.0f64;
            let mut ok_cov = true;
            for (k, y) in points.iter().enumerate() {
                let (fx, fy) = (&at[0], &at[k]);
                let (mx, my) = (mean(fx), mean(fy));
                let prods: Vec<f64> = fx.iter().zip(fy).map(|(a, b)| (a - mx) * (b - my)).collect();
                let (c, se) = mean_se(&prods);
                let target = se_kernel(points[0], *y, lambda).expect("positive lambda");
                let z = (c - target).abs() / se;
                worst = worst.max(z);
                ok_cov &= z <= 4.0;
            }
            out.push(outcome(
                Suite::RffMoments,
                format!("N={n_basis},lambda={lambda}"),
                ok_mean && ok_cov,
                format!("|mean|/se={:.2}, max |cov-k|/se={worst:.2}", m0.abs() / se0),
            ));
        }
    }
    out
}

/// `K(u)` for `δ = 0` by composite Simpson with 20 001 nodes on `[0, 1]`.
fn reference_kernel(u: f64) -> f64 {
    let m = 20_000;
    let h = 1.0 / m as f64;
    let g = |t: f64| (t * u).cos() * (1.0 - t * t).powi(3);
    let mut s = g(0.0) + g(1.0);
    for k in 1..m {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    s * h / 3.0 / PI
}

fn kernel() -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let spec = |h: f64, delta: f64, nodes: usize| {
        DeconKernelSpec::new(KernelChoice::Smooth, h, delta, nodes).expect("valid spec")
    };
    let k0 = DeconKernel::new(spec(1.0, 0.0, 513)).expect("no overflow");
    let peak = k0.eval(0.0);
    out.push(outcome(
        Suite::Kernel,
        "peak",
        (peak - 32.0 / 35.0 / (2.0 * PI)).abs() < 1e-9,
        format!("K(0)={peak:.12}"),
    ));

    let mut sym = 0.0f64;
    let kd = DeconKernel::new(spec(0.5, 0.4, 513)).expect("no overflow");
    for i in 0..200 {
        let u = 0.137 * i as f64;
        sym = sym.max((kd.eval(u) - kd.eval(-u)).abs());
    }
    out.push(outcome(Suite::Kernel, "symmetry", sym < 1e-12, format!("max asymmetry {sym:.2e}")));

    for ratio in [0.0, 0.5, 1.0] {
        let k = DeconKernel::new(spec(1.0, ratio, 513)).expect("no overflow");
        let k2 = DeconKernel::new(spec(1.0, ratio, 1025)).expect("no overflow");
        let (lo, hi, m) = (-200.0, 200.0, 80_000usize);
        let step = (hi - lo) / m as f64;
        let mut integral = k.eval(lo) + k.eval(hi);
        for i in 1..m {
            integral += if i % 2 == 1 { 4.0 } else { 2.0 } * k.eval(lo + i as f64 * step);
        }
        integral *= step / 3.0;
        let mut drift = 0.0f64;
        for i in 0..=400 {
            let u = -20.0 + 0.1 * i as f64;
            drift = drift.max((k.eval(u) - k2.eval(u)).abs());
        }
        out.push(outcome(
            Suite::Kernel,
            format!("integral,delta/h={ratio}"),
            (integral - 1.0).abs() < 1e-3,
            format!("∫K_n={integral:.6}"),
        ));
        out.push(outcome(
            Suite::Kernel,
            format!("doubling,delta/h={ratio}"),
            drift < 1e-8,
            format!("max change {drift:.2e}"),
        ));
    }

    let w: Vec<f64> = (0..50).map(|i| -2.0 + 4.0 * ((i * 37) % 50) as f64 / 49.0).collect();
    let y: Vec<f64> = w.iter().map(|v| (1.3 * v).sin() + 0.1 * v * v).collect();
    let data = Dataset::new(y.clone(), w.clone()).expect("valid data");
    let grid: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
    let h = 0.4;
    let est = decon_density(&data, &spec(h, 0.0, 513), &grid).expect("no overflow");
    let reg = decon_regression(&data, &spec(h, 0.0, 513), &grid).expect("no overflow");
    let (mut diff, mut nw_diff) = (0.0f64, 0.0f64);
    for (k, x) in grid.iter().enumerate() {
        let weights: Vec<f64> = w.iter().map(|wi| reference_kernel((x - wi) / h)).collect();
        let kde = weights.iter().sum::<f64>() / (50.0 * h);
        let nw = weights.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / weights.iter().sum::<f64>();
        diff = diff.max((kde - est.p_hat[k]).abs());
        nw_diff = nw_diff.max((nw - reg.f_hat[k]).abs());
    }
    let clipped = reg.clipped.iter().filter(|c| **c).count();
    out.push(outcome(Suite::Kernel, "kde-reduction", diff < 1e-8, format!("max diff {diff:.2e}")));
    out.push(outcome(
        Suite::Kernel,
        "nadaraya-watson-reduction",
        nw_diff < 1e-8 && clipped == 0,
        format!("max diff {nw_diff:.2e}, {clipped} clipped"),
    ));
    out
}

fn inverse_gamma_cdf(shape: f64, scale: f64) -> impl Fn(f64) -> f64 {
    move |v: f64| if v <= 0.0 { 0.0 } else { gamma_ur(shape, scale / v) }
}

fn conjugacy(seed: RngSeed) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let cfg = validate_config(
        &RawConfig::from_json(r#"{"sigma2": "sample", "delta2": "sample"}"#).expect("static json"),
    )
    .expect("valid config");

    // Amplitudes, n = 3, N = 2.
    let basis = RffBasis::new(vec![0.0, 0.0], vec![0.7, -1.3], vec![0.4, 2.9], 1.0).expect("valid");
    let x = vec![-0.8, 0.1, 1.2];
    let data = Dataset::new(vec![0.5, -0.3, 0.9], vec![-0.7, 0.0, 1.1]).expect("valid");
    let sigma2 = 0.3;
    let dpmm = crate::dpmm::DpmmState::new(vec![1.0], vec![0.0], vec![1.0], vec![0; 3]).expect("valid");
    let state = ChainState {
        basis: basis.clone(),
        dpmm: Some(dpmm),
        x: x.clone(),
        sigma2,
        delta2: 0.2,
    };
    let mut s = Sampler::from_state(&data, &cfg, Variant::Mixture, state).expect("valid state");
    let phi = DMatrix::from_fn(3, 2, |i, j| {
        (basis.frequencies()[j] * x[i] + basis.phases()[j]).cos()
    });
    let prec = phi.transpose() * &phi / sigma2 + DMatrix::identity(2, 2);
    let cov = prec.clone().try_inverse().expect("invertible");
    let post_mean = &cov * phi.transpose() * DVector::from_column_slice(data.y()) / sigma2;
    let mut rng = seed.derive(&[1]).rng();
    let m = 100_000;
    let mut draws = vec![Vec::with_capacity(m), Vec::with_capacity(m)];
    for _ in 0..m {
        s.step_amplitudes(&mut rng).expect("SPD");
        let a = s.state().basis.amplitudes();
        draws[0].push(a[0]);
        draws[1].push(a[1]);
    }
    let mut worst = 0.0f64;
    for j in 0..2 {
        let (mj, se) = mean_se(&draws[j]);
        worst = worst.max((mj - post_mean[j]).abs() / se);
        for k in j..2 {
            let mk = mean(&draws[k]);
            let prods: Vec<f64> = draws[j]
                .iter()
                .zip(&draws[k])
                .map(|(a, b)| (a - mj) * (b - mk))
                .collect();
            let (c, se) = mean_se(&prods);
            worst = worst.max((c - cov[(j, k)]).abs() / se);
        }
    }
    out.push(outcome(
        Suite::Conjugacy,
        "amplitudes",
        worst <= 4.0,
        format!("max |moment error|/se={worst:.2}"),
    ));

    // λ with N = 1 against a grid posterior.
    let w = [0.8];
    let (shape, scale) = lambda_conditional(&w, 5.0, 1.0, false);
    let lgrid_max = 30.0;
    let g = 30_000;
    let dens = |l: f64| {
        if l <= 0.0 {
            0.0
        } else {
            ((5.0 - 1.0) * l.ln() - l + 0.5 * l.ln() - l * w[0] * w[0] / 4.0).exp()
        }
    };
    let dl = lgrid_max / g as f64;
    let mass: Vec<f64> = (0..g).map(|i| dens((i as f64 + 0.5) * dl) * dl).collect();
    let total: f64 = mass.iter().sum();
    let mut cdf = Vec::with_capacity(g);
    let mut acc = 0.0;
    for p in &mass {
        acc += p / total;
        cdf.push(acc);
    }
    let bins = 20;
    let edges: Vec<f64> = (1..bins)
        .map(|b| {
            let q = b as f64 / bins as f64;
            let i = cdf.partition_point(|c| *c < q);
            (i as f64 + 1.0) * dl
        })
        .collect();
    let expected: Vec<f64> = {
        let mut e = vec![0.0; bins];
        for (i, p) in mass.iter().enumerate() {
            let l = (i as f64 + 0.5) * dl;
            e[edges.partition_point(|x| *x <= l)] += p / total;
        }
        e
    };
    let mut rng = seed.derive(&[2]).rng();
    let mut counts = vec![0usize; bins];
    for _ in 0..m {
        let l = sample_lambda(&w, 5.0, 1.0, false, &mut rng);
        counts[edges.partition_point(|x| *x <= l)] += 1;
    }
    let tv: f64 = 0.5
        * counts
            .iter()
            .zip(&expected)
            .map(|(c, e)| (*c as f64 / m as f64 - e).abs())
            .sum::<f64>();
    out.push(outcome(
        Suite::Conjugacy,
        "lambda",
        tv < 0.01,
        format!("TV={tv:.4} (shape {shape}, scale {scale:.4})"),
    ));

    // σ² and δ² with n = 5.
    let data5 = Dataset::new(vec![0.3, -1.1, 0.8, 2.0, -0.4], vec![0.1, 0.9, -1.5, 0.4, 1.3]).expect("valid");
    let x5 = vec![0.5, 0.2, -1.0, 0.0, 1.0];
    let basis5 = RffBasis::new(vec![0.6, -0.2], vec![0.9, 0.3], vec![1.0, 5.0], 1.0).expect("valid");
    let dpmm5 = crate::dpmm::DpmmState::new(vec![1.0], vec![0.0], vec![1.0], vec![0; 5]).expect("valid");
    let state5 = ChainState {
        basis: basis5.clone(),
        dpmm: Some(dpmm5),
        x: x5.clone(),
        sigma2: 1.0,
        delta2: 1.0,
    };
    let mut s5 = Sampler::from_state(&data5, &cfg, Variant::Mixture, state5).expect("valid state");
    let rss: f64 = data5
        .y()
        .iter()
        .zip(&x5)
        .map(|(y, x)| (y - basis5.eval(*x)).powi(2))
        .sum();
    let ssw: f64 = data5.w().iter().zip(&x5).map(|(w, x)| (w - x).powi(2)).sum();
    let mut rng = seed.derive(&[3]).rng();
    let k = 10_000;
    let mut sig = Vec::with_capacity(k);
    let mut del = Vec::with_capacity(k);
    for _ in 0..k {
        s5.step_sigma2(&mut rng);
        s5.step_delta2(&mut rng);
        sig.push(s5.state().sigma2);
        del.push(s5.state().delta2);
    }
    let (d1, p1) = ks_test(&sig, inverse_gamma_cdf(2.5, rss / 2.0));
    let (d2, p2) = ks_test(&del, inverse_gamma_cdf(2.5, ssw / 2.0));
    out.push(outcome(Suite::Conjugacy, "sigma2", p1 > 0.01, format!("KS D={d1:.4}, p={p1:.3}")));
    out.push(outcome(Suite::Conjugacy, "delta2", p2 > 0.01, format!("KS D={d2:.4}, p={p2:.3}")));
    out
}

fn invariance(seed: RngSeed) -> Vec<CheckOutcome> {
    let target = LatentTarget {
        y: 0.4,
        w: 0.3,
        sigma2: 0.05,
        delta2: 0.2,
        mu: -0.1,
        tau: 1.5,
    };
    let mut rng = seed.rng();
    let basis = sample_basis(6, 1.0, &mut rng).expect("valid basis");
    let states = [-0.6, -0.1, 0.3, 0.7, 1.2];
    let tv = discrete_invariance_tv(&target, &states, |x| basis.eval(x));
    vec![outcome(
        Suite::Invariance,
        "latent-x-5-state",
        tv < 1e-10,
        format!("TV(πP, π)={tv:.2e}"),
    )]
}

/// Total variation between `π` and `πP` for the latent-covariate kernel
/// restricted to a finite state set: the proposal is the Gaussian proposal
/// renormalized over the states, acceptance the library's MH ratio.
pub fn discrete_invariance_tv(target: &LatentTarget, states: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let k = states.len();
    let fx: Vec<f64> = states.iter().map(|x| f(*x)).collect();
    let log_pi: Vec<f64> = (0..k).map(|i| target.log_target(states[i], fx[i])).collect();
    let max = log_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_pi.iter().map(|l| (l - max).exp()).sum();
    let pi: Vec<f64> = log_pi.iter().map(|l| (l - max).exp() / z).collect();
    let q_raw: Vec<f64> = states.iter().map(|x| target.log_proposal(*x).exp()).collect();
    let qz: f64 = q_raw.iter().sum();
    let q: Vec<f64> = q_raw.iter().map(|v| v / qz).collect();
    let mut p = vec![vec![0.0; k]; k];
    for i in 0..k {
        let mut stay = 1.0;
        for j in 0..k {
            if i != j {
                let a = target.log_acceptance((states[i], fx[i]), (states[j], fx[j])).exp();
                p[i][j] = q[j] * a;
                stay -= p[i][j];
            }
        }
        p[i][i] = stay;
    }
    (0..k)
        .map(|j| {
            let pj: f64 = (0..k).map(|i| pi[i] * p[i][j]).sum();
            (pj - pi[j]).abs()
        })
        .sum::<f64>()
        * 0.5
}

fn dpmm(seed: RngSeed) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut rng = seed.rng();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let h = 1 + (rng.random_range(0..25usize));
        let mut sticks: Vec<f64> = (0..h).map(|_| rng.random::<f64>().max(1e-12)).collect();
        sticks[h - 1] = 1.0;
        let w = stick_to_weights(&sticks).expect("valid sticks");
        worst = worst.max((w.iter().sum::<f64>() - 1.0).abs());
    }
    out.push(outcome(Suite::Dpmm, "simplex", worst < 1e-12, format!("max |Σπ-1|={worst:.2e}")));

    // Without data the atom and stick updates are prior draws; μ is then
    // Student-t with 2 a_tau dof and scale sqrt(kappa0 b_tau / a_tau).
    let hyper = DpmmHyper::default();
    let mut mus = Vec::with_capacity(10_000);
    let mut stick_draws = Vec::with_capacity(10_000);
    let mut rng = seed.derive(&[1]).rng();
    while mus.len() < 10_000 {
        let (m, _) = update_atoms(&[], &[], &hyper, &mut rng);
        let s = update_sticks(&[], hyper.alpha, hyper.truncation, &mut rng);
        mus.push(m[0]);
        stick_draws.push(s[0]);
    }
    let scale = (hyper.kappa0 * hyper.b_tau / hyper.a_tau).sqrt();
    let t = StudentsT::new(hyper.mu0, scale, 2.0 * hyper.a_tau).expect("valid t");
    let (d, p) = ks_test(&mus, |x| t.cdf(x));
    out.push(outcome(Suite::Dpmm, "prior-atoms", p > 0.01, format!("KS D={d:.4}, p={p:.3}")));
    let alpha = hyper.alpha;
    let (d, p) = ks_test(&stick_draws, |v| 1.0 - (1.0 - v.clamp(0.0, 1.0)).powf(alpha));
    out.push(outcome(Suite::Dpmm, "prior-sticks", p > 0.01, format!("KS D={d:.4}, p={p:.3}")));
    out
}
