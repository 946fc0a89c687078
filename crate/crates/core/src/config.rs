//! Experiment configuration.
//!
//! One flat JSON document drives one experiment. Every key is optional;
//! [`validate_config`] fills defaults and checks ranges.
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `n_basis` | `round(n/4.5)` in `[10, n]` | number of random Fourier features N |
//! | `lambda_prior_shape`, `lambda_prior_scale` | 5, 1 | gamma prior (shape, scale) on λ |
//! | `fixed_lambda` | none | hold λ fixed instead of sampling it |
//! | `lambda_shape_literal` | false | use shape `a0` instead of `a0 + N/2` in the λ update |
//! | `truncation` | 20 | mixture truncation H |
//! | `alpha` | 1 | Dirichlet-process precision |
//! | `mu0`, `kappa0`, `a_tau`, `b_tau` | 0, 1, 1, 1 | normal–gamma base measure |
//! | `sigma2`, `delta2` | `"sample"` | number (fixed) or `"sample"` (objective prior) |
//! | `iterations`, `burn_in`, `thin` | 5000, 2500, 5 | chain schedule |
//! | `freq_proposal_sd` | 0.5 | random-walk sd for the frequencies |
//! | `log_lambda_proposal_sd` | 0.3 | random-walk sd on log λ (exact-GP chain) |
//! | `grid_lo`, `grid_hi`, `grid_points` | -3, 3, 100 | output grid |
//! | `estimators` | all five | subset of `gpev_a, gpev_n, gpev_f, gp, decon` |
//! | `seed` | 1 | root seed |
//! | `decon_kernel` | `"smooth"` | `"smooth"` = (1-t²)³, `"flat"` = indicator on [-1, 1] |
//! | `decon_nodes` | 513 | quadrature nodes on [-1, 1] (odd) |
//! | `decon_bandwidths` | 24 log-spaced values in [0.05, 2] | bandwidth candidates |
//! | `decon_folds` | 5 | cross-validation folds |
//! | `retain_latent` | true | keep latent covariates in every retained draw |

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DpmmHyper, GpHyper, NoiseConfig, NoiseParam};

/// Estimators compared by the simulation harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GpevA,
    GpevF,
    GpevN,
    Gp,
    Decon,
}

impl Method {
    /// Display order used in tables and figures.
    pub const ALL: [Method; 5] = [
        Method::GpevA,
        Method::GpevF,
        Method::GpevN,
        Method::Gp,
        Method::Decon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GpevA => "gpev_a",
            Method::GpevF => "gpev_f",
            Method::GpevN => "gpev_n",
            Method::Gp => "gp",
            Method::Decon => "decon",
        }
    }

    pub fn index(self) -> u64 {
        Method::ALL.iter().position(|m| *m == self).unwrap() as u64
    }

    pub fn is_bayesian(self) -> bool {
        !matches!(self, Method::Decon)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gpev_a" => Ok(Method::GpevA),
            "gpev_f" => Ok(Method::GpevF),
            "gpev_n" => Ok(Method::GpevN),
            "gp" => Ok(Method::Gp),
            "decon" => Ok(Method::Decon),
            other => Err(Error::UnknownEstimator(other.to_string())),
        }
    }
}

/// Parses a comma-separated list of estimator names, keeping display order.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Method::from_str)
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(Error::InvalidArgument("empty method list".into()));
    }
    Ok(out)
}

/// Fourier transform of the base kernel used by the deconvolution estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    /// `(1 - t²)³` on `[-1, 1]`.
    Smooth,
    /// Indicator of `[-1, 1]` (sinc kernel).
    Flat,
}

/// Equally spaced evaluation grid, endpoints included.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::config("grid", format!("need lo < hi, got {lo}:{hi}")));
        }
        if points < 2 {
            return Err(Error::config("grid_points", "need at least 2 points"));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `lo:hi:k`, e.g. `-2:2:100`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::config("grid", format!("must look like lo:hi:k, got `{s}`"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let lo = parts[0].trim().parse::<f64>().map_err(|_| bad())?;
        let hi = parts[1].trim().parse::<f64>().map_err(|_| bad())?;
        let k = parts[2].trim().parse::<usize>().map_err(|_| bad())?;
        GridSpec::new(lo, hi, k)
    }
}

pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points)
                .map(|i| if i + 1 == points { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub freq_proposal_sd: f64,
    pub log_lambda_proposal_sd: f64,
    pub lambda_shape_literal: bool,
    pub retain_latent: bool,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 2500,
            thin: 5,
            freq_proposal_sd: 0.5,
            log_lambda_proposal_sd: 0.3,
            lambda_shape_literal: false,
            retain_latent: true,
        }
    }
}

impl SamplerSettings {
    pub fn retained_draws(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.thin
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeconSettings {
    pub kernel: KernelChoice,
    pub nodes: usize,
    pub bandwidths: Vec<f64>,
    pub folds: usize,
}

impl Default for DeconSettings {
    fn default() -> Self {
        Self {
            kernel: KernelChoice::Smooth,
            nodes: 513,
            bandwidths: default_bandwidths(),
            folds: 5,
        }
    }
}

pub fn default_bandwidths() -> Vec<f64> {
    let (lo, hi, k) = (0.05f64, 2.0f64, 24);
    (0..k)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// Key-value document as written by users; every field optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawConfig {
    pub n_basis: Option<usize>,
    pub lambda_prior_shape: Option<f64>,
    pub lambda_prior_scale: Option<f64>,
    pub fixed_lambda: Option<f64>,
    pub lambda_shape_literal: Option<bool>,
    pub truncation: Option<usize>,
    pub alpha: Option<f64>,
    pub mu0: Option<f64>,
    pub kappa0: Option<f64>,
    pub a_tau: Option<f64>,
    pub b_tau: Option<f64>,
    pub sigma2: Option<NoiseParam>,
    pub delta2: Option<NoiseParam>,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub thin: Option<usize>,
    pub freq_proposal_sd: Option<f64>,
    pub log_lambda_proposal_sd: Option<f64>,
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    pub grid_points: Option<usize>,
    pub estimators: Option<Vec<String>>,
    pub seed: Option<u64>,
    pub decon_kernel: Option<KernelChoice>,
    pub decon_nodes: Option<usize>,
    pub decon_bandwidths: Option<Vec<f64>>,
    pub decon_folds: Option<usize>,
    pub retain_latent: Option<bool>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Normalized configuration with every default filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub gp: GpHyper,
    pub dpmm: DpmmHyper,
    pub noise: NoiseConfig,
    pub sampler: SamplerSettings,
    pub grid: GridSpec,
    pub estimators: Vec<Method>,
    pub seed: u64,
    pub decon: DeconSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        validate_config(&RawConfig::default()).expect("defaults are valid")
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be > 0, got {v}")))
    }
}

fn noise(key: &str, v: NoiseParam) -> Result<NoiseParam> {
    match v {
        NoiseParam::Fixed(x) => positive(key, x).map(NoiseParam::Fixed),
        NoiseParam::Sampled => Ok(v),
    }
}

pub fn validate_config(raw: &RawConfig) -> Result<RunConfig> {
    let gp_default = GpHyper::default();
    let dp_default = DpmmHyper::default();
    let sm_default = SamplerSettings::default();

    if raw.n_basis == Some(0) {
        return Err(Error::config("n_basis", "n_basis must be ≥ 1"));
    }
    let gp = GpHyper {
        n_basis: raw.n_basis,
        lambda_prior_shape: positive(
            "lambda_prior_shape",
            raw.lambda_prior_shape.unwrap_or(gp_default.lambda_prior_shape),
        )?,
        lambda_prior_scale: positive(
            "lambda_prior_scale",
            raw.lambda_prior_scale.unwrap_or(gp_default.lambda_prior_scale),
        )?,
        fixed_lambda: raw
            .fixed_lambda
            .map(|v| positive("fixed_lambda", v))
            .transpose()?,
    };

    let truncation = raw.truncation.unwrap_or(dp_default.truncation);
    if truncation == 0 {
        return Err(Error::config("truncation", "truncation must be ≥ 1"));
    }
    let mu0 = raw.mu0.unwrap_or(dp_default.mu0);
    if !mu0.is_finite() {
        return Err(Error::config("mu0", "must be finite"));
    }
    let dpmm = DpmmHyper {
        truncation,
        alpha: positive("alpha", raw.alpha.unwrap_or(dp_default.alpha))?,
        mu0,
        kappa0: positive("kappa0", raw.kappa0.unwrap_or(dp_default.kappa0))?,
        a_tau: positive("a_tau", raw.a_tau.unwrap_or(dp_default.a_tau))?,
        b_tau: positive("b_tau", raw.b_tau.unwrap_or(dp_default.b_tau))?,
    };

    let noise_cfg = NoiseConfig {
        sigma2: noise("sigma2", raw.sigma2.unwrap_or(NoiseParam::Sampled))?,
        delta2: noise("delta2", raw.delta2.unwrap_or(NoiseParam::Sampled))?,
    };

    let sampler = SamplerSettings {
        iterations: raw.iterations.unwrap_or(sm_default.iterations),
        burn_in: raw.burn_in.unwrap_or(sm_default.burn_in),
        thin: raw.thin.unwrap_or(sm_default.thin),
        freq_proposal_sd: raw.freq_proposal_sd.unwrap_or(sm_default.freq_proposal_sd),
        log_lambda_proposal_sd: raw
            .log_lambda_proposal_sd
            .unwrap_or(sm_default.log_lambda_proposal_sd),
        lambda_shape_literal: raw
            .lambda_shape_literal
            .unwrap_or(sm_default.lambda_shape_literal),
        retain_latent: raw.retain_latent.unwrap_or(sm_default.retain_latent),
    };
    if sampler.thin == 0 {
        return Err(Error::config("thin", "thin must be ≥ 1"));
    }
    if sampler.burn_in > sampler.iterations {
        return Err(Error::config("burn_in", "burn_in cannot exceed iterations"));
    }
    if !(sampler.freq_proposal_sd.is_finite() && sampler.freq_proposal_sd >= 0.0) {
        return Err(Error::config("freq_proposal_sd", "must be ≥ 0"));
    }
    positive("log_lambda_proposal_sd", sampler.log_lambda_proposal_sd)?;

    let grid = GridSpec::new(
        raw.grid_lo.unwrap_or(-3.0),
        raw.grid_hi.unwrap_or(3.0),
        raw.grid_points.unwrap_or(100),
    )?;

    let estimators = match &raw.estimators {
        Some(list) => parse_methods(&list.join(","))?,
        None => Method::ALL.to_vec(),
    };

    let mut decon = DeconSettings::default();
    if let Some(k) = raw.decon_kernel {
        decon.kernel = k;
    }
    if let Some(nodes) = raw.decon_nodes {
        if nodes < 3 || nodes % 2 == 0 {
            return Err(Error::config("decon_nodes", "must be odd and ≥ 3"));
        }
        decon.nodes = nodes;
    }
    if let Some(bw) = &raw.decon_bandwidths {
        if bw.is_empty() {
            return Err(Error::config("decon_bandwidths", "need at least one candidate"));
        }
        for &h in bw {
            positive("decon_bandwidths", h)?;
        }
        decon.bandwidths = bw.clone();
    }
    if let Some(folds) = raw.decon_folds {
        if folds < 2 {
            return Err(Error::config("decon_folds", "need at least 2 folds"));
        }
        decon.folds = folds;
    }

    Ok(RunConfig {
        gp,
        dpmm,
        noise: noise_cfg,
        sampler,
        grid,
        estimators,
        seed: raw.seed.unwrap_or(1),
        decon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_defaults() {
        let cfg = validate_config(&RawConfig::from_json("{}").unwrap()).unwrap();
        assert_eq!(cfg.dpmm.truncation, 20);
        assert_eq!(cfg.dpmm.mu0, 0.0);
        assert_eq!(cfg.dpmm.kappa0, 1.0);
        assert_eq!(cfg.dpmm.a_tau, 1.0);
        assert_eq!(cfg.dpmm.b_tau, 1.0);
        assert_eq!(cfg.dpmm.alpha, 1.0);
        assert_eq!(cfg.gp.lambda_prior_shape, 5.0);
        assert_eq!(cfg.gp.lambda_prior_scale, 1.0);
        assert_eq!(cfg.sampler.iterations, 5000);
        assert_eq!(cfg.sampler.burn_in, 2500);
        assert_eq!(cfg.sampler.thin, 5);
        assert_eq!(cfg.sampler.freq_proposal_sd, 0.5);
        assert_eq!(cfg.grid.values().len(), 100);
        assert_eq!(cfg.estimators, Method::ALL.to_vec());
    }

    #[test]
    fn zero_basis_rejected() {
        let err = validate_config(&RawConfig::from_json(r#"{"n_basis": 0}"#).unwrap()).unwrap_err();
        assert!(err.to_string().contains("n_basis must be ≥ 1"), "{err}");
    }

    #[test]
    fn fixed_sigma_echoed() {
        let cfg = validate_config(&RawConfig::from_json(r#"{"sigma2": 0.04}"#).unwrap()).unwrap();
        assert_eq!(cfg.noise.sigma2, NoiseParam::Fixed(0.04));
        assert!(!cfg.noise.sigma2.is_sampled());
    }

    #[test]
    fn range_and_name_errors() {
        for bad in [
            r#"{"alpha": 0}"#,
            r#"{"sigma2": -1}"#,
            r#"{"truncation": 0}"#,
            r#"{"burn_in": 10, "iterations": 5}"#,
            r#"{"decon_nodes": 512}"#,
        ] {
            assert!(validate_config(&RawConfig::from_json(bad).unwrap()).is_err(), "{bad}");
        }
        let err = validate_config(&RawConfig::from_json(r#"{"estimators": ["gpev_z"]}"#).unwrap())
            .unwrap_err();
        assert!(matches!(err, Error::UnknownEstimator(_)));
        assert!(RawConfig::from_json(r#"{"not_a_key": 1}"#).is_err());
    }

    #[test]
    fn method_list_is_sorted_and_deduplicated() {
        assert_eq!(
            parse_methods("decon,gpev_a,decon").unwrap(),
            vec![Method::GpevA, Method::Decon]
        );
    }

    #[test]
    fn grid_parsing() {
        let g: GridSpec = "-2:2:100".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 100);
        assert_eq!(v[0], -2.0);
        assert_eq!(v[99], 2.0);
        assert!("1:0:5".parse::<GridSpec>().is_err());
        assert!("a:b".parse::<GridSpec>().is_err());
    }
}
