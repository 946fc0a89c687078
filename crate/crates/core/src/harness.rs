//! Simulation studies and the grouped case-study workflow.
//!
//! Synthetic data follow `X ~ law`, `Y = f(X) + N(0, σ²)`, `W = X + N(0, δ²)`.
//! The latent `X` is kept in [`Synthetic`] for evaluation only; estimators
//! receive the [`Dataset`] alone.
//!
//! Every (replicate, method) job draws from its own stream derived from the
//! root seed, so results do not depend on the worker count.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::config::{linspace, Method, RunConfig};
use crate::decon::{decon_regression, select_bandwidth, DeconEstimate, DeconKernelSpec};
use crate::error::{Error, Result};
use crate::gp_exact::{run_chain_gpev_f, run_gp_ignore_error};
use crate::math::{mean, sample_sd, std_normal};
use crate::output::{self, ReplicateRow};
use crate::sampler::{run_chain, ChainSamples, Variant};
use crate::summaries::{amse, covariate_density_summary, mean_curve, FunctionSummary, MIN_DRAWS};
use crate::types::{default_n_basis, Dataset, NoiseParam, RngSeed};

/// Credible level used for every emitted summary.
pub const LEVEL: f64 = 0.95;

/// Smallest group the case study will fit.
pub const MIN_GROUP_SIZE: usize = 10;

/// Regression functions of the simulation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrueFunction {
    /// `sin(πx/2) / (1 + 2x² (sign(x) + 1))`
    F1,
    /// `(x + x²) / 4`
    F2,
}

impl TrueFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TrueFunction::F1 => {
                let sign = if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                (PI * x / 2.0).sin() / (1.0 + 2.0 * x * x * (sign + 1.0))
            }
            TrueFunction::F2 => (x + x * x) / 4.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrueFunction::F1 => "f1",
            TrueFunction::F2 => "f2",
        }
    }

    fn index(self) -> u64 {
        match self {
            TrueFunction::F1 => 1,
            TrueFunction::F2 => 2,
        }
    }
}

impl fmt::Display for TrueFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrueFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "f1" => Ok(TrueFunction::F1),
            "f2" => Ok(TrueFunction::F2),
            other => Err(Error::config("function", format!("unknown function `{other}`; use f1 or f2"))),
        }
    }
}

/// Free-function form of [`TrueFunction::eval`].
pub fn true_function(f: TrueFunction, x: f64) -> f64 {
    f.eval(x)
}

/// Law of the latent covariate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum XLaw {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl XLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            XLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            XLaw::Normal { mean, sd } => mean + sd * std_normal(rng),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            XLaw::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            XLaw::Normal { mean, sd } => crate::math::normal_pdf(x, mean, sd * sd),
        }
    }
}

/// Generative design of one simulation cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub function: TrueFunction,
    pub sigma: f64,
    pub delta2: f64,
    pub x_law: XLaw,
}

impl SyntheticSpec {
    /// `X ~ U[-3, 3]`, `σ = 0.2`.
    pub fn standard(n: usize, function: TrueFunction, delta2: f64) -> Self {
        Self {
            n,
            function,
            sigma: 0.2,
            delta2,
            x_law: XLaw::Uniform { lo: -3.0, hi: 3.0 },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewObservations(self.n));
        }
        if !(self.sigma >= 0.0) || !(self.delta2 >= 0.0) {
            return Err(Error::InvalidArgument(
                "sigma and delta2 must be ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// A generated data set together with the latent covariates behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Synthetic {
    pub data: Dataset,
    pub x: Vec<f64>,
    pub function: TrueFunction,
}

pub fn generate<R: Rng + ?Sized>(spec: &SyntheticSpec, rng: &mut R) -> Result<Synthetic> {
    spec.validate()?;
    let delta = spec.delta2.sqrt();
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    let mut w = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi = spec.x_law.sample(rng);
        let e = std_normal(rng);
        let u = std_normal(rng);
        x.push(xi);
        y.push(spec.function.eval(xi) + spec.sigma * e);
        w.push(xi + delta * u);
    }
    Ok(Synthetic {
        data: Dataset::new(y, w)?,
        x,
        function: spec.function,
    })
}

/// Run configuration for one simulation cell: noise fixed at the truth, the
/// study's basis size unless one is set, latent draws not retained.
pub fn simulation_config(base: &RunConfig, spec: &SyntheticSpec) -> RunConfig {
    let mut cfg = base.clone();
    cfg.noise.sigma2 = NoiseParam::Fixed((spec.sigma * spec.sigma).max(1e-10));
    cfg.noise.delta2 = NoiseParam::Fixed(spec.delta2.max(1e-10));
    if cfg.gp.n_basis.is_none() {
        cfg.gp.n_basis = Some(study_n_basis(spec.n));
    }
    cfg.sampler.retain_latent = false;
    cfg
}

/// 80 features at n = 500, `round(n/4.5)` clamped to `[10, n]` otherwise.
pub fn study_n_basis(n: usize) -> usize {
    if n == 500 {
        80
    } else {
        default_n_basis(n)
    }
}

/// Output of one estimator on one data set.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodFit {
    pub method: Method,
    pub grid: Vec<f64>,
    /// Posterior mean or frequentist estimate on `grid`.
    pub f_hat: Vec<f64>,
    /// Present for chains with at least [`MIN_DRAWS`] draws.
    pub summary: Option<FunctionSummary>,
    /// Posterior mean covariate density, for chains with a mixture.
    pub density: Option<Vec<f64>>,
    pub chain: Option<ChainSamples>,
    pub decon: Option<DeconEstimate>,
}

/// Fits one estimator. Deconvolution needs a fixed δ²; its bandwidth is
/// chosen by cross-validation over the configured candidates.
pub fn fit_method<R: Rng + ?Sized>(
    method: Method,
    data: &Dataset,
    config: &RunConfig,
    rng: &mut R,
) -> Result<MethodFit> {
    let grid = config.grid.values();
    if method == Method::Decon {
        let delta2 = config.noise.delta2.fixed().ok_or_else(|| {
            Error::config("delta2", "the deconvolution estimator needs a fixed delta2")
        })?;
        let d = &config.decon;
        let template = DeconKernelSpec::new(d.kernel, 1.0, delta2.sqrt(), d.nodes)?;
        let h = select_bandwidth(data, &template, &d.bandwidths, d.folds)?;
        let est = decon_regression(data, &template.with_bandwidth(h)?, &grid)?;
        return Ok(MethodFit {
            method,
            grid,
            f_hat: est.f_hat.clone(),
            summary: None,
            density: None,
            chain: None,
            decon: Some(est),
        });
    }
    let chain = match method {
        Method::GpevF => run_chain_gpev_f(data, config, rng)?,
        Method::Gp => run_gp_ignore_error(data, config, rng)?,
        m => run_chain(data, config, Variant::from_method(m).expect("surrogate method"), rng)?,
    };
    let draws = chain.function_draws(&grid)?;
    let f_hat = mean_curve(&draws)?;
    let summary = if draws.len() >= MIN_DRAWS {
        Some(FunctionSummary::from_draws(&grid, &draws, LEVEL)?)
    } else {
        None
    };
    let density = match method {
        Method::Gp => None,
        _ => Some(covariate_density_summary(&chain, &grid)?),
    };
    Ok(MethodFit {
        method,
        grid,
        f_hat,
        summary,
        density,
        chain: Some(chain),
        decon: None,
    })
}

/// All replicates of one simulation cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub spec: SyntheticSpec,
    pub methods: Vec<Method>,
    pub grid: Vec<f64>,
    /// `amse[m][r]` for method `methods[m]`, replicate `r`.
    pub amse: Vec<Vec<f64>>,
    /// Wall-clock seconds, same layout as `amse`.
    pub seconds: Vec<Vec<f64>>,
    /// `fits[r][m]`.
    pub fits: Vec<Vec<MethodFit>>,
}

impl ExperimentResult {
    fn position(&self, method: Method) -> Option<usize> {
        self.methods.iter().position(|m| *m == method)
    }

    pub fn replicate_amse(&self, method: Method) -> Option<&[f64]> {
        self.position(method).map(|i| self.amse[i].as_slice())
    }

    pub fn mean_amse(&self, method: Method) -> Option<f64> {
        self.replicate_amse(method).map(mean)
    }

    /// Across-replicate standard deviation of the AMSE.
    pub fn sd_amse(&self, method: Method) -> Option<f64> {
        self.replicate_amse(method).map(sample_sd)
    }

    pub fn fit(&self, replicate: usize, method: Method) -> Option<&MethodFit> {
        let i = self.position(method)?;
        self.fits.get(replicate).map(|f| &f[i])
    }

    pub fn truth(&self) -> Vec<f64> {
        self.grid.iter().map(|t| self.spec.function.eval(*t)).collect()
    }
}

/// Seed of one simulation cell, keyed by its design rather than its position
/// in a table, so a cell gives the same numbers whichever table it is part of.
pub fn cell_seed(root: RngSeed, spec: &SyntheticSpec) -> RngSeed {
    root.derive(&[spec.function.index(), spec.n as u64, spec.delta2.to_bits()])
}

/// Generates `replicates` data sets and fits every method to each. Jobs run
/// on the current rayon pool.
pub fn run_experiment(
    spec: &SyntheticSpec,
    methods: &[Method],
    replicates: usize,
    config: &RunConfig,
    seed: RngSeed,
) -> Result<ExperimentResult> {
    if replicates == 0 {
        return Err(Error::config("replicates", "need at least one replicate"));
    }
    if methods.is_empty() {
        return Err(Error::config("estimators", "no estimators selected"));
    }
    let cfg = simulation_config(config, spec);
    let datasets = (0..replicates)
        .map(|r| generate(spec, &mut seed.derive(&[0, r as u64]).rng()))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Method)> = (0..replicates)
        .flat_map(|r| methods.iter().map(move |m| (r, *m)))
        .collect();
    let grid = cfg.grid.values();
    let outcomes = jobs
        .par_iter()
        .map(|(r, m)| {
            let mut rng = seed.derive(&[1, *r as u64, m.index()]).rng();
            let start = Instant::now();
            let fit = fit_method(*m, &datasets[*r].data, &cfg, &mut rng).map_err(|e| {
                Error::Replicate {
                    replicate: *r,
                    method: m.name().to_string(),
                    source: Box::new(e),
                }
            })?;
            let secs = start.elapsed().as_secs_f64();
            let err = amse(&fit.f_hat, |t| spec.function.eval(t), &grid)?;
            Ok((fit, err, secs))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = methods.len();
    let mut amse_by = vec![Vec::with_capacity(replicates); k];
    let mut secs_by = vec![Vec::with_capacity(replicates); k];
    let mut fits = vec![Vec::with_capacity(k); replicates];
    for ((r, _), (fit, err, secs)) in jobs.iter().zip(outcomes) {
        let mi = fits[*r].len();
        amse_by[mi].push(err);
        secs_by[mi].push(secs);
        fits[*r].push(fit);
    }
    Ok(ExperimentResult {
        spec: *spec,
        methods: methods.to_vec(),
        grid,
        amse: amse_by,
        seconds: secs_by,
        fits,
    })
}

/// Sample sizes and δ² grids of the three simulation tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Table1,
    Table2,
    Table3,
}

impl Preset {
    pub fn n(self) -> usize {
        match self {
            Preset::Table1 => 500,
            Preset::Table2 => 100,
            Preset::Table3 => 250,
        }
    }

    pub fn delta2s(self) -> Vec<f64> {
        match self {
            Preset::Table1 => vec![0.001, 0.005, 0.01, 0.1, 0.5, 1.0],
            Preset::Table2 | Preset::Table3 => vec![0.01, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "table1" => Ok(Preset::Table1),
            "table2" => Ok(Preset::Table2),
            "table3" => Ok(Preset::Table3),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}`; use table1, table2 or table3"),
            )),
        }
    }
}

/// One [`run_experiment`] per δ² value.
pub fn run_table(
    n: usize,
    function: TrueFunction,
    delta2s: &[f64],
    methods: &[Method],
    replicates: usize,
    config: &RunConfig,
    seed: RngSeed,
) -> Result<Vec<ExperimentResult>> {
    delta2s
        .iter()
        .map(|d| {
            let spec = SyntheticSpec::standard(n, function, *d);
            run_experiment(&spec, methods, replicates, config, cell_seed(seed, &spec))
        })
        .collect()
}

/// Directory name of one δ² cell.
pub fn cell_dir_name(delta2: f64) -> String {
    format!("delta2_{delta2}")
}

/// Writes `table.csv`, `replicates.csv` and one directory per δ² cell with
/// truth, fits of replicate 0, the covariate density and the chain dumps.
pub fn write_experiment_outputs(out: &Path, results: &[ExperimentResult]) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let Some(first) = results.first() else {
        return Ok(());
    };
    let methods = &first.methods;
    let delta2s: Vec<f64> = results.iter().map(|r| r.spec.delta2).collect();
    let table: Vec<(String, Vec<Option<(f64, f64)>>)> = methods
        .iter()
        .map(|m| {
            let cells = results
                .iter()
                .map(|r| Some((r.mean_amse(*m)?, r.sd_amse(*m)?)))
                .collect();
            (m.name().to_string(), cells)
        })
        .collect();
    output::write_table(&out.join("table.csv"), &delta2s, &table)?;

    let mut rows = Vec::new();
    for r in results {
        for (mi, m) in r.methods.iter().enumerate() {
            for (rep, a) in r.amse[mi].iter().enumerate() {
                rows.push(ReplicateRow {
                    function: r.spec.function.name().into(),
                    n: r.spec.n,
                    delta2: r.spec.delta2,
                    replicate: rep,
                    method: m.name().into(),
                    amse: *a,
                });
            }
        }
    }
    output::write_replicates(&out.join("replicates.csv"), &rows)?;

    for r in results {
        let dir = out.join(cell_dir_name(r.spec.delta2));
        let chains = dir.join("chains");
        fs::create_dir_all(&chains).map_err(|e| Error::io(&chains, e))?;
        output::write_truth(&dir.join("truth.csv"), &r.grid, &r.truth())?;
        let mut densities = Vec::new();
        for m in &r.methods {
            let fit = r.fit(0, *m).expect("replicate 0 exists");
            let path = dir.join(format!("fit_{}.csv", m.name()));
            match (&fit.decon, &fit.summary) {
                (Some(est), _) => output::write_decon(&path, est)?,
                (None, Some(s)) => output::write_summary(&path, s, fit.density.as_deref())?,
                (None, None) => {
                    let s = point_summary(&fit.grid, &fit.f_hat);
                    output::write_summary(&path, &s, fit.density.as_deref())?
                }
            }
            if let Some(d) = &fit.density {
                densities.push((m.name().to_string(), d.clone()));
            }
            for (rep, fits) in r.fits.iter().enumerate() {
                let f = fits.iter().find(|f| f.method == *m).expect("method fitted");
                if let Some(chain) = &f.chain {
                    let stem = format!("{}_{rep}", m.name());
                    output::write_chain(&chains.join(format!("{stem}.csv")), chain, false)?;
                    output::write_function_draws(&chains.join(format!("{stem}_f.csv")), chain)?;
                }
            }
        }
        let truth: Vec<f64> = r.grid.iter().map(|t| r.spec.x_law.density(*t)).collect();
        output::write_density(&dir.join("density.csv"), &r.grid, &truth, &densities)?;
    }
    Ok(())
}

/// Summary with no spread, for chains too short for credible sets.
fn point_summary(grid: &[f64], mean: &[f64]) -> FunctionSummary {
    FunctionSummary {
        grid: grid.to_vec(),
        mean: mean.to_vec(),
        lower: mean.to_vec(),
        upper: mean.to_vec(),
        band_radius: 0.0,
        level: LEVEL,
    }
}

/// Case-study settings: 60 features unless set, λ ~ Exp(rate 1.5), σ² sampled.
pub fn case_study_config(base: &RunConfig) -> RunConfig {
    let mut cfg = base.clone();
    if cfg.gp.n_basis.is_none() {
        cfg.gp.n_basis = Some(60);
    }
    cfg.gp.lambda_prior_shape = 1.0;
    cfg.gp.lambda_prior_scale = 1.0 / 1.5;
    cfg.noise.sigma2 = NoiseParam::Sampled;
    cfg
}

/// Posterior fit of one group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupFit {
    pub group: String,
    pub n: usize,
    pub chain: ChainSamples,
}

impl GroupFit {
    /// Summary of `f` on `grid`.
    pub fn summary(&self, grid: &[f64]) -> Result<FunctionSummary> {
        FunctionSummary::from_samples(&self.chain, grid, LEVEL)
    }

    /// Summary of the change from baseline `Δ(x) = f(x) - x` on `grid`.
    pub fn delta_summary(&self, grid: &[f64]) -> Result<FunctionSummary> {
        let draws: Vec<Vec<f64>> = self
            .chain
            .function_draws(grid)?
            .into_iter()
            .map(|d| d.iter().zip(grid).map(|(f, t)| f - t).collect())
            .collect();
        FunctionSummary::from_draws(grid, &draws, LEVEL)
    }
}

/// Fits the mixture model separately to each group (the whole data set when
/// there is no group column). `config` is used as given; see
/// [`case_study_config`] for the study's settings.
pub fn case_study(data: &Dataset, config: &RunConfig, seed: RngSeed) -> Result<Vec<GroupFit>> {
    let subsets: Vec<(String, Dataset)> = if data.group_labels().is_some() {
        data.groups()
            .into_iter()
            .map(|g| {
                let d = data.subset_group(&g)?;
                Ok((g, d))
            })
            .collect::<Result<_>>()?
    } else {
        vec![("all".to_string(), data.clone())]
    };
    if subsets.is_empty() {
        return Err(Error::NoGroups);
    }
    for (g, d) in &subsets {
        if d.n() < MIN_GROUP_SIZE {
            return Err(Error::GroupTooSmall {
                group: g.clone(),
                n: d.n(),
            });
        }
    }
    subsets
        .par_iter()
        .enumerate()
        .map(|(i, (g, d))| {
            let mut rng = seed.derive(&[i as u64]).rng();
            let chain = run_chain(d, config, Variant::Mixture, &mut rng)?;
            Ok(GroupFit {
                group: g.clone(),
                n: d.n(),
                chain,
            })
        })
        .collect()
}

/// `linspace(-2, 2, 100)`, the case-study output grid.
pub fn case_study_grid() -> Vec<f64> {
    linspace(-2.0, 2.0, 100)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_values() {
        assert_eq!(TrueFunction::F1.eval(0.0), 0.0);
        assert_eq!(TrueFunction::F2.eval(2.0), 1.5);
        assert!((TrueFunction::F1.eval(-1.0) + 1.0).abs() < 1e-15);
        assert!((TrueFunction::F1.eval(1.0) - 0.2).abs() < 1e-15);
        assert!("f3".parse::<TrueFunction>().is_err());
    }

    #[test]
    fn degenerate_noise_levels() {
        let mut spec = SyntheticSpec::standard(50, TrueFunction::F2, 0.0);
        spec.sigma = 0.0;
        let s = generate(&spec, &mut RngSeed(1).rng()).unwrap();
        assert_eq!(s.data.w(), s.x.as_slice());
        for (y, x) in s.data.y().iter().zip(&s.x) {
            assert_eq!(*y, TrueFunction::F2.eval(*x));
        }
        assert!(s.x.iter().all(|x| (-3.0..=3.0).contains(x)));
    }

    #[test]
    fn presets() {
        assert_eq!(Preset::Table1.n(), 500);
        assert_eq!(Preset::Table1.delta2s().len(), 6);
        assert_eq!("table3".parse::<Preset>().unwrap().n(), 250);
        assert!("table4".parse::<Preset>().is_err());
        assert_eq!(study_n_basis(500), 80);
        assert_eq!(study_n_basis(100), 22);
    }

    #[test]
    fn cell_seed_ignores_table_position() {
        let a = SyntheticSpec::standard(100, TrueFunction::F1, 0.2);
        let b = SyntheticSpec::standard(100, TrueFunction::F1, 0.4);
        assert_eq!(cell_seed(RngSeed(3), &a), cell_seed(RngSeed(3), &a));
        assert_ne!(cell_seed(RngSeed(3), &a), cell_seed(RngSeed(3), &b));
    }

    #[test]
    fn small_groups_rejected() {
        let n = 14;
        let groups = (0..n).map(|i| if i < 9 { "a" } else { "b" }.to_string()).collect();
        let data = Dataset::with_groups(vec![0.0; n], (0..n).map(|i| i as f64).collect(), groups).unwrap();
        let err = case_study(&data, &RunConfig::default(), RngSeed(1)).unwrap_err();
        assert!(matches!(err, Error::GroupTooSmall { n: 9, .. }));
    }
}
