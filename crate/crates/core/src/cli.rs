//! Command-line front end: `gpev simulate`, `gpev fit`, `gpev check`.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 runtime failure,
//! 3 failed self-check.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::checks::Suite;
use crate::config::{parse_methods, GridSpec, RawConfig, RunConfig};
use crate::error::Error;
use crate::harness::{
    case_study, case_study_config, run_table, write_experiment_outputs, ExperimentResult, Preset,
    TrueFunction,
};
use crate::output::{write_chain, write_summary};
use crate::summaries::covariate_density_summary;
use crate::types::{load_dataset, ColumnMap, NoiseParam, RngSeed};
use crate::validate_config;

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

/// Environment variable that overrides every other seed source.
pub const SEED_ENV: &str = "GPEV_SEED";

#[derive(Debug, Parser)]
#[command(name = "gpev", version, about = "Errors-in-variables regression with RFF Gaussian processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation table and write its CSV outputs.
    Simulate(SimulateArgs),
    /// Fit the mixture model to a data file, one fit per group.
    Fit(FitArgs),
    /// Run the self-check suites.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON config file; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "table1")]
    pub preset: String,
    /// True regression function, f1 or f2.
    #[arg(long, default_value = "f1")]
    pub function: String,
    /// Sample size; overrides the preset.
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated δ² values; overrides the preset.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub delta2: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub replicates: usize,
    /// Use 50 replicates.
    #[arg(long, conflicts_with = "replicates")]
    pub full: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated estimators; overrides the config.
    #[arg(long)]
    pub methods: Option<String>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// MCMC iterations; burn-in is scaled to keep its fraction.
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Measurement-error variance, a positive number or `sample`.
    #[arg(long, allow_hyphen_values = true)]
    pub delta2: Option<NoiseParam>,
    #[arg(long, default_value = "-2:2:100", allow_hyphen_values = true)]
    pub grid: GridSpec,
    /// Write Δ(x) = f(x) - x summaries instead of f.
    #[arg(long)]
    pub delta_of_x: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "w")]
    pub w_col: String,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Group column; ignored when absent from the file.
    #[arg(long, default_value = "group")]
    pub group_col: String,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// One of rff-moments, kernel, conjugacy, invariance, dpmm; all when omitted.
    #[arg(long)]
    pub suite: Option<Suite>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl Failure {
    fn config(error: Error) -> Self {
        Self {
            code: EXIT_CONFIG,
            error,
        }
    }

    fn runtime(error: Error) -> Self {
        let code = if error.is_config() {
            EXIT_CONFIG
        } else {
            EXIT_RUNTIME
        };
        Self { code, error }
    }
}

/// Parses the process arguments and runs them. Argument errors exit with
/// the configuration code rather than clap's default.
pub fn run_from_env() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            code
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a).map(|_| 0),
        Command::Fit(a) => fit(&a).map(|_| 0),
        Command::Check(a) => Ok(check(&a)),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.error);
            f.code
        }
    }
}

fn env_seed() -> std::result::Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            Failure::config(Error::config(SEED_ENV, format!("not an unsigned integer: `{v}`")))
        }),
        Err(_) => Ok(None),
    }
}

fn load_raw(path: Option<&Path>) -> std::result::Result<RawConfig, Failure> {
    match path {
        Some(p) => RawConfig::from_path(p).map_err(Failure::config),
        None => Ok(RawConfig::default()),
    }
}

fn set_iterations(raw: &mut RawConfig, iterations: Option<usize>) {
    if let Some(it) = iterations {
        let defaults = RunConfig::default().sampler;
        let burn = raw.burn_in.unwrap_or(defaults.burn_in) as f64
            / raw.iterations.unwrap_or(defaults.iterations).max(1) as f64;
        raw.iterations = Some(it);
        raw.burn_in = Some(((it as f64) * burn).round() as usize);
    }
}

fn with_pool<T>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> std::result::Result<T, Failure>
where
    T: Send,
{
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Failure::config(Error::config("jobs", "need at least one worker"))),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| Failure::runtime(Error::InvalidArgument(e.to_string())))?;
            Ok(pool.install(f))
        }
    }
}

fn simulate(args: &SimulateArgs) -> std::result::Result<(), Failure> {
    let mut raw = load_raw(args.config.as_deref())?;
    set_iterations(&mut raw, args.iterations);
    let mut config = validate_config(&raw).map_err(Failure::config)?;
    if let Some(list) = &args.methods {
        config.estimators = parse_methods(list).map_err(Failure::config)?;
    }
    let preset: Preset = args.preset.parse().map_err(Failure::config)?;
    let function: TrueFunction = args.function.parse().map_err(Failure::config)?;
    let n = args.n.unwrap_or(preset.n());
    let delta2s = args.delta2.clone().unwrap_or_else(|| preset.delta2s());
    if let Some(d) = delta2s.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Failure::config(Error::config("delta2", format!("must be ≥ 0, got {d}"))));
    }
    let replicates = if args.full { 50 } else { args.replicates };
    let seed = RngSeed(env_seed()?.or(args.seed).unwrap_or(config.seed));

    let start = Instant::now();
    let results = with_pool(args.jobs, || {
        run_table(n, function, &delta2s, &config.estimators, replicates, &config, seed)
    })?
    .map_err(Failure::runtime)?;
    write_experiment_outputs(&args.out, &results).map_err(Failure::runtime)?;
    print!("{}", format_table(&results));
    eprintln!(
        "simulate: {} cells x {} replicates in {:.1} s",
        results.len(),
        replicates,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

/// AMSE table scaled by 100, `mean (sd)` per cell.
pub fn format_table(results: &[ExperimentResult]) -> String {
    let Some(first) = results.first() else {
        return String::new();
    };
    let mut out = format!("{:<8}", "method");
    for r in results {
        out.push_str(&format!(" {:>16}", format!("d2={}", r.spec.delta2)));
    }
    out.push('\n');
    for m in &first.methods {
        out.push_str(&format!("{:<8}", m.name()));
        for r in results {
            let cell = match (r.mean_amse(*m), r.sd_amse(*m)) {
                (Some(a), Some(s)) => format!("{:.2} ({:.2})", 100.0 * a, 100.0 * s),
                _ => "-".to_string(),
            };
            out.push_str(&format!(" {cell:>16}"));
        }
        out.push('\n');
    }
    out
}

fn fit(args: &FitArgs) -> std::result::Result<(), Failure> {
    let mut raw = load_raw(args.config.as_deref())?;
    set_iterations(&mut raw, args.iterations);
    let user = validate_config(&raw).map_err(Failure::config)?;
    let mut config = case_study_config(&user);
    if raw.lambda_prior_shape.is_some() {
        config.gp.lambda_prior_shape = user.gp.lambda_prior_shape;
    }
    if raw.lambda_prior_scale.is_some() {
        config.gp.lambda_prior_scale = user.gp.lambda_prior_scale;
    }
    if raw.sigma2.is_some() {
        config.noise.sigma2 = user.noise.sigma2;
    }
    if let Some(d) = args.delta2 {
        if let NoiseParam::Fixed(v) = d {
            if !(v.is_finite() && v > 0.0) {
                return Err(Failure::config(Error::config("delta2", format!("must be > 0, got {v}"))));
            }
        }
        config.noise.delta2 = d;
    }
    config.grid = args.grid;
    let columns = ColumnMap {
        w: args.w_col.clone(),
        y: args.y_col.clone(),
        group: Some(args.group_col.clone()),
    };
    let data = load_dataset(&args.data, &columns).map_err(Failure::config)?;
    let seed = RngSeed(env_seed()?.or(args.seed).unwrap_or(config.seed));

    let fits = with_pool(args.jobs, || case_study(&data, &config, seed))?.map_err(Failure::runtime)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Failure::runtime(Error::io(&args.out, e)))?;
    let grid = args.grid.values();
    let sampled_delta = config.noise.delta2.is_sampled();
    for g in &fits {
        let density = covariate_density_summary(&g.chain, &grid).map_err(Failure::runtime)?;
        let (name, summary) = if args.delta_of_x {
            (format!("delta_{}.csv", g.group), g.delta_summary(&grid))
        } else {
            (format!("fit_{}.csv", g.group), g.summary(&grid))
        };
        let summary = summary.map_err(Failure::runtime)?;
        write_summary(&args.out.join(name), &summary, Some(&density)).map_err(Failure::runtime)?;
        write_chain(
            &args.out.join(format!("diagnostics_{}.csv", g.group)),
            &g.chain,
            sampled_delta,
        )
        .map_err(Failure::runtime)?;
        let last = g.chain.draws.last();
        eprintln!(
            "fit: group {} (n = {}), {} draws, acceptance w {:.2} s {:.2} x {:.2}",
            g.group,
            g.n,
            g.chain.len(),
            last.map_or(0.0, |d| d.acceptance.frequencies.rate()),
            last.map_or(0.0, |d| d.acceptance.phases.rate()),
            last.map_or(0.0, |d| d.acceptance.latent_x.rate()),
        );
    }
    Ok(())
}

fn check(args: &CheckArgs) -> i32 {
    let seed = match env_seed() {
        Ok(s) => RngSeed(s.or(args.seed).unwrap_or(20_240_601)),
        Err(f) => {
            eprintln!("error: {}", f.error);
            return f.code;
        }
    };
    let suites: Vec<Suite> = match args.suite {
        Some(s) => vec![s],
        None => Suite::ALL.to_vec(),
    };
    let mut failed = 0;
    for suite in suites {
        for outcome in suite.run(seed) {
            println!("{outcome}");
            failed += usize::from(!outcome.passed);
        }
    }
    if failed == 0 {
        0
    } else {
        eprintln!("{failed} check(s) failed");
        EXIT_CHECK
    }
}
