//! CSV writers for every emitted artifact.
//!
//! | file | columns |
//! |---|---|
//! | fit / Δ summary | `grid, mean, lower, upper, band_lower, band_upper[, density]` |
//! | decon estimate | `grid, p_hat, f_hat, clipped` |
//! | chain trace | `iteration, sigma2, lambda, log_likelihood, acc_w, acc_s, acc_x, acc_lambda[, delta2]` |
//! | function draws | `iteration, f_0 … f_{K-1}` |
//! | density | `grid, truth, <method>…` |
//! | truth | `grid, f` |
//! | replicates | `function, n, delta2, replicate, method, amse` |
//! | table | `method, delta2=<v>…`, cells `mean (sd)` |
//!
//! Floats are written with Rust's shortest round-trip formatting, so output
//! is byte-stable and re-reads to identical values. Debug builds re-read each
//! header after writing and compare it with the documented one.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::decon::DeconEstimate;
use crate::error::{Error, Result};
use crate::sampler::ChainSamples;
use crate::summaries::FunctionSummary;

pub const SUMMARY_HEADER: [&str; 6] = ["grid", "mean", "lower", "upper", "band_lower", "band_upper"];
pub const DECON_HEADER: [&str; 4] = ["grid", "p_hat", "f_hat", "clipped"];
pub const CHAIN_HEADER: [&str; 8] = [
    "iteration",
    "sigma2",
    "lambda",
    "log_likelihood",
    "acc_w",
    "acc_s",
    "acc_x",
    "acc_lambda",
];
pub const TRUTH_HEADER: [&str; 2] = ["grid", "f"];
pub const REPLICATES_HEADER: [&str; 6] = ["function", "n", "delta2", "replicate", "method", "amse"];

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn finish(mut w: csv::Writer<File>, path: &Path, header: &[String]) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))?;
    drop(w);
    if cfg!(debug_assertions) {
        validate_header(path, header)?;
    }
    Ok(())
}

/// Re-reads the first line of `path` and compares it with `expected`.
pub fn validate_header(path: &Path, expected: &[String]) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    let found: Vec<&str> = line.trim_end().split(',').collect();
    if found != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument(format!(
            "{} header {:?} does not match schema {:?}",
            path.display(),
            found,
            expected
        )));
    }
    Ok(())
}

fn strings(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    finish(w, path, &header)
}

/// Summary CSV; `density` adds a covariate-density column.
pub fn write_summary(path: &Path, summary: &FunctionSummary, density: Option<&[f64]>) -> Result<()> {
    let mut header = strings(&SUMMARY_HEADER);
    if density.is_some() {
        header.push("density".into());
    }
    let (bl, bu) = (summary.band_lower(), summary.band_upper());
    let rows = (0..summary.grid.len()).map(|k| {
        let mut row = vec![
            summary.grid[k].to_string(),
            summary.mean[k].to_string(),
            summary.lower[k].to_string(),
            summary.upper[k].to_string(),
            bl[k].to_string(),
            bu[k].to_string(),
        ];
        if let Some(d) = density {
            row.push(d[k].to_string());
        }
        row
    });
    write_rows(path, header, rows)
}

pub fn write_decon(path: &Path, est: &DeconEstimate) -> Result<()> {
    let rows = (0..est.grid.len()).map(|k| {
        vec![
            est.grid[k].to_string(),
            est.p_hat[k].to_string(),
            est.f_hat.get(k).map_or(String::new(), f64::to_string),
            (est.clipped[k] as u8).to_string(),
        ]
    });
    write_rows(path, strings(&DECON_HEADER), rows)
}

/// Per-draw trace; the `delta2` column is added when δ² was sampled.
pub fn write_chain(path: &Path, samples: &ChainSamples, with_delta2: bool) -> Result<()> {
    let mut header = strings(&CHAIN_HEADER);
    if with_delta2 {
        header.push("delta2".into());
    }
    let rows = samples.draws.iter().map(|d| {
        let a = &d.acceptance;
        let mut row = vec![
            d.iteration.to_string(),
            d.sigma2.to_string(),
            d.lambda.to_string(),
            d.log_likelihood.to_string(),
            a.frequencies.rate().to_string(),
            a.phases.rate().to_string(),
            a.latent_x.rate().to_string(),
            a.lambda.rate().to_string(),
        ];
        if with_delta2 {
            row.push(d.delta2.to_string());
        }
        row
    });
    write_rows(path, header, rows)
}

/// Function draws on the chain's grid, one column per grid point.
pub fn write_function_draws(path: &Path, samples: &ChainSamples) -> Result<()> {
    let mut header = vec!["iteration".to_string()];
    header.extend((0..samples.grid.len()).map(|k| format!("f_{k}")));
    let rows = samples.draws.iter().map(|d| {
        std::iter::once(d.iteration.to_string())
            .chain(d.f.iter().map(f64::to_string))
            .collect()
    });
    write_rows(path, header, rows)
}

pub fn write_truth(path: &Path, grid: &[f64], f: &[f64]) -> Result<()> {
    let rows = grid
        .iter()
        .zip(f)
        .map(|(g, v)| vec![g.to_string(), v.to_string()]);
    write_rows(path, strings(&TRUTH_HEADER), rows)
}

/// Grid, true density, then one column per named estimate.
pub fn write_density(path: &Path, grid: &[f64], truth: &[f64], columns: &[(String, Vec<f64>)]) -> Result<()> {
    let mut header = strings(&["grid", "truth"]);
    header.extend(columns.iter().map(|(name, _)| name.clone()));
    let rows = (0..grid.len()).map(|k| {
        let mut row = vec![grid[k].to_string(), truth[k].to_string()];
        row.extend(columns.iter().map(|(_, v)| v[k].to_string()));
        row
    });
    write_rows(path, header, rows)
}

/// One replicate AMSE per row.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateRow {
    pub function: String,
    pub n: usize,
    pub delta2: f64,
    pub replicate: usize,
    pub method: String,
    pub amse: f64,
}

pub fn write_replicates(path: &Path, rows: &[ReplicateRow]) -> Result<()> {
    let it = rows.iter().map(|r| {
        vec![
            r.function.clone(),
            r.n.to_string(),
            r.delta2.to_string(),
            r.replicate.to_string(),
            r.method.clone(),
            r.amse.to_string(),
        ]
    });
    write_rows(path, strings(&REPLICATES_HEADER), it)
}

/// Method-by-δ² table with `mean (sd)` cells; `None` leaves a cell empty.
pub fn write_table(
    path: &Path,
    delta2s: &[f64],
    rows: &[(String, Vec<Option<(f64, f64)>>)],
) -> Result<()> {
    let mut header = vec!["method".to_string()];
    header.extend(delta2s.iter().map(|d| format!("delta2={d}")));
    let it = rows.iter().map(|(method, cells)| {
        std::iter::once(method.clone())
            .chain(cells.iter().map(|c| match c {
                Some((m, s)) => format!("{m} ({s})"),
                None => String::new(),
            }))
            .collect()
    });
    write_rows(path, header, it)
}
