//! Shared domain types: the observed dataset, noise and prior hyperparameters,
//! and the seeded random-number contract.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Random stream used by every stochastic operation.
pub type ChainRng = ChaCha8Rng;

/// Paired observations `(w_i, y_i)` with optional group labels.
///
/// `w` holds the contaminated covariates; the latent covariates never appear
/// here, so estimators that accept a `Dataset` cannot see them.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    w: Vec<f64>,
    group: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        Self::build(y, w, None)
    }

    pub fn with_groups(y: Vec<f64>, w: Vec<f64>, group: Vec<String>) -> Result<Self> {
        if group.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "group column has {} entries for {} observations",
                group.len(),
                y.len()
            )));
        }
        Self::build(y, w, Some(group))
    }

    fn build(y: Vec<f64>, w: Vec<f64>, group: Option<Vec<String>>) -> Result<Self> {
        if y.len() != w.len() {
            return Err(Error::LengthMismatch {
                y: y.len(),
                w: w.len(),
            });
        }
        if y.len() < 2 {
            return Err(Error::TooFewObservations(y.len()));
        }
        for (row, (yi, wi)) in y.iter().zip(&w).enumerate() {
            if !yi.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: "y".into(),
                });
            }
            if !wi.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: "w".into(),
                });
            }
        }
        Ok(Self { y, w, group })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn group_labels(&self) -> Option<&[String]> {
        self.group.as_deref()
    }

    /// Distinct group labels in sorted order; empty when ungrouped.
    pub fn groups(&self) -> Vec<String> {
        match &self.group {
            Some(g) => g
                .iter()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
            None => Vec::new(),
        }
    }

    /// Observations belonging to `label`, in file order, without group labels.
    pub fn subset_group(&self, label: &str) -> Result<Dataset> {
        let groups = self.group.as_ref().ok_or(Error::NoGroups)?;
        let (mut y, mut w) = (Vec::new(), Vec::new());
        for ((g, yi), wi) in groups.iter().zip(&self.y).zip(&self.w) {
            if g == label {
                y.push(*yi);
                w.push(*wi);
            }
        }
        if y.len() < 2 {
            return Err(Error::GroupTooSmall {
                group: label.to_string(),
                n: y.len(),
            });
        }
        Dataset::new(y, w)
    }
}

/// Header names used when reading a dataset file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub w: String,
    pub y: String,
    pub group: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            w: "w".into(),
            y: "y".into(),
            group: Some("group".into()),
        }
    }
}

/// Reads a CSV with a header row. Columns are located by name, so their order
/// in the file is irrelevant. The group column is optional even when mapped.
pub fn load_dataset(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let w_col = find(&columns.w).ok_or_else(|| Error::MissingColumn(columns.w.clone()))?;
    let y_col = find(&columns.y).ok_or_else(|| Error::MissingColumn(columns.y.clone()))?;
    let g_col = columns.group.as_deref().and_then(find);

    let parse = |record: &csv::StringRecord, col: usize, name: &str, row: usize| {
        let cell = record.get(col).unwrap_or("");
        cell.parse::<f64>().map_err(|_| Error::NonNumeric {
            row,
            column: name.to_string(),
            value: cell.to_string(),
        })
    };

    let (mut y, mut w, mut g) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        w.push(parse(&record, w_col, &columns.w, row)?);
        y.push(parse(&record, y_col, &columns.y, row)?);
        if let Some(c) = g_col {
            g.push(record.get(c).unwrap_or("").to_string());
        }
    }
    match g_col {
        Some(_) => Dataset::with_groups(y, w, g),
        None => Dataset::new(y, w),
    }
}

/// Writes `w,y[,group]` with full-precision shortest round-trip formatting.
pub fn write_dataset(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    match &data.group {
        Some(groups) => {
            writer.write_record(["w", "y", "group"])?;
            for ((w, y), g) in data.w.iter().zip(&data.y).zip(groups) {
                writer.write_record([w.to_string(), y.to_string(), g.clone()])?;
            }
        }
        None => {
            writer.write_record(["w", "y"])?;
            for (w, y) in data.w.iter().zip(&data.y) {
                writer.write_record([w.to_string(), y.to_string()])?;
            }
        }
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// A variance that is either held fixed or sampled under the objective prior
/// `p(v) ∝ 1/v`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseParam {
    Fixed(f64),
    Sampled,
}

impl NoiseParam {
    pub fn is_sampled(&self) -> bool {
        matches!(self, NoiseParam::Sampled)
    }

    pub fn fixed(&self) -> Option<f64> {
        match self {
            NoiseParam::Fixed(v) => Some(*v),
            NoiseParam::Sampled => None,
        }
    }
}

impl Serialize for NoiseParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NoiseParam::Fixed(v) => s.serialize_f64(*v),
            NoiseParam::Sampled => s.serialize_str("sample"),
        }
    }
}

impl<'de> Deserialize<'de> for NoiseParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Word(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(NoiseParam::Fixed(v)),
            Repr::Word(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for NoiseParam {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "sample" | "sampled" => Ok(NoiseParam::Sampled),
            other => other
                .parse::<f64>()
                .map(NoiseParam::Fixed)
                .map_err(|_| format!("expected a positive number or `sample`, got `{other}`")),
        }
    }
}

/// Regression noise variance σ² and measurement-error variance δ².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma2: NoiseParam,
    pub delta2: NoiseParam,
}

/// Surrogate size and the gamma prior (shape, scale) on the kernel bandwidth λ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    /// `None` selects `round(n / 4.5)` clamped to `[10, n]`.
    pub n_basis: Option<usize>,
    pub lambda_prior_shape: f64,
    pub lambda_prior_scale: f64,
    pub fixed_lambda: Option<f64>,
}

impl Default for GpHyper {
    fn default() -> Self {
        Self {
            n_basis: None,
            lambda_prior_shape: 5.0,
            lambda_prior_scale: 1.0,
            fixed_lambda: None,
        }
    }
}

impl GpHyper {
    pub fn n_basis_for(&self, n: usize) -> usize {
        self.n_basis.unwrap_or_else(|| default_n_basis(n))
    }

    /// Prior mean of λ, used to start chains.
    pub fn initial_lambda(&self) -> f64 {
        self.fixed_lambda
            .unwrap_or(self.lambda_prior_shape * self.lambda_prior_scale)
    }
}

pub fn default_n_basis(n: usize) -> usize {
    let raw = (n as f64 / 4.5).round() as usize;
    raw.max(10).min(n.max(1))
}

/// Truncated Dirichlet-process mixture hyperparameters. The base measure is
/// `μ | τ ~ N(mu0, kappa0 / τ)`, `τ ~ Ga(a_tau, rate b_tau)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpmmHyper {
    pub truncation: usize,
    pub alpha: f64,
    pub mu0: f64,
    pub kappa0: f64,
    pub a_tau: f64,
    pub b_tau: f64,
}

impl Default for DpmmHyper {
    fn default() -> Self {
        Self {
            truncation: 20,
            alpha: 1.0,
            mu0: 0.0,
            kappa0: 1.0,
            a_tau: 1.0,
            b_tau: 1.0,
        }
    }
}

/// Root seed of an experiment. Child streams are derived by key so that the
/// order in which jobs execute never changes their draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChainRng {
        ChainRng::seed_from_u64(self.0)
    }

    pub fn derive(self, keys: &[u64]) -> RngSeed {
        let mut state = splitmix64(self.0);
        for &k in keys {
            state = splitmix64(state ^ splitmix64(k.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        }
        RngSeed(state)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
