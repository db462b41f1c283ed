//! Dataset ingestion: CSV loading with NA dropping, label mapping, z-scoring
//! and subsampling; a seeded synthetic generator; and the canonical
//! population CSV format.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distribution::Population;

/// Row count of the cleaned credit dataset used in the published experiment.
pub const CREDIT_REFERENCE_ROWS: usize = 18_357;

pub const CREDIT_LABEL: &str = "SeriousDlqin2yrs";

pub const CREDIT_FEATURES: [&str; 10] = [
    "RevolvingUtilizationOfUnsecuredLines",
    "age",
    "NumberOfTime30-59DaysPastDueNotWorse",
    "DebtRatio",
    "MonthlyIncome",
    "NumberOfOpenCreditLinesAndLoans",
    "NumberOfTimes90DaysLate",
    "NumberRealEstateLoansOrLines",
    "NumberOfTime60-89DaysPastDueNotWorse",
    "NumberOfDependents",
];

pub const INTERCEPT_NAME: &str = "intercept";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: line {line}, column `{column}`: cannot parse `{value}`")]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },

    #[error("{path}: line {line}: label `{value}` is not 0/1 or -1/+1")]
    BadLabel { path: PathBuf, line: u64, value: String },

    #[error("{path}: no rows left after dropping missing values")]
    NoRows { path: PathBuf },

    #[error("column `{column}` has zero variance and cannot be normalized")]
    ZeroVariance { column: String },

    #[error("invalid dataset spec: {0}")]
    Spec(String),

    #[error("population: {0}")]
    Population(String),
}

type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NaPolicy {
    #[default]
    DropRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsample {
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub label_column: String,
    pub feature_columns: Vec<String>,
    pub strategic_columns: Vec<String>,
    #[serde(default)]
    pub na_policy: NaPolicy,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub subsample: Option<Subsample>,
    /// Row count to compare against; reported, never enforced.
    #[serde(default)]
    pub expected_rows: Option<usize>,
}

fn default_true() -> bool {
    true
}

impl DatasetSpec {
    /// The GiveMeSomeCredit schema. Strategic columns are left for the caller
    /// to choose.
    pub fn give_me_some_credit(path: impl Into<PathBuf>, strategic_columns: Vec<String>) -> Self {
        Self {
            path: path.into(),
            label_column: CREDIT_LABEL.to_string(),
            feature_columns: CREDIT_FEATURES.iter().map(|s| s.to_string()).collect(),
            strategic_columns,
            na_policy: NaPolicy::DropRows,
            normalize: true,
            subsample: None,
            expected_rows: Some(CREDIT_REFERENCE_ROWS),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_columns.is_empty() {
            return Err(DataError::Spec("no feature columns".into()));
        }
        if self.feature_columns.contains(&self.label_column) {
            return Err(DataError::Spec(format!(
                "label column `{}` is also listed as a feature",
                self.label_column
            )));
        }
        if let Some(c) = self.strategic_columns.iter().find(|c| !self.feature_columns.contains(c)) {
            return Err(DataError::Spec(format!("strategic column `{c}` is not a feature column")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    /// Feature column names in population order; the intercept is last.
    pub columns: Vec<String>,
    pub intercept_column: usize,
    /// Indices (into `columns`) of the strategic features.
    pub strategic: Vec<usize>,
    pub rows_read: usize,
    pub rows_dropped_na: usize,
    pub rows: usize,
    pub filters: Vec<String>,
    /// Per-feature z-scoring statistics when normalization was applied.
    pub stats: Option<Vec<ColumnStats>>,
    pub expected_rows: Option<usize>,
}

impl DatasetMetadata {
    /// `Some(true)` when an expected row count was given and matched.
    pub fn matches_expected(&self) -> Option<bool> {
        self.expected_rows.map(|e| e == self.rows)
    }
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan") || f.eq_ignore_ascii_case("null")
}

/// Loads a header-row CSV into a uniform population.
pub fn load_dataset(spec: &DatasetSpec) -> Result<(Population, DatasetMetadata)> {
    spec.validate()?;
    let file = std::fs::File::open(&spec.path).map_err(|source| DataError::Io {
        path: spec.path.clone(),
        source,
    })?;
    load_from_reader(spec, file)
}

/// [`load_dataset`] over any reader; `spec.path` is used for messages only.
pub fn load_from_reader<R: Read>(spec: &DatasetSpec, reader: R) -> Result<(Population, DatasetMetadata)> {
    spec.validate()?;
    let path = &spec.path;
    let csv_err = |source| DataError::Csv {
        context: path.display().to_string(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| DataError::MissingColumn {
            path: path.clone(),
            column: name.to_string(),
        })
    };
    let label_idx = find(&spec.label_column)?;
    let feature_idx: Vec<usize> = spec.feature_columns.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let p = feature_idx.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let (mut read, mut dropped) = (0usize, 0usize);
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        read += 1;
        let label_raw = &record[label_idx];
        if is_missing(label_raw) || feature_idx.iter().any(|&j| is_missing(&record[j])) {
            dropped += 1;
            continue;
        }
        let label = match label_raw.trim().parse::<f64>() {
            Ok(1.0) => 1.0,
            Ok(v) if v == 0.0 || v == -1.0 => -1.0,
            _ => {
                return Err(DataError::BadLabel {
                    path: path.clone(),
                    line,
                    value: label_raw.to_string(),
                })
            }
        };
        for (&j, name) in feature_idx.iter().zip(&spec.feature_columns) {
            let raw = record[j].trim();
            let v: f64 = raw.parse().map_err(|_| DataError::Parse {
                path: path.clone(),
                line,
                column: name.clone(),
                value: raw.to_string(),
            })?;
            rows.push(v);
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(DataError::NoRows { path: path.clone() });
    }

    let mut filters = vec![format!("dropped {dropped} rows with missing values")];
    if let Some(sub) = spec.subsample {
        let keep = subsample_indices(labels.len(), sub)?;
        rows = keep.iter().flat_map(|&i| rows[i * p..(i + 1) * p].to_vec()).collect();
        labels = keep.iter().map(|&i| labels[i]).collect();
        filters.push(format!("seeded subsample of {} rows (seed {})", sub.count, sub.seed));
    }

    let stats = if spec.normalize {
        Some(normalize_columns(&mut rows, p, &spec.feature_columns)?)
    } else {
        None
    };
    let features = with_intercept(&rows, p);
    let n = labels.len();
    let population = Population::uniform(features, p + 1, labels)
        .map_err(|e| DataError::Population(e.to_string()))?;

    let mut columns = spec.feature_columns.clone();
    columns.push(INTERCEPT_NAME.to_string());
    let strategic = spec
        .strategic_columns
        .iter()
        .map(|c| spec.feature_columns.iter().position(|f| f == c).expect("validated"))
        .collect();
    Ok((
        population,
        DatasetMetadata {
            columns,
            intercept_column: p,
            strategic,
            rows_read: read,
            rows_dropped_na: dropped,
            rows: n,
            filters,
            stats,
            expected_rows: spec.expected_rows,
        },
    ))
}

/// Sorted row indices: the first `count` entries of a seeded shuffle of
/// `0..available`. A smaller count with the same seed selects a subset.
pub fn subsample_indices(available: usize, sub: Subsample) -> Result<Vec<usize>> {
    if sub.count == 0 || sub.count > available {
        return Err(DataError::Spec(format!(
            "subsample of {} rows requested from {available}",
            sub.count
        )));
    }
    let mut order: Vec<usize> = (0..available).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(sub.seed));
    let mut keep = order[..sub.count].to_vec();
    keep.sort_unstable();
    Ok(keep)
}

/// Z-scores each column of the row-major `n x p` matrix in place (population
/// standard deviation).
pub fn normalize_columns(rows: &mut [f64], p: usize, names: &[String]) -> Result<Vec<ColumnStats>> {
    let n = rows.len() / p;
    let mut stats = Vec::with_capacity(p);
    for j in 0..p {
        let mean = (0..n).map(|i| rows[i * p + j]).sum::<f64>() / n as f64;
        let var = (0..n).map(|i| (rows[i * p + j] - mean).powi(2)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        if !(std > 0.0) || !std.is_finite() {
            return Err(DataError::ZeroVariance {
                column: names.get(j).cloned().unwrap_or_else(|| format!("#{j}")),
            });
        }
        for i in 0..n {
            rows[i * p + j] = (rows[i * p + j] - mean) / std;
        }
        stats.push(ColumnStats { mean, std });
    }
    Ok(stats)
}

/// Inverts [`normalize_columns`].
pub fn denormalize_columns(rows: &mut [f64], p: usize, stats: &[ColumnStats]) {
    for row in rows.chunks_mut(p) {
        for (v, s) in row.iter_mut().zip(stats) {
            *v = *v * s.std + s.mean;
        }
    }
}

fn with_intercept(rows: &[f64], p: usize) -> Vec<f64> {
    rows.chunks(p)
        .flat_map(|r| r.iter().copied().chain(std::iter::once(1.0)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    #[serde(default = "default_balance")]
    pub class_balance: f64,
    /// Class means sit at `+/- separation` on every coordinate.
    #[serde(default = "default_separation")]
    pub separation: f64,
}

fn default_balance() -> f64 {
    0.5
}

fn default_separation() -> f64 {
    0.75
}

/// Seeded Gaussian class-conditional data: labels are `+1` with probability
/// `class_balance`, features are `N(y * separation, 1)` per coordinate, and a
/// constant intercept column is appended last.
pub fn generate_synthetic(n: usize, p: usize, seed: u64, class_balance: f64) -> Result<Population> {
    generate(&SyntheticSpec {
        n,
        p,
        seed,
        class_balance,
        separation: default_separation(),
    })
}

pub fn generate(spec: &SyntheticSpec) -> Result<Population> {
    if spec.n < 2 || spec.p < 1 {
        return Err(DataError::Spec(format!(
            "synthetic data needs n >= 2 and p >= 1 (got n={}, p={})",
            spec.n, spec.p
        )));
    }
    if !(0.0..=1.0).contains(&spec.class_balance) {
        return Err(DataError::Spec(format!("class balance {} outside [0, 1]", spec.class_balance)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n * (spec.p + 1));
    let mut labels = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let y = if rng.random_bool(spec.class_balance) { 1.0 } else { -1.0 };
        for _ in 0..spec.p {
            let z: f64 = StandardNormal.sample(&mut rng);
            features.push(y * spec.separation + z);
        }
        features.push(1.0);
        labels.push(y);
    }
    Population::uniform(features, spec.p + 1, labels).map_err(|e| DataError::Population(e.to_string()))
}

/// Default column names for synthetic data: `x0..x{p-1}` then the intercept.
pub fn synthetic_columns(p: usize) -> Vec<String> {
    (0..p)
        .map(|j| format!("x{j}"))
        .chain(std::iter::once(INTERCEPT_NAME.to_string()))
        .collect()
}

/// Z-scores every column except the last (intercept) column of a population.
pub fn normalize_population(pop: &Population) -> Result<(Population, Vec<ColumnStats>)> {
    let p = pop.p() - 1;
    if p == 0 {
        return Err(DataError::Spec("nothing to normalize besides the intercept".into()));
    }
    let mut rows: Vec<f64> = pop.features().chunks(pop.p()).flat_map(|r| r[..p].to_vec()).collect();
    let names: Vec<String> = (0..p).map(|j| format!("x{j}")).collect();
    let stats = normalize_columns(&mut rows, p, &names)?;
    let out = pop
        .with_features(with_intercept(&rows, p))
        .map_err(|e| DataError::Population(e.to_string()))?;
    Ok((out, stats))
}

/// Canonical CSV: `weight,label,<columns...>`, one row per individual, every
/// value in shortest round-trip decimal form.
pub fn write_population<W: Write>(pop: &Population, columns: &[String], out: W) -> Result<()> {
    if columns.len() != pop.p() {
        return Err(DataError::Spec(format!(
            "{} column names for {} features",
            columns.len(),
            pop.p()
        )));
    }
    let ctx = |source| DataError::Csv {
        context: "population writer".into(),
        source,
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["weight".to_string(), "label".to_string()];
    header.extend(columns.iter().cloned());
    w.write_record(&header).map_err(ctx)?;
    for i in 0..pop.n() {
        let mut rec = vec![pop.weight(i).to_string(), pop.label(i).to_string()];
        rec.extend(pop.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(ctx)?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: PathBuf::from("<population writer>"),
        source,
    })?;
    Ok(())
}

/// Reads the canonical CSV back, returning the population and its column
/// names.
pub fn read_population<R: Read>(input: R) -> Result<(Population, Vec<String>)> {
    let path = PathBuf::from("<population>");
    let ctx = |source| DataError::Csv {
        context: "population reader".into(),
        source,
    };
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(ctx)?.clone();
    if headers.len() < 3 || &headers[0] != "weight" || &headers[1] != "label" {
        return Err(DataError::Spec("population CSV must start with weight,label".into()));
    }
    let columns: Vec<String> = headers.iter().skip(2).map(String::from).collect();
    let (mut weights, mut labels, mut features) = (Vec::new(), Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(ctx)?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |k: usize| -> Result<f64> {
            record[k].parse().map_err(|_| DataError::Parse {
                path: path.clone(),
                line,
                column: headers[k].to_string(),
                value: record[k].to_string(),
            })
        };
        weights.push(parse(0)?);
        labels.push(parse(1)?);
        for k in 2..record.len() {
            features.push(parse(k)?);
        }
    }
    let pop = Population::new(features, columns.len(), labels, weights)
        .map_err(|e| DataError::Population(e.to_string()))?;
    Ok((pop, columns))
}

pub fn write_population_file(pop: &Population, columns: &[String], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_population(pop, columns, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(columns: &[&str], normalize: bool) -> DatasetSpec {
        DatasetSpec {
            path: PathBuf::from("inline.csv"),
            label_column: "y".into(),
            feature_columns: columns.iter().map(|s| s.to_string()).collect(),
            strategic_columns: vec![columns[0].to_string()],
            na_policy: NaPolicy::DropRows,
            normalize,
            subsample: None,
            expected_rows: None,
        }
    }

    #[test]
    fn drops_na_rows() {
        let csv = "id,y,a,b\n1,0,1.0,2.0\n2,1,NA,3.0\n3,1,4.0,5.0\n";
        let (pop, meta) = load_from_reader(&spec(&["a", "b"], false), csv.as_bytes()).unwrap();
        assert_eq!(pop.n(), 2);
        assert_eq!(pop.weights(), &[0.5, 0.5]);
        assert_eq!(pop.labels(), &[-1.0, 1.0]);
        assert_eq!(pop.row(1), &[4.0, 5.0, 1.0]);
        assert_eq!((meta.rows_read, meta.rows_dropped_na, meta.intercept_column), (3, 1, 2));
    }

    #[test]
    fn normalized_columns_have_unit_moments() {
        let csv = "y,a\n0,1\n1,2\n0,4\n1,9\n";
        let (pop, meta) = load_from_reader(&spec(&["a"], true), csv.as_bytes()).unwrap();
        let col: Vec<f64> = (0..4).map(|i| pop.row(i)[0]).collect();
        let mean = col.iter().sum::<f64>() / 4.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
        let stats = meta.stats.unwrap();
        assert_eq!(stats[0].mean, 4.0);
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "y,a\n0,1\n";
        let err = load_from_reader(&spec(&["a", "zzz"], false), csv.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("zzz"));
    }

    #[test]
    fn zero_variance_is_named() {
        let csv = "y,a,b\n0,1,3\n1,2,3\n";
        let err = load_from_reader(&spec(&["a", "b"], true), csv.as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::ZeroVariance { ref column } if column == "b"));
    }

    #[test]
    fn all_na_is_an_error() {
        let csv = "y,a\n0,\n1,NA\n";
        assert!(matches!(
            load_from_reader(&spec(&["a"], false), csv.as_bytes()),
            Err(DataError::NoRows { .. })
        ));
    }

    #[test]
    fn bad_label_reports_line() {
        let csv = "y,a\n0,1\n7,2\n";
        let err = load_from_reader(&spec(&["a"], false), csv.as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::BadLabel { line: 3, .. }));
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(&["a"], false);
        s.strategic_columns = vec!["b".into()];
        assert!(s.validate().is_err());
        let mut s = spec(&["a", "y"], false);
        s.strategic_columns.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn oversized_subsample_is_rejected() {
        assert!(subsample_indices(5, Subsample { count: 6, seed: 1 }).is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(100, 3, 7, 0.5).unwrap();
        let b = generate_synthetic(100, 3, 7, 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.p(), 4);
        assert!((0..a.n()).all(|i| a.row(i)[3] == 1.0));
        assert!(generate_synthetic(1, 3, 7, 0.5).is_err());
        assert!(generate_synthetic(10, 0, 7, 0.5).is_err());
    }

    #[test]
    fn synthetic_balance() {
        let pop = generate_synthetic(1000, 3, 7, 0.5).unwrap();
        let pos = pop.labels().iter().filter(|y| **y > 0.0).count() as f64 / 1000.0;
        assert!((0.45..=0.55).contains(&pos), "positive fraction {pos}");
    }
}
