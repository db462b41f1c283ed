//! Scenario configuration: TOML in, fully resolved config out.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, DatasetSpec, NaPolicy, Subsample, CREDIT_REFERENCE_ROWS};
use crate::engine::{EngineConfig, OscillationConfig};
use crate::losses::MinimizerConfig;

use super::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Scalar,
    CreditGdr,
    CreditKgroups,
    CreditStateless,
}

impl Scenario {
    pub fn is_credit(self) -> bool {
        !matches!(self, Scenario::Scalar)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Scalar => "scalar",
            Scenario::CreditGdr => "credit_gdr",
            Scenario::CreditKgroups => "credit_kgroups",
            Scenario::CreditStateless => "credit_stateless",
        }
    }
}

/// A single sensitivity or a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    One(f64),
    Sweep(Vec<f64>),
}

impl Epsilon {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Epsilon::One(e) => vec![*e],
            Epsilon::Sweep(v) => v.clone(),
        }
    }
}

/// Starting point and optimum search grid of the scalar scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalarSection {
    /// Location of the initial point mass.
    pub d0: f64,
    /// Initial classifier; also the lower end of `Theta = [theta_min, inf)`.
    pub theta_min: f64,
    pub grid_step: f64,
    /// Upper end of the optimum grid. Resolved per run when absent.
    pub grid_max: Option<f64>,
}

impl Default for ScalarSection {
    fn default() -> Self {
        Self {
            d0: 1.0,
            theta_min: 1.0,
            grid_step: 1e-2,
            grid_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub n: usize,
    pub p: usize,
    #[serde(default = "half")]
    pub class_balance: f64,
    #[serde(default = "separation")]
    pub separation: f64,
    #[serde(default = "yes")]
    pub normalize: bool,
    /// Strategic column names (`x0`, `x1`, ...). All features when absent.
    #[serde(default)]
    pub strategic: Option<Vec<String>>,
}

/// CSV datasets default to the GiveMeSomeCredit schema; the strategic set
/// has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSection {
    pub path: PathBuf,
    #[serde(default = "credit_label")]
    pub label_column: String,
    #[serde(default = "credit_features")]
    pub feature_columns: Vec<String>,
    pub strategic_columns: Vec<String>,
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default)]
    pub subsample: Option<Subsample>,
    #[serde(default)]
    pub expected_rows: Option<usize>,
}

impl CsvSection {
    pub fn to_spec(&self) -> DatasetSpec {
        DatasetSpec {
            path: self.path.clone(),
            label_column: self.label_column.clone(),
            feature_columns: self.feature_columns.clone(),
            strategic_columns: self.strategic_columns.clone(),
            na_policy: NaPolicy::DropRows,
            normalize: self.normalize,
            subsample: self.subsample,
            expected_rows: self.expected_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSection {
    Synthetic(SyntheticSection),
    Csv(CsvSection),
}

/// Engine limits; absent values take the scenario's defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub max_iters: Option<usize>,
    pub conv_tol: Option<f64>,
    pub divergence_ceiling: Option<f64>,
    pub oscillation_window: Option<usize>,
    pub oscillation_rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub partition: u64,
    pub synthetic: u64,
    pub probes: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self {
            partition: 7,
            synthetic: 11,
            probes: 13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub probes: usize,
    /// Scalar probes are drawn on `[1, 1 + span]`.
    pub span: f64,
    /// Standard deviation of the perturbations used for population probes.
    pub perturbation: f64,
    pub slack: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            probes: 1000,
            span: 10.0,
            perturbation: 0.1,
            slack: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: None,
            formats: vec![Format::Jsonl, Format::Csv],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub epsilon: Epsilon,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "yes")]
    pub penalize_intercept: bool,
    #[serde(default)]
    pub scalar: ScalarSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSection>,
    #[serde(default)]
    pub engine: EngineSection,
    #[serde(default)]
    pub minimizer: MinimizerConfig,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn separation() -> f64 {
    0.75
}

fn yes() -> bool {
    true
}

fn credit_label() -> String {
    data::CREDIT_LABEL.to_string()
}

fn credit_features() -> Vec<String> {
    data::CREDIT_FEATURES.iter().map(|s| s.to_string()).collect()
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Applies command-line overrides, fills every scenario default and
    /// validates the result.
    pub fn resolve(mut self, epsilon: Option<Vec<f64>>, out: Option<PathBuf>) -> Result<Self, CliError> {
        if let Some(eps) = epsilon {
            self.epsilon = match eps.as_slice() {
                [e] => Epsilon::One(*e),
                _ => Epsilon::Sweep(eps),
            };
        }
        if out.is_some() {
            self.output.directory = out;
        }
        let base = if self.scenario.is_credit() {
            EngineConfig::population()
        } else {
            EngineConfig::scalar()
        };
        let e = &mut self.engine;
        e.max_iters.get_or_insert(base.max_iters);
        e.conv_tol.get_or_insert(base.conv_tol);
        e.divergence_ceiling.get_or_insert(base.divergence_ceiling);
        e.oscillation_window.get_or_insert(base.oscillation.window);
        e.oscillation_rel_tol.get_or_insert(base.oscillation.rel_tol);
        if let Some(DatasetSection::Csv(csv)) = &mut self.dataset {
            if csv.expected_rows.is_none() && csv.feature_columns == credit_features() {
                csv.expected_rows = Some(CREDIT_REFERENCE_ROWS);
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let eps = self.epsilon.values();
        if eps.is_empty() {
            return Err(config_err("epsilon: empty sweep"));
        }
        if let Some(bad) = eps.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(config_err(format!("epsilon: {bad} is not a finite value >= 0")));
        }
        for (i, e) in eps.iter().enumerate() {
            if eps[..i].contains(e) {
                return Err(config_err(format!("epsilon: {e} listed twice")));
            }
        }
        let gdr = self.scenario == Scenario::CreditGdr;
        match (gdr, self.delta) {
            (true, None) => return Err(config_err("delta: required by credit_gdr")),
            (false, Some(_)) => return Err(config_err(format!("delta: not used by {}", self.scenario.as_str()))),
            (true, Some(d)) if !(0.0..=1.0).contains(&d) => {
                return Err(config_err(format!("delta: {d} outside [0, 1]")))
            }
            _ => {}
        }
        let kgroups = self.scenario == Scenario::CreditKgroups;
        match (kgroups, self.k) {
            (true, None) => return Err(config_err("k: required by credit_kgroups")),
            (false, Some(_)) => return Err(config_err(format!("k: not used by {}", self.scenario.as_str()))),
            (true, Some(0)) => return Err(config_err("k: must be at least 1")),
            _ => {}
        }
        if self.scenario.is_credit() {
            if !(self.lambda > 0.0 && self.lambda.is_finite()) {
                return Err(config_err(format!("lambda: {} must be positive", self.lambda)));
            }
            match &self.dataset {
                None => return Err(config_err(format!("dataset: required by {}", self.scenario.as_str()))),
                Some(DatasetSection::Synthetic(s)) if s.n < 2 || s.p < 1 => {
                    return Err(config_err("dataset: synthetic data needs n >= 2 and p >= 1"))
                }
                _ => {}
            }
        } else {
            if self.dataset.is_some() {
                return Err(config_err("dataset: not used by scalar"));
            }
            let s = &self.scalar;
            if !(s.theta_min.is_finite() && s.d0.is_finite() && s.d0 >= s.theta_min) {
                return Err(config_err("scalar: need finite d0 >= theta_min"));
            }
            if !(s.grid_step > 0.0) {
                return Err(config_err("scalar.grid_step: must be positive"));
            }
            if eps.iter().any(|&e| e > 0.0) && s.theta_min < 1.0 {
                return Err(config_err("scalar.theta_min: the linear transition needs theta_min >= 1"));
            }
        }
        self.engine_config()
            .validate()
            .map_err(|e| config_err(format!("engine: {e}")))?;
        if self.output.formats.is_empty() {
            return Err(config_err("output.formats: empty"));
        }
        if !(self.verify.span > 0.0 && self.verify.perturbation > 0.0 && self.verify.slack >= 0.0) {
            return Err(config_err("verify: span and perturbation must be positive, slack >= 0"));
        }
        Ok(())
    }

    /// Engine settings; call after [`ScenarioConfig::resolve`].
    pub fn engine_config(&self) -> EngineConfig {
        let base = if self.scenario.is_credit() {
            EngineConfig::population()
        } else {
            EngineConfig::scalar()
        };
        let e = &self.engine;
        EngineConfig {
            max_iters: e.max_iters.unwrap_or(base.max_iters),
            conv_tol: e.conv_tol.unwrap_or(base.conv_tol),
            divergence_ceiling: e.divergence_ceiling.unwrap_or(base.divergence_ceiling),
            oscillation: OscillationConfig {
                window: e.oscillation_window.unwrap_or(base.oscillation.window),
                rel_tol: e.oscillation_rel_tol.unwrap_or(base.oscillation.rel_tol),
            },
            minimizer: self.minimizer,
        }
    }

    /// The config as echoed into output files: everything except the output
    /// directory, so results do not depend on where they were written.
    pub fn echo(&self) -> Self {
        let mut c = self.clone();
        c.output.directory = None;
        c
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.output
            .directory
            .as_deref()
            .ok_or_else(|| config_err("output.directory: not set (use --out)"))
    }
}
