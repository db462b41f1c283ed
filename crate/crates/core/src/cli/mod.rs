//! Scenario runner behind the `stateful-rrm` binary: configuration, single
//! runs and epsilon sweeps, theory reports, and the files they leave behind.
//!
//! Output layout under the output directory:
//!
//! ```text
//! trajectory_eps_<eps>.jsonl   header line, then one record per round
//! trajectory_eps_<eps>.csv     the same records, flat, with `#` header lines
//! summary.json                 per-epsilon status, iterations, final delta
//! verify.json                  theory report (`verify` only)
//! ```

pub mod config;
mod output;
mod verify;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{self, DataError, SyntheticSpec};
use crate::distribution::{Distribution, Population};
use crate::engine::{self, Trajectory};
use crate::losses::{Classifier, LossModel};
use crate::transitions::{GeometricDecay, KGroups, ScalarLinear, StrategicResponse, TransitionMap};

pub use config::{DatasetSection, Epsilon, Format, Scenario, ScenarioConfig, SCHEMA_VERSION};
pub use output::{RunSummary, SweepSummary};
pub use verify::{verify_theory, Property, TheoryReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(#[from] DataError),

    #[error("engine error: {0}")]
    Engine(String),

    #[error("output error: {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Data(_) => 2,
            CliError::Engine(_) => 3,
        }
    }
}

/// Where the population came from and how it compares to the reference.
#[derive(Debug, Clone, Serialize)]
pub struct DatasetInfo {
    pub source: String,
    pub rows: usize,
    pub columns: Vec<String>,
    pub strategic: Vec<String>,
    pub rows_dropped_na: usize,
    pub normalized: bool,
    pub expected_rows: Option<usize>,
    pub matches_expected: Option<bool>,
}

impl DatasetInfo {
    /// One line for the terminal, e.g. `dataset rows: 18357 (reference 18357: match)`.
    pub fn row_report(&self) -> String {
        match (self.expected_rows, self.matches_expected) {
            (Some(e), Some(true)) => format!("dataset rows: {} (reference {e}: match)", self.rows),
            (Some(e), _) => format!("dataset rows: {} (reference {e}: MISMATCH)", self.rows),
            _ => format!("dataset rows: {}", self.rows),
        }
    }
}

/// Everything a sweep shares across epsilon values.
pub struct Prepared {
    pub cfg: ScenarioConfig,
    pub population: Option<Population>,
    pub strategic: Vec<usize>,
    pub intercept: Option<usize>,
    pub dataset: Option<DatasetInfo>,
}

/// One game, ready to play.
pub struct Game {
    pub d0: Distribution,
    pub map: Box<dyn TransitionMap>,
    pub loss: LossModel,
    pub initial: Classifier,
}

fn engine_err(e: impl std::fmt::Display) -> CliError {
    CliError::Engine(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Loads or generates the population for a resolved config.
pub fn prepare(cfg: ScenarioConfig) -> Result<Prepared, CliError> {
    let Some(section) = cfg.dataset.clone() else {
        return Ok(Prepared {
            cfg,
            population: None,
            strategic: Vec::new(),
            intercept: None,
            dataset: None,
        });
    };
    let (population, strategic, intercept, info) = match section {
        DatasetSection::Csv(csv) => {
            let (pop, meta) = data::load_dataset(&csv.to_spec())?;
            let info = DatasetInfo {
                source: csv.path.display().to_string(),
                rows: meta.rows,
                strategic: meta.strategic.iter().map(|&j| meta.columns[j].clone()).collect(),
                columns: meta.columns.clone(),
                rows_dropped_na: meta.rows_dropped_na,
                normalized: meta.stats.is_some(),
                expected_rows: meta.expected_rows,
                matches_expected: meta.matches_expected(),
            };
            (pop, meta.strategic, meta.intercept_column, info)
        }
        DatasetSection::Synthetic(s) => {
            let spec = SyntheticSpec {
                n: s.n,
                p: s.p,
                seed: cfg.seeds.synthetic,
                class_balance: s.class_balance,
                separation: s.separation,
            };
            let mut pop = data::generate(&spec)?;
            if s.normalize {
                pop = data::normalize_population(&pop)?.0;
            }
            let columns = data::synthetic_columns(s.p);
            let names = s.strategic.clone().unwrap_or_else(|| columns[..s.p].to_vec());
            let mut strategic = Vec::with_capacity(names.len());
            for name in &names {
                match columns[..s.p].iter().position(|c| c == name) {
                    Some(j) => strategic.push(j),
                    None => return Err(config_err(format!("dataset.strategic: unknown column `{name}`"))),
                }
            }
            let info = DatasetInfo {
                source: format!("synthetic(n={}, p={}, seed={})", s.n, s.p, cfg.seeds.synthetic),
                rows: pop.n(),
                columns,
                strategic: names,
                rows_dropped_na: 0,
                normalized: s.normalize,
                expected_rows: None,
                matches_expected: None,
            };
            (pop, strategic, s.p, info)
        }
    };
    Ok(Prepared {
        cfg,
        population: Some(population),
        strategic,
        intercept: Some(intercept),
        dataset: Some(info),
    })
}

impl Prepared {
    pub fn game(&self, eps: f64) -> Result<Game, CliError> {
        let cfg = &self.cfg;
        let Some(pop) = &self.population else {
            let s = &cfg.scalar;
            return Ok(Game {
                d0: Distribution::scalar(s.d0).map_err(config_err)?,
                map: Box::new(ScalarLinear::new(eps).map_err(config_err)?),
                loss: LossModel::scalar_squared(),
                initial: Classifier::half_line(s.theta_min, s.theta_min),
            });
        };
        let response =
            StrategicResponse::new(pop.clone(), self.strategic.clone(), eps, self.intercept).map_err(config_err)?;
        let map: Box<dyn TransitionMap> = match cfg.scenario {
            Scenario::CreditGdr => {
                let delta = cfg.delta.expect("validated");
                Box::new(GeometricDecay::new(response, delta).map_err(config_err)?)
            }
            Scenario::CreditKgroups => {
                let k = cfg.k.expect("validated");
                Box::new(KGroups::new(response, k, cfg.seeds.partition).map_err(config_err)?)
            }
            Scenario::CreditStateless => Box::new(response),
            Scenario::Scalar => unreachable!("scalar scenarios carry no population"),
        };
        let loss = LossModel::regularized_logistic(cfg.lambda, !cfg.penalize_intercept, pop).map_err(config_err)?;
        Ok(Game {
            d0: pop.clone().into(),
            map,
            loss,
            initial: Classifier::unconstrained(vec![0.0; pop.p()]),
        })
    }
}

/// Result of one game: the trajectory (partial when the engine failed).
pub struct RunOutcome {
    pub epsilon: f64,
    pub trajectory: Trajectory,
    pub error: Option<String>,
    pub game: Game,
}

/// Plays every epsilon of the sweep; independent games run in parallel and
/// come back in sweep order.
pub fn play_sweep(prepared: &Prepared) -> Result<Vec<RunOutcome>, CliError> {
    let engine_cfg = prepared.cfg.engine_config();
    prepared
        .cfg
        .epsilon
        .values()
        .into_par_iter()
        .map(|eps| {
            let game = prepared.game(eps)?;
            let (trajectory, error) =
                match engine::rrm_run(&game.d0, game.map.as_ref(), &game.loss, &game.initial, &engine_cfg) {
                    Ok(t) => (t, None),
                    Err(e) => (*e.partial, Some(e.source.to_string())),
                };
            Ok(RunOutcome {
                epsilon: eps,
                trajectory,
                error,
                game,
            })
        })
        .collect()
}

/// `run`: plays the sweep and writes trajectories plus `summary.json`.
/// Engine failures are written out first and then reported as an error.
pub fn run_scenario(cfg: ScenarioConfig) -> Result<SweepSummary, CliError> {
    let out = cfg.out_dir()?.to_path_buf();
    let prepared = prepare(cfg)?;
    let outcomes = play_sweep(&prepared)?;
    create_dir(&out)?;
    let summary = output::write_sweep(&prepared, &outcomes, &out)?;
    if let Some(failed) = summary.runs.iter().find(|r| r.error.is_some()) {
        return Err(engine_err(format!(
            "epsilon {}: {}",
            failed.epsilon,
            failed.error.as_deref().unwrap_or_default()
        )));
    }
    Ok(summary)
}

/// `inspect`: the resolved config with its schema version, as pretty JSON.
pub fn inspect(cfg: &ScenarioConfig) -> String {
    #[derive(Serialize)]
    struct Resolved<'a> {
        schema_version: u32,
        config: &'a ScenarioConfig,
    }
    serde_json::to_string_pretty(&Resolved {
        schema_version: SCHEMA_VERSION,
        config: cfg,
    })
    .expect("config serializes")
}

pub(crate) fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}
