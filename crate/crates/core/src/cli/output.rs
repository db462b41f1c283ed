//! Trajectory and summary files. Everything written here is a pure function
//! of the resolved config and the trajectories, so repeated runs produce
//! byte-identical files.

use std::path::Path;

use serde::Serialize;

use crate::engine::{self, IterationRecord, TerminalStatus};
use crate::losses::{LossKind, LossModel};

use super::config::{Format, ScenarioConfig, SCHEMA_VERSION};
use super::{write_file, CliError, DatasetInfo, Prepared, RunOutcome};

/// How the W1 columns were computed, echoed into every file.
pub const W1_METHOD: &str = "identity-coupling upper bound";

#[derive(Serialize)]
struct Header<'a> {
    kind: &'static str,
    schema_version: u32,
    epsilon: f64,
    w1_method: &'static str,
    config: &'a ScenarioConfig,
}

#[derive(Serialize)]
struct Row<'a> {
    t: usize,
    /// `null` at `t = 1`.
    theta_delta: Option<f64>,
    w1_delta: f64,
    product_delta: Option<f64>,
    loss: f64,
    theta: &'a [f64],
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl<'a> From<&'a IterationRecord> for Row<'a> {
    fn from(r: &'a IterationRecord) -> Self {
        Row {
            t: r.t,
            theta_delta: finite(r.theta_delta),
            w1_delta: r.w1_delta,
            product_delta: finite(r.product_delta),
            loss: r.loss,
            theta: r.theta.params(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub epsilon: f64,
    pub status: TerminalStatus,
    pub iterations: usize,
    pub final_theta_delta: Option<f64>,
    pub oscillation_period: Option<usize>,
    pub final_theta: Vec<f64>,
    pub final_loss: Option<f64>,
    /// Analytic sensitivity of the transition map, when it has one.
    pub declared_sensitivity: Option<f64>,
    /// `eps (1 + beta / gamma)` with the declared sensitivity.
    pub contraction_coefficient: Option<f64>,
    pub convergence_condition: Option<bool>,
    pub files: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LossSummary {
    pub kind: String,
    pub gamma: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub w1_method: &'static str,
    pub dataset: Option<DatasetInfo>,
    pub loss: Option<LossSummary>,
    pub runs: Vec<RunSummary>,
    pub config: ScenarioConfig,
}

pub fn file_stem(eps: f64) -> String {
    format!("trajectory_eps_{eps}")
}

fn loss_summary(m: &LossModel) -> LossSummary {
    LossSummary {
        kind: match m.kind {
            LossKind::ScalarSquared => "scalar_squared".into(),
            LossKind::RegularizedLogistic { .. } => "regularized_logistic".into(),
        },
        gamma: m.gamma,
        beta: m.beta,
    }
}

fn jsonl(cfg: &ScenarioConfig, o: &RunOutcome) -> String {
    let header = Header {
        kind: "header",
        schema_version: SCHEMA_VERSION,
        epsilon: o.epsilon,
        w1_method: W1_METHOD,
        config: cfg,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for r in &o.trajectory.records {
        out.push_str(&serde_json::to_string(&Row::from(r)).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv(cfg: &ScenarioConfig, o: &RunOutcome) -> Result<Vec<u8>, CliError> {
    let mut buf = format!(
        "# schema_version={SCHEMA_VERSION}\n# epsilon={}\n# w1_method={W1_METHOD}\n# config={}\n",
        o.epsilon,
        serde_json::to_string(cfg).expect("config serializes")
    )
    .into_bytes();
    let dim = o.trajectory.records.first().map_or(0, |r| r.theta.dim());
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut head: Vec<String> = ["t", "theta_delta", "w1_delta", "product_delta", "loss"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        head.extend((0..dim).map(|j| format!("theta_{j}")));
        let to_err = |e: csv::Error| CliError::Engine(format!("csv serialization: {e}"));
        w.write_record(&head).map_err(to_err)?;
        for r in &o.trajectory.records {
            let mut row = vec![
                r.t.to_string(),
                cell(finite(r.theta_delta)),
                r.w1_delta.to_string(),
                cell(finite(r.product_delta)),
                r.loss.to_string(),
            ];
            row.extend(r.theta.params().iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(to_err)?;
        }
        w.flush().map_err(|source| CliError::Output {
            path: file_stem(o.epsilon).into(),
            source,
        })?;
    }
    Ok(buf)
}

fn summarize(o: &RunOutcome, files: Vec<String>) -> RunSummary {
    let traj = &o.trajectory;
    let last = traj.last();
    let declared = o.game.map.declared_sensitivity();
    let (beta, gamma) = (o.game.loss.beta, o.game.loss.gamma);
    RunSummary {
        epsilon: o.epsilon,
        status: traj.status,
        iterations: traj.len(),
        final_theta_delta: last.and_then(|r| finite(r.theta_delta)),
        oscillation_period: traj.oscillation_period,
        final_theta: last.map(|r| r.theta.params().to_vec()).unwrap_or_default(),
        final_loss: last.map(|r| r.loss),
        declared_sensitivity: declared,
        contraction_coefficient: declared.map(|s| engine::contraction_coefficient(s, beta, gamma)),
        convergence_condition: declared.map(|s| engine::convergence_condition(s, beta, gamma)),
        files,
        error: o.error.clone(),
    }
}

/// Writes the per-epsilon files and `summary.json`.
pub fn write_sweep(prepared: &Prepared, outcomes: &[RunOutcome], dir: &Path) -> Result<SweepSummary, CliError> {
    let cfg = &prepared.cfg.echo();
    let mut runs = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let stem = file_stem(o.epsilon);
        let mut files = Vec::new();
        for format in &cfg.output.formats {
            let (name, bytes) = match format {
                Format::Jsonl => (format!("{stem}.jsonl"), jsonl(cfg, o).into_bytes()),
                Format::Csv => (format!("{stem}.csv"), csv(cfg, o)?),
            };
            write_file(&dir.join(&name), &bytes)?;
            files.push(name);
        }
        runs.push(summarize(o, files));
    }
    let summary = SweepSummary {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.scenario.as_str().to_string(),
        w1_method: W1_METHOD,
        dataset: prepared.dataset.clone(),
        loss: outcomes.first().map(|o| loss_summary(&o.game.loss)),
        runs,
        config: cfg.clone(),
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write_file(&dir.join("summary.json"), text.as_bytes())?;
    Ok(summary)
}
