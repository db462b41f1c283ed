//! The `verify` report: contraction, threshold, fixed-point rate, stable
//! and optimal points, and sensitivity, each with measured and bound values.
//!
//! Scalar scenarios have closed forms for everything, so every property gets
//! a verdict. Credit scenarios have no closed forms; their entries are
//! measurements, marked informational (`pass: null`) unless an analytic
//! bound exists.

use std::path::Path;

use serde::Serialize;

use crate::distribution::{Distribution, StatePoint};
use crate::engine::{self, FixedPointConfig, StableTolerances, TerminalStatus};
use crate::losses::{self, Classifier};
use crate::transitions::{self, TransitionMap};

use super::config::{ScenarioConfig, SCHEMA_VERSION};
use super::{create_dir, play_sweep, prepare, write_file, CliError, RunOutcome};

/// Probe pairs for population scenarios; each costs four risk minimizations.
const POPULATION_PROBES: usize = 16;

/// Rounds checked against the fixed-classifier rate.
const RATE_ROUNDS: usize = 30;

#[derive(Debug, Clone, Serialize)]
pub struct Property {
    pub name: &'static str,
    /// `None` for informational entries.
    pub pass: Option<bool>,
    pub measured: Option<f64>,
    pub bound: Option<f64>,
    pub note: String,
}

impl Property {
    fn check(name: &'static str, pass: bool, measured: f64, bound: f64, note: impl Into<String>) -> Self {
        Self {
            name,
            pass: Some(pass),
            measured: Some(measured),
            bound: Some(bound),
            note: note.into(),
        }
    }

    fn info(name: &'static str, measured: Option<f64>, bound: Option<f64>, note: impl Into<String>) -> Self {
        Self {
            name,
            pass: None,
            measured,
            bound,
            note: note.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub status: TerminalStatus,
    pub iterations: usize,
    pub properties: Vec<Property>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub schema_version: u32,
    pub scenario: String,
    pub all_pass: bool,
    pub runs: Vec<EpsilonReport>,
    pub config: ScenarioConfig,
}

/// Runs the property checks for every epsilon and writes `verify.json`.
/// Failed properties are recorded in the report, not returned as errors.
pub fn verify_theory(cfg: ScenarioConfig) -> Result<TheoryReport, CliError> {
    let out = cfg.out_dir()?.to_path_buf();
    let prepared = prepare(cfg)?;
    let outcomes = play_sweep(&prepared)?;
    let cfg = &prepared.cfg;
    let runs: Vec<EpsilonReport> = outcomes
        .iter()
        .map(|o| EpsilonReport {
            epsilon: o.epsilon,
            status: o.trajectory.status,
            iterations: o.trajectory.len(),
            properties: if prepared.population.is_none() {
                scalar_properties(cfg, o)
            } else {
                population_properties(cfg, o)
            },
        })
        .collect();
    let all_pass = runs
        .iter()
        .flat_map(|r| &r.properties)
        .all(|p| p.pass != Some(false));
    let report = TheoryReport {
        schema_version: SCHEMA_VERSION,
        scenario: cfg.scenario.as_str().to_string(),
        all_pass,
        runs,
        config: cfg.echo(),
    };
    create_dir(&out)?;
    write_report(&report, &out.join("verify.json"))?;
    Ok(report)
}

fn write_report(report: &TheoryReport, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn failure(name: &'static str, err: impl std::fmt::Display) -> Property {
    Property {
        name,
        pass: Some(false),
        measured: None,
        bound: None,
        note: err.to_string(),
    }
}

fn scalar_value(d: &Distribution) -> f64 {
    match d {
        Distribution::Scalar(p) => p.value,
        _ => f64::NAN,
    }
}

fn scalar_properties(cfg: &ScenarioConfig, o: &RunOutcome) -> Vec<Property> {
    let eps = o.epsilon;
    let game = &o.game;
    let map = game.map.as_ref();
    let (beta, gamma) = (game.loss.beta, game.loss.gamma);
    let c = engine::contraction_coefficient(eps, beta, gamma);
    let v = &cfg.verify;
    let mut props = Vec::new();

    let probes = match transitions::scalar_probes(v.probes, v.span, cfg.seeds.probes) {
        Ok(p) => p,
        Err(e) => return vec![failure("probes", e)],
    };
    match engine::contraction_check(&probes, map, &game.loss, &cfg.minimizer, c, v.slack) {
        Ok(r) => {
            props.push(Property::check(
                "contraction",
                r.violations == 0,
                r.max_ratio,
                c,
                format!(
                    "{} pairs, {} violations, worst excess {:e}",
                    r.pairs, r.violations, r.worst_excess
                ),
            ));
            let saturated = c == 0.0 || r.max_ratio >= 0.999 * c;
            props.push(Property::check(
                "contraction_saturation",
                saturated,
                r.max_ratio,
                0.999 * c,
                "largest observed ratio against the coefficient",
            ));
        }
        Err(e) => props.push(failure("contraction", e)),
    }

    props.push(Property::info(
        "stated_coefficient",
        Some(engine::stated_coefficient(eps, beta, gamma)),
        Some(c),
        "eps/(1-eps) * beta/gamma as stated for the one-step bound; informational",
    ));

    let condition = engine::convergence_condition(eps, beta, gamma);
    let converged = o.trajectory.status == TerminalStatus::Converged;
    props.push(Property::check(
        "threshold",
        condition == converged,
        c,
        1.0,
        format!(
            "condition eps/(1-eps) < gamma/beta is {condition}; run ended {}",
            o.trajectory.status.as_str()
        ),
    ));

    props.push(rate_property(map, cfg, eps));

    if converged {
        props.extend(optimum_properties(cfg, o));
    } else {
        props.push(Property::info(
            "optimality_gap",
            None,
            None,
            "no stable point reached; gap not evaluated",
        ));
    }

    match transitions::estimate_joint_sensitivity(map, &probes) {
        Ok(s) => props.push(Property::check(
            "sensitivity",
            s.epsilon_hat <= eps + 1e-12,
            s.epsilon_hat,
            eps,
            format!("{} pairs used, {} skipped", s.used, s.skipped),
        )),
        Err(e) => props.push(failure("sensitivity", e)),
    }
    props
}

/// `|d_t - d_theta| = eps^t |d_0 - d_theta|` for a fixed classifier.
fn rate_property(map: &dyn TransitionMap, cfg: &ScenarioConfig, eps: f64) -> Property {
    if eps >= 1.0 {
        return Property::info("fixed_point_rate", None, None, "eps >= 1: no fixed point to approach");
    }
    let theta_value = cfg.scalar.theta_min + 1.0;
    let theta = Classifier::half_line(theta_value, cfg.scalar.theta_min);
    let target = (1.0 + eps * theta_value) / (1.0 - eps);
    let mut d = match Distribution::scalar(cfg.scalar.d0) {
        Ok(d) => d,
        Err(e) => return failure("fixed_point_rate", e),
    };
    let gap0 = (cfg.scalar.d0 - target).abs();
    let mut worst = 0.0f64;
    for t in 1..=RATE_ROUNDS {
        d = match map.apply(&d, &theta) {
            Ok(d) => d,
            Err(e) => return failure("fixed_point_rate", e),
        };
        let gap = (scalar_value(&d) - target).abs();
        let expected = eps.powi(t as i32) * gap0;
        let err = if gap0 > 0.0 { (gap - expected).abs() / gap0 } else { gap };
        worst = worst.max(err);
    }
    Property::check(
        "fixed_point_rate",
        worst <= 1e-9,
        worst,
        1e-9,
        format!("theta = {theta_value}, {RATE_ROUNDS} rounds, error relative to the initial gap"),
    )
}

fn optimum_properties(cfg: &ScenarioConfig, o: &RunOutcome) -> Vec<Property> {
    let eps = o.epsilon;
    let game = &o.game;
    let last = o.trajectory.last().expect("converged runs have records");
    let theta_ps = last.theta.params()[0];
    let mut props = Vec::new();

    let tols = StableTolerances {
        fixed_point: 1e-6,
        optimality: 1e-6,
    };
    match engine::check_stable_point(&last.dist, &last.theta, game.map.as_ref(), &game.loss, &cfg.minimizer, &tols) {
        Ok(r) => props.push(Property::check(
            "stable_point",
            r.is_stable,
            r.fixed_point_residual.max(r.optimality_residual),
            1e-6,
            format!(
                "fixed-point residual {:e}, optimality residual {:e}",
                r.fixed_point_residual, r.optimality_residual
            ),
        )),
        Err(e) => props.push(failure("stable_point", e)),
    }

    let s = &cfg.scalar;
    let grid_max = s.grid_max.unwrap_or_else(|| (2.0 * theta_ps).max(s.theta_min + 10.0));
    let grid = engine::scalar_grid(s.theta_min, grid_max, s.grid_step, s.theta_min);
    let fp = FixedPointConfig::default();
    let d0 = o.trajectory.d0.clone();
    match engine::find_performative_optimum_grid(game.map.as_ref(), &game.loss, &grid, &d0, &fp) {
        Ok(best) => {
            let gap = (best.theta.params()[0] - theta_ps).abs();
            // The loss is (y - theta)^2 with y and theta confined to the region
            // visited by the grid and its fixed points, so |dl/dy| <= 2 (hi - lo).
            let hi = grid_max.max((1.0 + eps * grid_max) / (1.0 - eps));
            let l_z = 2.0 * (hi - s.theta_min);
            let bound = engine::optimality_gap_bound(l_z, eps, game.loss.gamma);
            props.push(Property::check(
                "optimality_gap",
                gap <= bound,
                gap,
                bound,
                format!(
                    "grid [{}, {grid_max}] step {}; L_z = {l_z} on [{}, {hi}]",
                    s.theta_min, s.grid_step, s.theta_min
                ),
            ));
        }
        Err(e) => props.push(failure("optimality_gap", e)),
    }
    props
}

fn population_properties(cfg: &ScenarioConfig, o: &RunOutcome) -> Vec<Property> {
    let game = &o.game;
    let map = game.map.as_ref();
    let mut props = Vec::new();
    let Some(last) = o.trajectory.last() else {
        return vec![failure("trajectory", o.error.as_deref().unwrap_or("no rounds recorded"))];
    };
    let declared = map.declared_sensitivity();
    let (beta, gamma) = (game.loss.beta, game.loss.gamma);
    let coefficient = declared.map(|s| engine::contraction_coefficient(s, beta, gamma));
    props.push(Property::info(
        "threshold",
        coefficient,
        Some(1.0),
        format!(
            "run ended {}; declared sensitivity {declared:?}; beta/gamma = {}",
            o.trajectory.status.as_str(),
            beta / gamma
        ),
    ));

    let states = [
        StatePoint::new(game.d0.clone(), last.theta.clone()),
        StatePoint::new(last.dist.clone(), last.theta.clone()),
    ];
    let probes = match transitions::perturbation_probes(
        &states,
        cfg.verify.perturbation,
        POPULATION_PROBES,
        cfg.seeds.probes,
    ) {
        Ok(p) => p,
        Err(e) => return vec![failure("probes", e)],
    };
    match transitions::estimate_joint_sensitivity(map, &probes) {
        Ok(s) => props.push(match declared {
            Some(d) => Property::check(
                "sensitivity",
                s.epsilon_hat <= d + 1e-9,
                s.epsilon_hat,
                d,
                format!("{} perturbation pairs", s.used),
            ),
            None => Property::info(
                "sensitivity",
                Some(s.epsilon_hat),
                None,
                "no analytic sensitivity declared",
            ),
        }),
        Err(e) => props.push(failure("sensitivity", e)),
    }
    match engine::contraction_check(&probes, map, &game.loss, &cfg.minimizer, coefficient.unwrap_or(f64::INFINITY), 0.0) {
        Ok(r) => props.push(Property::info(
            "contraction",
            Some(r.max_ratio),
            coefficient,
            "largest observed one-step ratio of the RRM map; beta is the baseline bound",
        )),
        Err(e) => props.push(failure("contraction", e)),
    }
    let grad = losses::expected_grad(&game.loss, &last.dist, &last.theta)
        .map(|g| losses::euclid(&g, &vec![0.0; g.len()]));
    match grad {
        Ok(g) => props.push(Property::info(
            "final_gradient",
            Some(g),
            None,
            "risk gradient of the last classifier on the state it induced; zero at a stable point",
        )),
        Err(e) => props.push(failure("final_gradient", e)),
    }
    props
}
