//! The repeated game under repeated risk minimization (RRM), plus
//! fixed-point, stability and optimality diagnostics.
//!
//! Round `t` of the game:
//!
//! ```text
//!   theta_t = G(d_{t-1})            institution retrains on the last state
//!   d_t     = Tr(d_{t-1}, theta_t)  environment responds
//!   loss_t  = E_{Z ~ d_t} l(Z; theta_t)
//! ```
//!
//! Convergence is judged on `||theta_t - theta_{t-1}||`. The W1 and product
//! distances are recorded alongside but never gate termination; the W1 values
//! are identity-coupling upper bounds (see [`crate::distribution`]).

use serde::{Deserialize, Serialize};

use crate::distribution::{self, Distribution, StatePoint};
use crate::error::{Error, Result};
use crate::losses::{self, Classifier, LossModel, MinimizerConfig};
use crate::transitions::TransitionMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OscillationConfig {
    /// Longest period searched; also the length of the inspected tail.
    pub window: usize,
    /// Allowed `||theta_t - theta_{t-period}||` relative to the mean
    /// theta-delta over the tail.
    pub rel_tol: f64,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        Self {
            window: 10,
            rel_tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub max_iters: usize,
    pub conv_tol: f64,
    pub divergence_ceiling: f64,
    pub oscillation: OscillationConfig,
    pub minimizer: MinimizerConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::population()
    }
}

impl EngineConfig {
    /// Defaults for the scalar example.
    pub fn scalar() -> Self {
        Self {
            max_iters: 5000,
            conv_tol: 1e-9,
            divergence_ceiling: 1e9,
            oscillation: OscillationConfig::default(),
            minimizer: MinimizerConfig::default(),
        }
    }

    /// Defaults for population (credit) runs.
    pub fn population() -> Self {
        Self {
            max_iters: 200,
            conv_tol: 1e-5,
            ..Self::scalar()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.minimizer.validate()?;
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::InvalidArgument("conv_tol must be positive".into()));
        }
        if !(self.divergence_ceiling > 0.0) {
            return Err(Error::InvalidArgument("divergence_ceiling must be positive".into()));
        }
        if self.oscillation.window < 2 {
            return Err(Error::InvalidArgument("oscillation window must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalStatus {
    Converged,
    MaxIters,
    Oscillating,
    Diverging,
}

impl TerminalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalStatus::Converged => "converged",
            TerminalStatus::MaxIters => "max_iters",
            TerminalStatus::Oscillating => "oscillating",
            TerminalStatus::Diverging => "diverging",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub theta: Classifier,
    pub dist: Distribution,
    /// `+inf` at `t = 1`.
    pub theta_delta: f64,
    pub w1_delta: f64,
    /// `+inf` at `t = 1`.
    pub product_delta: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub d0: Distribution,
    pub records: Vec<IterationRecord>,
    pub status: TerminalStatus,
    pub oscillation_period: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn thetas(&self) -> Vec<&Classifier> {
        self.records.iter().map(|r| &r.theta).collect()
    }

    /// Theta deltas from `t = 2` on (the first is the `+inf` sentinel).
    pub fn theta_deltas(&self) -> Vec<f64> {
        self.records.iter().skip(1).map(|r| r.theta_delta).collect()
    }
}

/// A failed run with everything recorded before the failure.
#[derive(Debug, thiserror::Error)]
#[error("run failed after {} rounds: {source}", partial.records.len())]
pub struct RunError {
    #[source]
    pub source: Error,
    pub partial: Box<Trajectory>,
}

/// Plays the game from the public state `d0` until convergence, divergence,
/// oscillation or `max_iters`.
///
/// `initial` fixes the classifier's domain and warm-starts the first risk
/// minimization; later rounds warm-start from the previous classifier.
pub fn rrm_run(
    d0: &Distribution,
    map: &dyn TransitionMap,
    loss: &LossModel,
    initial: &Classifier,
    cfg: &EngineConfig,
) -> std::result::Result<Trajectory, RunError> {
    let mut traj = Trajectory {
        d0: d0.clone(),
        records: Vec::new(),
        status: TerminalStatus::MaxIters,
        oscillation_period: None,
    };
    if let Err(e) = cfg.validate() {
        return Err(RunError {
            source: e,
            partial: Box::new(traj),
        });
    }
    let mut d_prev = d0.clone();
    let mut theta_prev = initial.clone();
    for t in 1..=cfg.max_iters {
        let step = (|| -> Result<IterationRecord> {
            let theta = losses::minimize(loss, &d_prev, &cfg.minimizer, &theta_prev)?;
            let dist = map.apply(&d_prev, &theta)?;
            let theta_delta = if t == 1 {
                f64::INFINITY
            } else {
                theta.distance(&theta_prev)?
            };
            let w1_delta = distribution::w1(&dist, &d_prev)?;
            let loss_t = losses::expected_loss(loss, &dist, &theta)?;
            Ok(IterationRecord {
                t,
                theta,
                dist,
                theta_delta,
                w1_delta,
                product_delta: w1_delta + theta_delta,
                loss: loss_t,
            })
        })();
        let record = match step {
            Ok(r) => r,
            Err(e) => {
                return Err(RunError {
                    source: e,
                    partial: Box::new(traj),
                })
            }
        };
        let finite = record.theta.params().iter().all(|v| v.is_finite())
            && record.loss.is_finite()
            && (t == 1 || record.theta_delta.is_finite());
        let delta = record.theta_delta;
        d_prev = record.dist.clone();
        theta_prev = record.theta.clone();
        traj.records.push(record);

        if !finite || (t > 1 && delta > cfg.divergence_ceiling) {
            traj.status = TerminalStatus::Diverging;
            return Ok(traj);
        }
        if t > 1 && delta <= cfg.conv_tol {
            traj.status = TerminalStatus::Converged;
            return Ok(traj);
        }
        let osc = detect_oscillation(&traj, cfg.oscillation.window, cfg.oscillation.rel_tol, cfg.conv_tol);
        if let Some(period) = osc.period {
            traj.status = TerminalStatus::Oscillating;
            traj.oscillation_period = Some(period);
            return Ok(traj);
        }
    }
    traj.status = TerminalStatus::MaxIters;
    Ok(traj)
}

/// The RRM map `f(d, theta) = (Tr(d, theta), G(Tr(d, theta)))`.
pub fn rrm_map_step(
    d: &Distribution,
    theta: &Classifier,
    map: &dyn TransitionMap,
    loss: &LossModel,
    minimizer: &MinimizerConfig,
) -> Result<(Distribution, Classifier)> {
    let next = map.apply(d, theta)?;
    let theta_next = losses::minimize(loss, &next, minimizer, theta)?;
    Ok((next, theta_next))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedPointConfig {
    /// Stop once `W1(d_t, d_{t-1})` is at most this.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointRun {
    pub dist: Distribution,
    pub iters: usize,
    /// `d_0, d_1, ..., d_iters`.
    pub path: Vec<Distribution>,
    /// Set when the map is not known to be a contraction.
    pub warning: Option<String>,
}

/// Replays one classifier until the distribution stops moving.
pub fn fixed_classifier_run(
    theta: &Classifier,
    d0: &Distribution,
    map: &dyn TransitionMap,
    cfg: &FixedPointConfig,
) -> Result<FixedPointRun> {
    let warning = match map.declared_sensitivity() {
        Some(eps) if eps < 1.0 => None,
        Some(eps) => Some(format!("{} has sensitivity {eps} >= 1; no fixed point is guaranteed", map.name())),
        None => Some(format!("{} declares no sensitivity; convergence is not guaranteed", map.name())),
    };
    let mut path = vec![d0.clone()];
    let mut last_step = f64::INFINITY;
    for iter in 1..=cfg.max_iters {
        let prev = path.last().expect("path starts non-empty");
        let next = map.apply(prev, theta)?;
        last_step = distribution::w1(&next, prev)?;
        path.push(next);
        if last_step <= cfg.tol {
            return Ok(FixedPointRun {
                dist: path.last().cloned().expect("just pushed"),
                iters: iter,
                path,
                warning,
            });
        }
    }
    Err(Error::FixedPointNonConvergence {
        iters: cfg.max_iters,
        last_step,
        last: Box::new(path.pop().expect("path starts non-empty")),
    })
}

/// Loss of `theta` on its own fixed-point distribution.
pub fn long_run_loss(
    theta: &Classifier,
    map: &dyn TransitionMap,
    loss: &LossModel,
    d0: &Distribution,
    cfg: &FixedPointConfig,
) -> Result<f64> {
    let run = fixed_classifier_run(theta, d0, map, cfg)?;
    losses::expected_loss(loss, &run.dist, theta)
}

#[derive(Debug, Clone)]
pub struct GridOptimum {
    pub theta: Classifier,
    pub long_run: f64,
    pub evaluated: usize,
    pub failed: usize,
}

/// Grid point with the smallest long-run loss (first one on ties). This is a
/// grid approximation of the performative optimum, nothing more.
pub fn find_performative_optimum_grid(
    map: &dyn TransitionMap,
    loss: &LossModel,
    grid: &[Classifier],
    d0: &Distribution,
    cfg: &FixedPointConfig,
) -> Result<GridOptimum> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty classifier grid".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    let mut failed = 0;
    for (i, theta) in grid.iter().enumerate() {
        match long_run_loss(theta, map, loss, d0, cfg) {
            Ok(v) if v.is_finite() => {
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
            _ => failed += 1,
        }
    }
    let (i, long_run) = best.ok_or(Error::EmptyGrid)?;
    Ok(GridOptimum {
        theta: grid[i].clone(),
        long_run,
        evaluated: grid.len(),
        failed,
    })
}

/// Evenly spaced scalar classifiers `start, start + step, ..., <= stop` on
/// `[lower, inf)`.
pub fn scalar_grid(start: f64, stop: f64, step: f64, lower: f64) -> Vec<Classifier> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| Classifier::half_line(start + step * k as f64, lower))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableTolerances {
    pub fixed_point: f64,
    pub optimality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StablePointReport {
    /// `W1(Tr(d, theta), d)`.
    pub fixed_point_residual: f64,
    /// `||G(d) - theta||`.
    pub optimality_residual: f64,
    pub is_stable: bool,
}

pub fn check_stable_point(
    d: &Distribution,
    theta: &Classifier,
    map: &dyn TransitionMap,
    loss: &LossModel,
    minimizer: &MinimizerConfig,
    tols: &StableTolerances,
) -> Result<StablePointReport> {
    let moved = map.apply(d, theta)?;
    let fixed_point_residual = distribution::w1(&moved, d)?;
    let best = losses::minimize(loss, d, minimizer, theta)?;
    let optimality_residual = best.distance(theta)?;
    Ok(StablePointReport {
        fixed_point_residual,
        optimality_residual,
        is_stable: fixed_point_residual <= tols.fixed_point && optimality_residual <= tols.optimality,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OscillationCheck {
    pub period: Option<usize>,
    /// The trajectory was shorter than twice the window.
    pub too_short: bool,
}

/// Smallest period `2..=window` with which the classifier sequence repeats
/// over the last `window` rounds, up to `rel_tol` times the mean theta-delta
/// over those rounds. Runs whose last theta-delta is at most `conv_tol` are
/// never reported as oscillating.
pub fn detect_oscillation(traj: &Trajectory, window: usize, rel_tol: f64, conv_tol: f64) -> OscillationCheck {
    let recs = &traj.records;
    let len = recs.len();
    if window < 2 || len < 2 * window {
        return OscillationCheck {
            period: None,
            too_short: true,
        };
    }
    let none = OscillationCheck {
        period: None,
        too_short: false,
    };
    let last = recs[len - 1].theta_delta;
    if !last.is_finite() || last <= conv_tol {
        return none;
    }
    let tail = &recs[len - window..];
    let scale = tail.iter().map(|r| r.theta_delta).sum::<f64>() / window as f64;
    if !scale.is_finite() || scale <= 0.0 {
        return none;
    }
    let period = (2..=window).find(|&pi| {
        (len - window..len).all(|t| {
            let gap = losses::euclid(recs[t].theta.params(), recs[t - pi].theta.params());
            gap <= rel_tol * scale
        })
    });
    OscillationCheck {
        period,
        too_short: false,
    }
}

/// One-step contraction coefficient `eps * (1 + beta / gamma)` obtained by
/// chaining the sensitivity of `Tr` with the Lipschitz constant `eps * beta /
/// gamma` of `d -> G(d)`.
pub fn contraction_coefficient(eps: f64, beta: f64, gamma: f64) -> f64 {
    eps * (1.0 + beta / gamma)
}

/// The coefficient `(eps / (1 - eps)) * (beta / gamma)` as stated for the
/// one-step bound. Informational only.
pub fn stated_coefficient(eps: f64, beta: f64, gamma: f64) -> f64 {
    eps / (1.0 - eps) * beta / gamma
}

/// `eps / (1 - eps) < gamma / beta`.
pub fn convergence_condition(eps: f64, beta: f64, gamma: f64) -> bool {
    eps < 1.0 && eps / (1.0 - eps) < gamma / beta
}

/// Upper bound `2 L_z eps / (gamma (1 - eps))` on the distance between a
/// stable and an optimal classifier.
pub fn optimality_gap_bound(l_z: f64, eps: f64, gamma: f64) -> f64 {
    2.0 * l_z * eps / (gamma * (1.0 - eps))
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub coefficient: f64,
    pub pairs: usize,
    pub max_ratio: f64,
    /// Largest `dist(f(s), f(s')) - c * dist(s, s')`.
    pub worst_excess: f64,
    pub violations: usize,
}

/// Applies the RRM map to both states of every pair and compares
/// `dist(f(s), f(s'))` with `coefficient * dist(s, s')`.
pub fn contraction_check(
    pairs: &[(StatePoint, StatePoint)],
    map: &dyn TransitionMap,
    loss: &LossModel,
    minimizer: &MinimizerConfig,
    coefficient: f64,
    slack: f64,
) -> Result<ContractionReport> {
    let mut max_ratio = 0.0f64;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    for (s, t) in pairs {
        let before = distribution::product_dist(s, t)?;
        let (ds, ts) = rrm_map_step(&s.dist, &s.theta, map, loss, minimizer)?;
        let (dt, tt) = rrm_map_step(&t.dist, &t.theta, map, loss, minimizer)?;
        let after = distribution::product_dist(&StatePoint::new(ds, ts), &StatePoint::new(dt, tt))?;
        let excess = after - coefficient * before;
        worst_excess = worst_excess.max(excess);
        if excess > slack {
            violations += 1;
        }
        if before > 0.0 {
            max_ratio = max_ratio.max(after / before);
        }
    }
    Ok(ContractionReport {
        coefficient,
        pairs: pairs.len(),
        max_ratio,
        worst_excess,
        violations,
    })
}
