//! Loss models, their curvature constants, and the risk minimizer `G(d)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distribution::{Distribution, Population};
use crate::error::{Error, Result};

/// Closed convex parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Unconstrained,
    /// Coordinate-wise bounds.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Every coordinate at least `lower`.
    HalfLine { lower: f64 },
}

impl Domain {
    pub fn project(&self, params: &mut [f64]) {
        match self {
            Domain::Unconstrained => {}
            Domain::Box { lower, upper } => {
                for ((v, lo), hi) in params.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*lo, *hi);
                }
            }
            Domain::HalfLine { lower } => {
                for v in params.iter_mut() {
                    *v = v.max(*lower);
                }
            }
        }
    }

    fn check_dim(&self, p: usize) -> Result<()> {
        match self {
            Domain::Box { lower, upper } if lower.len() != p || upper.len() != p => Err(
                Error::Dimension(format!("box domain of width {} for {p} parameters", lower.len())),
            ),
            Domain::Box { lower, upper } if lower.iter().zip(upper).any(|(l, u)| l > u) => {
                Err(Error::InvalidArgument("box domain with lower > upper".into()))
            }
            _ => Ok(()),
        }
    }
}

/// The institution's action: a parameter vector inside its domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    params: Vec<f64>,
    domain: Domain,
}

impl Classifier {
    /// Projects `params` onto `domain`.
    pub fn new(mut params: Vec<f64>, domain: Domain) -> Result<Self> {
        domain.check_dim(params.len())?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("classifier has non-finite entries".into()));
        }
        domain.project(&mut params);
        Ok(Self { params, domain })
    }

    pub fn unconstrained(params: Vec<f64>) -> Self {
        Self {
            params,
            domain: Domain::Unconstrained,
        }
    }

    /// Scalar classifier on `[lower, inf)`.
    pub fn half_line(value: f64, lower: f64) -> Self {
        Self {
            params: vec![value.max(lower)],
            domain: Domain::HalfLine { lower },
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    /// Same domain, new parameters (projected). Non-finite entries are kept
    /// as-is so that divergence can be observed by the caller.
    pub fn with_params(&self, mut params: Vec<f64>) -> Self {
        self.domain.project(&mut params);
        Self {
            params,
            domain: self.domain.clone(),
        }
    }

    pub fn distance(&self, other: &Classifier) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension(format!(
                "classifiers of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(euclid(&self.params, &other.params))
    }
}

pub(crate) fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// `(y - theta)^2` on a scalar outcome.
    ScalarSquared,
    /// `log(1 + exp(-y <theta, x>)) + (lambda/2) ||theta||^2`. With
    /// `intercept`, the last coordinate is the intercept and is not
    /// penalized.
    RegularizedLogistic { lambda: f64, intercept: bool },
}

/// Lipschitz constant of the loss in `z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzZ {
    Bounded(f64),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    pub kind: LossKind,
    /// Strong convexity constant.
    pub gamma: f64,
    /// Joint smoothness constant.
    pub beta: f64,
    pub l_z: LipschitzZ,
}

/// One instance `z = (x, y)`. The scalar model ignores `x`.
#[derive(Debug, Clone, Copy)]
pub struct Instance<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

impl LossModel {
    pub fn scalar_squared() -> Self {
        Self {
            kind: LossKind::ScalarSquared,
            gamma: 2.0,
            beta: 2.0,
            l_z: LipschitzZ::Unbounded,
        }
    }

    /// `beta` is the analytic bound `lambda + max ||x||^2 / 4` over the rows
    /// of `reference`.
    pub fn regularized_logistic(lambda: f64, intercept: bool, reference: &Population) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive for strong convexity, got {lambda}"
            )));
        }
        let kind = LossKind::RegularizedLogistic { lambda, intercept };
        let beta = logistic_beta(lambda, max_row_norm_sq(reference));
        Ok(Self {
            kind,
            gamma: lambda,
            beta,
            l_z: LipschitzZ::Unbounded,
        })
    }

    pub fn with_l_z(mut self, l_z: f64) -> Self {
        self.l_z = LipschitzZ::Bounded(l_z);
        self
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self.kind, LossKind::ScalarSquared)
    }

    /// Smoothness constant of the expected risk on `d`; the minimizer's step
    /// is its inverse. For the logistic loss the risk Hessian is bounded by
    /// `lambda I + E[x x^T] / 4`, whose top eigenvalue is at most
    /// `lambda + E||x||^2 / 4`.
    pub fn smoothness_on(&self, d: &Distribution) -> Result<f64> {
        match (self.kind, d) {
            (LossKind::ScalarSquared, Distribution::Scalar(_)) => Ok(2.0),
            (LossKind::RegularizedLogistic { lambda, .. }, Distribution::Population(p)) => {
                Ok(logistic_beta(lambda, mean_row_norm_sq(p)))
            }
            (LossKind::RegularizedLogistic { lambda, .. }, Distribution::Mixture(m)) => {
                let second: f64 = m
                    .components()
                    .iter()
                    .map(|c| c.weight * mean_row_norm_sq(&c.population))
                    .sum();
                Ok(logistic_beta(lambda, second))
            }
            _ => Err(incompatible(self, d)),
        }
    }
}

fn logistic_beta(lambda: f64, max_norm_sq: f64) -> f64 {
    lambda + 0.25 * max_norm_sq
}

fn mean_row_norm_sq(p: &Population) -> f64 {
    (0..p.n())
        .map(|i| p.weight(i) * p.row(i).iter().map(|v| v * v).sum::<f64>())
        .sum()
}

fn max_row_norm_sq(p: &Population) -> f64 {
    (0..p.n())
        .filter(|&i| p.weight(i) > 0.0)
        .map(|i| p.row(i).iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
}

fn incompatible(m: &LossModel, d: &Distribution) -> Error {
    Error::Incompatible(format!("loss {:?} cannot be evaluated on a {} distribution", m.kind, d.kind()))
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn penalty_len(theta: &[f64], intercept: bool) -> usize {
    if intercept {
        theta.len().saturating_sub(1)
    } else {
        theta.len()
    }
}

fn check_instance(m: &LossModel, z: Instance<'_>, theta: &Classifier) -> Result<()> {
    match m.kind {
        LossKind::ScalarSquared if theta.dim() != 1 => Err(Error::Dimension(format!(
            "scalar loss needs a 1-dimensional classifier, got {}",
            theta.dim()
        ))),
        LossKind::RegularizedLogistic { .. } if z.x.len() != theta.dim() => Err(Error::Dimension(
            format!("instance has {} features, classifier has {}", z.x.len(), theta.dim()),
        )),
        _ => Ok(()),
    }
}

pub fn loss_value(m: &LossModel, z: Instance<'_>, theta: &Classifier) -> Result<f64> {
    check_instance(m, z, theta)?;
    Ok(loss_unchecked(m, z, theta.params()))
}

fn loss_unchecked(m: &LossModel, z: Instance<'_>, theta: &[f64]) -> f64 {
    match m.kind {
        LossKind::ScalarSquared => {
            let r = z.y - theta[0];
            r * r
        }
        LossKind::RegularizedLogistic { lambda, intercept } => {
            let margin = z.y * dot(theta, z.x);
            let k = penalty_len(theta, intercept);
            let pen: f64 = theta[..k].iter().map(|v| v * v).sum();
            softplus(-margin) + 0.5 * lambda * pen
        }
    }
}

pub fn loss_grad(m: &LossModel, z: Instance<'_>, theta: &Classifier) -> Result<Vec<f64>> {
    check_instance(m, z, theta)?;
    let mut g = vec![0.0; theta.dim()];
    add_grad(m, z, theta.params(), 1.0, &mut g);
    Ok(g)
}

/// `out += scale * grad l(z; theta)`.
fn add_grad(m: &LossModel, z: Instance<'_>, theta: &[f64], scale: f64, out: &mut [f64]) {
    match m.kind {
        LossKind::ScalarSquared => {
            out[0] += scale * (-2.0 * (z.y - theta[0]));
        }
        LossKind::RegularizedLogistic { lambda, intercept } => {
            let s = sigmoid(-z.y * dot(theta, z.x));
            let c = -z.y * s;
            for (o, x) in out.iter_mut().zip(z.x) {
                *o += scale * c * x;
            }
            let k = penalty_len(theta, intercept);
            for (o, t) in out[..k].iter_mut().zip(theta) {
                *o += scale * lambda * t;
            }
        }
    }
}

fn population_loss(m: &LossModel, p: &Population, theta: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..p.n() {
        let w = p.weight(i);
        if w > 0.0 {
            total += w * loss_unchecked(m, Instance { x: p.row(i), y: p.label(i) }, theta);
        }
    }
    total
}

fn population_grad(m: &LossModel, p: &Population, theta: &[f64], out: &mut [f64]) {
    for i in 0..p.n() {
        let w = p.weight(i);
        if w > 0.0 {
            add_grad(m, Instance { x: p.row(i), y: p.label(i) }, theta, w, out);
        }
    }
}

fn check_dist(m: &LossModel, d: &Distribution, theta: &Classifier) -> Result<()> {
    match (m.kind, d) {
        (LossKind::ScalarSquared, Distribution::Scalar(_)) if theta.dim() == 1 => Ok(()),
        (LossKind::ScalarSquared, Distribution::Scalar(_)) => Err(Error::Dimension(format!(
            "scalar loss needs a 1-dimensional classifier, got {}",
            theta.dim()
        ))),
        (LossKind::RegularizedLogistic { .. }, Distribution::Population(_) | Distribution::Mixture(_)) => {
            let p = d.feature_dim().unwrap_or(0);
            if p != theta.dim() {
                return Err(Error::Dimension(format!(
                    "distribution has {p} features, classifier has {}",
                    theta.dim()
                )));
            }
            Ok(())
        }
        _ => Err(incompatible(m, d)),
    }
}

/// `E_{Z ~ d} l(Z; theta)`. Mixtures average their components' averages.
pub fn expected_loss(m: &LossModel, d: &Distribution, theta: &Classifier) -> Result<f64> {
    check_dist(m, d, theta)?;
    Ok(expected_loss_unchecked(m, d, theta.params()))
}

fn expected_loss_unchecked(m: &LossModel, d: &Distribution, theta: &[f64]) -> f64 {
    match d {
        Distribution::Scalar(pm) => loss_unchecked(m, Instance { x: &[], y: pm.value }, theta),
        Distribution::Population(p) => population_loss(m, p, theta),
        Distribution::Mixture(mix) => mix
            .components()
            .iter()
            .map(|c| c.weight * population_loss(m, &c.population, theta))
            .sum(),
    }
}

/// Gradient of [`expected_loss`] in `theta`.
pub fn expected_grad(m: &LossModel, d: &Distribution, theta: &Classifier) -> Result<Vec<f64>> {
    check_dist(m, d, theta)?;
    Ok(expected_grad_unchecked(m, d, theta.params()))
}

fn expected_grad_unchecked(m: &LossModel, d: &Distribution, theta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    match d {
        Distribution::Scalar(pm) => add_grad(m, Instance { x: &[], y: pm.value }, theta, 1.0, &mut g),
        Distribution::Population(p) => population_grad(m, p, theta, &mut g),
        Distribution::Mixture(mix) => {
            let mut part = vec![0.0; theta.len()];
            for c in mix.components() {
                part.iter_mut().for_each(|v| *v = 0.0);
                population_grad(m, &c.population, theta, &mut part);
                for (o, v) in g.iter_mut().zip(&part) {
                    *o += c.weight * v;
                }
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Constant step `1/beta`.
    #[default]
    Fixed,
    /// Armijo backtracking on the projected step, starting from `2/beta`.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizerConfig {
    /// Stop once the projected-gradient norm is at most this.
    pub tolerance: f64,
    pub max_steps: usize,
    pub step_rule: StepRule,
}

impl Default for MinimizerConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_steps: 100_000,
            step_rule: StepRule::Fixed,
        }
    }
}

impl MinimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("minimizer tolerance must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("minimizer max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeStats {
    pub steps: usize,
    pub grad_norm: f64,
}

/// `G(d) = argmin_theta E_{Z ~ d} l(Z; theta)` over the warm start's domain.
///
/// The scalar squared loss is solved in closed form: the argmin is the
/// projection of the mean outcome onto the domain.
pub fn minimize(
    m: &LossModel,
    d: &Distribution,
    cfg: &MinimizerConfig,
    warm_start: &Classifier,
) -> Result<Classifier> {
    minimize_with_stats(m, d, cfg, warm_start).map(|(c, _)| c)
}

pub fn minimize_with_stats(
    m: &LossModel,
    d: &Distribution,
    cfg: &MinimizerConfig,
    warm_start: &Classifier,
) -> Result<(Classifier, MinimizeStats)> {
    check_dist(m, d, warm_start)?;
    if let (LossKind::ScalarSquared, Distribution::Scalar(pm)) = (m.kind, d) {
        let theta = warm_start.with_params(vec![pm.value]);
        let g = projected_grad_norm(m, d, theta.params(), theta.domain(), 0.5);
        return Ok((theta, MinimizeStats { steps: 0, grad_norm: g }));
    }
    minimize_iterative(m, d, cfg, warm_start)
}

/// Projected gradient descent; also used to cross-check the scalar closed
/// form.
pub fn minimize_iterative(
    m: &LossModel,
    d: &Distribution,
    cfg: &MinimizerConfig,
    warm_start: &Classifier,
) -> Result<(Classifier, MinimizeStats)> {
    cfg.validate()?;
    check_dist(m, d, warm_start)?;
    let beta = m.smoothness_on(d)?;
    let domain = warm_start.domain().clone();
    let mut theta = warm_start.params().to_vec();
    domain.project(&mut theta);
    let step = 1.0 / beta;

    let mut grad = expected_grad_unchecked(m, d, &theta);
    let mut gnorm = mapping_norm(&theta, &grad, &domain, step);
    let mut steps = 0;
    while gnorm > cfg.tolerance {
        if steps == cfg.max_steps {
            return Err(Error::MinimizerNonConvergence {
                steps,
                grad_norm: gnorm,
                last: Box::new(warm_start.with_params(theta)),
            });
        }
        theta = match cfg.step_rule {
            StepRule::Fixed => projected_step(&theta, &grad, &domain, step),
            StepRule::Backtracking => backtrack(m, d, &theta, &grad, &domain, 2.0 * step),
        };
        grad = expected_grad_unchecked(m, d, &theta);
        gnorm = mapping_norm(&theta, &grad, &domain, step);
        steps += 1;
    }
    Ok((
        warm_start.with_params(theta),
        MinimizeStats {
            steps,
            grad_norm: gnorm,
        },
    ))
}

fn projected_step(theta: &[f64], grad: &[f64], domain: &Domain, step: f64) -> Vec<f64> {
    let mut next: Vec<f64> = theta.iter().zip(grad).map(|(t, g)| t - step * g).collect();
    domain.project(&mut next);
    next
}

/// Norm of the gradient mapping `(theta - P(theta - step * grad)) / step`;
/// equals the gradient norm in the interior.
fn mapping_norm(theta: &[f64], grad: &[f64], domain: &Domain, step: f64) -> f64 {
    let next = projected_step(theta, grad, domain, step);
    euclid(theta, &next) / step
}

fn projected_grad_norm(m: &LossModel, d: &Distribution, theta: &[f64], domain: &Domain, step: f64) -> f64 {
    let g = expected_grad_unchecked(m, d, theta);
    mapping_norm(theta, &g, domain, step)
}

fn backtrack(
    m: &LossModel,
    d: &Distribution,
    theta: &[f64],
    grad: &[f64],
    domain: &Domain,
    initial: f64,
) -> Vec<f64> {
    let f0 = expected_loss_unchecked(m, d, theta);
    let mut step = initial;
    loop {
        let next = projected_step(theta, grad, domain, step);
        let diff: Vec<f64> = next.iter().zip(theta).map(|(a, b)| a - b).collect();
        let model = f0 + dot(grad, &diff) + dot(&diff, &diff) / (2.0 * step);
        if expected_loss_unchecked(m, d, &next) <= model || step < 1e-12 {
            return next;
        }
        step *= 0.5;
    }
}

/// Axis-aligned region used for probing constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Dimension("box bounds of different length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box with lower > upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Smallest box containing every positive-mass feature row of `d`. For
    /// scalar point masses, the box over outcomes.
    pub fn of_support(dists: &[&Distribution]) -> Result<Self> {
        let mut lower: Vec<f64> = Vec::new();
        let mut upper: Vec<f64> = Vec::new();
        let mut absorb = |row: &[f64]| {
            if lower.is_empty() {
                lower = row.to_vec();
                upper = row.to_vec();
            } else {
                for (k, v) in row.iter().enumerate() {
                    lower[k] = lower[k].min(*v);
                    upper[k] = upper[k].max(*v);
                }
            }
        };
        for d in dists {
            match d {
                Distribution::Scalar(pm) => absorb(&[pm.value]),
                Distribution::Population(p) => {
                    (0..p.n()).filter(|&i| p.weight(i) > 0.0).for_each(|i| absorb(p.row(i)))
                }
                Distribution::Mixture(mix) => {
                    for c in mix.components() {
                        let p = &c.population;
                        (0..p.n()).filter(|&i| p.weight(i) > 0.0).for_each(|i| absorb(p.row(i)));
                    }
                }
            }
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("no support to bound".into()));
        }
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if l == u { *l } else { rng.random_range(*l..=*u) })
            .collect()
    }

    fn max_norm_sq(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (l * l).max(u * u))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsEstimate {
    pub gamma: f64,
    /// Analytic smoothness bound over `z_box`.
    pub beta: f64,
    /// Largest probed `||grad(z; t) - grad(z; t')|| / ||t - t'||`.
    pub beta_theta_probe: f64,
    /// Largest probed `||grad(z; t) - grad(z'; t)|| / ||z - z'||`.
    pub beta_z_probe: f64,
    /// Largest probed `|l(z; t) - l(z'; t)| / ||z - z'||`.
    pub l_z: f64,
    pub z_box: BoundingBox,
    pub theta_box: BoundingBox,
    pub probes: usize,
}

/// Probes the curvature and Lipschitz constants of `m` over a region.
///
/// `z_box` bounds the feature vector (logistic) or the outcome (scalar);
/// logistic labels are drawn from `{-1, +1}`. Instance pairs either share
/// their label or share their features.
pub fn estimate_constants(
    m: &LossModel,
    z_box: &BoundingBox,
    theta_box: &BoundingBox,
    probes: usize,
    seed: u64,
) -> Result<ConstantsEstimate> {
    let (gamma, beta) = match m.kind {
        LossKind::ScalarSquared => {
            if z_box.dim() != 1 || theta_box.dim() != 1 {
                return Err(Error::Dimension("scalar loss needs 1-dimensional boxes".into()));
            }
            (2.0, 2.0)
        }
        LossKind::RegularizedLogistic { lambda, .. } => {
            if z_box.dim() != theta_box.dim() {
                return Err(Error::Dimension(format!(
                    "feature box has {} dims, classifier box {}",
                    z_box.dim(),
                    theta_box.dim()
                )));
            }
            (lambda, logistic_beta(lambda, z_box.max_norm_sq()))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scalar = m.is_scalar();
    let draw = |rng: &mut ChaCha8Rng| -> (Vec<f64>, f64) {
        let v = z_box.sample(rng);
        if scalar {
            (Vec::new(), v[0])
        } else {
            (v, if rng.random_bool(0.5) { 1.0 } else { -1.0 })
        }
    };
    let (mut beta_theta, mut beta_z, mut l_z) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..probes {
        let (x, y) = draw(&mut rng);
        let t1 = theta_box.sample(&mut rng);
        let t2 = theta_box.sample(&mut rng);
        let z = Instance { x: &x, y };
        let dt = euclid(&t1, &t2);
        if dt > 0.0 {
            let mut g1 = vec![0.0; t1.len()];
            let mut g2 = vec![0.0; t1.len()];
            add_grad(m, z, &t1, 1.0, &mut g1);
            add_grad(m, z, &t2, 1.0, &mut g2);
            beta_theta = beta_theta.max(euclid(&g1, &g2) / dt);
        }

        let (x2, y2) = if scalar || rng.random_bool(0.5) {
            let (x2, _) = draw(&mut rng);
            let y2 = if scalar { z_box.sample(&mut rng)[0] } else { y };
            (x2, y2)
        } else {
            (x.clone(), -y)
        };
        let z2 = Instance { x: &x2, y: y2 };
        let dz = (euclid(&x, &x2).powi(2) + (y - y2).powi(2)).sqrt();
        if dz > 0.0 {
            let mut g1 = vec![0.0; t1.len()];
            let mut g2 = vec![0.0; t1.len()];
            add_grad(m, z, &t1, 1.0, &mut g1);
            add_grad(m, z2, &t1, 1.0, &mut g2);
            beta_z = beta_z.max(norm(&g1.iter().zip(&g2).map(|(a, b)| a - b).collect::<Vec<_>>()) / dz);
            let dl = (loss_unchecked(m, z, &t1) - loss_unchecked(m, z2, &t1)).abs();
            l_z = l_z.max(dl / dz);
        }
    }
    Ok(ConstantsEstimate {
        gamma,
        beta,
        beta_theta_probe: beta_theta,
        beta_z_probe: beta_z,
        l_z,
        z_box: z_box.clone(),
        theta_box: theta_box.clone(),
        probes,
    })
}
