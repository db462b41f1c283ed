//! The adversary: transition maps `Tr(d, theta) -> d'`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use serde::Serialize;

use crate::distribution::{self, Component, Distribution, MixtureDistribution, Population, StatePoint};
use crate::error::{Error, Result};
use crate::losses::Classifier;

/// A deterministic environment response.
///
/// Implementations must be pure: equal inputs give equal outputs. State that
/// a map needs across rounds lives in the distribution it is handed.
pub trait TransitionMap: Send + Sync {
    fn apply(&self, d: &Distribution, theta: &Classifier) -> Result<Distribution>;

    /// Analytic joint sensitivity, when known.
    fn declared_sensitivity(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String;
}

/// A stateless response `D(theta)` over a fixed baseline.
pub trait ResponseFunction: Send + Sync {
    fn respond(&self, theta: &Classifier) -> Result<Population>;

    fn baseline(&self) -> &Population;

    /// Constant `eps` with `W1(D(t), D(t')) <= eps * ||t - t'||`.
    fn sensitivity(&self) -> Option<f64> {
        None
    }
}

/// Best response of every baseline individual to `u(x) = -<theta, x>` under
/// the quadratic cost `||x' - x||^2 / (2 eps)`: strategic coordinates move to
/// `x_S - eps * theta_S`, everything else stays.
#[derive(Debug, Clone)]
pub struct StrategicResponse {
    baseline: Population,
    strategic: Vec<usize>,
    epsilon: f64,
}

impl StrategicResponse {
    /// `intercept` names the constant column, which may not be strategic.
    pub fn new(
        baseline: Population,
        strategic: Vec<usize>,
        epsilon: f64,
        intercept: Option<usize>,
    ) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        if epsilon > 0.0 && strategic.is_empty() {
            return Err(Error::InvalidArgument(
                "strategic feature set is empty but epsilon > 0".into(),
            ));
        }
        if let Some(&bad) = strategic.iter().find(|&&j| j >= baseline.p()) {
            return Err(Error::Dimension(format!(
                "strategic column {bad} out of range for {} features",
                baseline.p()
            )));
        }
        if let Some(ic) = intercept {
            if strategic.contains(&ic) {
                return Err(Error::InvalidArgument(format!(
                    "intercept column {ic} cannot be strategic"
                )));
            }
        }
        let mut strategic = strategic;
        strategic.sort_unstable();
        strategic.dedup();
        Ok(Self {
            baseline,
            strategic,
            epsilon,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn strategic_features(&self) -> &[usize] {
        &self.strategic
    }
}

impl ResponseFunction for StrategicResponse {
    fn respond(&self, theta: &Classifier) -> Result<Population> {
        let p = self.baseline.p();
        if theta.dim() != p {
            return Err(Error::Dimension(format!(
                "classifier has {} parameters, population has {p} features",
                theta.dim()
            )));
        }
        let t = theta.params();
        if self.epsilon == 0.0 || self.strategic.iter().all(|&j| t[j] == 0.0) {
            return Ok(self.baseline.clone());
        }
        let mut features = self.baseline.features().to_vec();
        for row in features.chunks_mut(p) {
            for &j in &self.strategic {
                row[j] -= self.epsilon * t[j];
            }
        }
        self.baseline.with_features(features)
    }

    fn baseline(&self) -> &Population {
        &self.baseline
    }

    fn sensitivity(&self) -> Option<f64> {
        Some(self.epsilon)
    }
}

/// The stateless map `Tr(d, theta) = D(theta)`.
impl TransitionMap for StrategicResponse {
    fn apply(&self, _d: &Distribution, theta: &Classifier) -> Result<Distribution> {
        self.respond(theta).map(Distribution::Population)
    }

    fn declared_sensitivity(&self) -> Option<f64> {
        Some(self.epsilon)
    }

    fn name(&self) -> String {
        format!("strategic_response(eps={})", self.epsilon)
    }
}

/// `Tr(d, theta) = (1 - delta) d + delta D(theta)`.
#[derive(Debug, Clone)]
pub struct GeometricDecay<R> {
    response: R,
    delta: f64,
}

impl<R: ResponseFunction> GeometricDecay<R> {
    pub fn new(response: R, delta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!("delta {delta} outside [0, 1]")));
        }
        Ok(Self { response, delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn response(&self) -> &R {
        &self.response
    }
}

impl<R: ResponseFunction> TransitionMap for GeometricDecay<R> {
    fn apply(&self, d: &Distribution, theta: &Classifier) -> Result<Distribution> {
        let current = d.to_mixture()?;
        if self.delta == 0.0 {
            return Ok(current.into());
        }
        let fresh = self.response.respond(theta)?;
        if fresh.n() != current.n() || fresh.p() != current.p() {
            return Err(Error::Dimension(format!(
                "response is {}x{}, state is {}x{}",
                fresh.n(),
                fresh.p(),
                current.n(),
                current.p()
            )));
        }
        let keep = 1.0 - self.delta;
        let mut components: Vec<Component> = current
            .components()
            .iter()
            .map(|c| Component {
                weight: keep * c.weight,
                population: c.population.clone(),
            })
            .collect();
        // identical snapshots share one component
        match components
            .iter_mut()
            .find(|c| c.population.same_content(&fresh) && c.population.weights() == fresh.weights())
        {
            Some(c) => c.weight += self.delta,
            None => components.push(Component {
                weight: self.delta,
                population: fresh,
            }),
        }
        MixtureDistribution::pruned(components).map(Distribution::Mixture)
    }

    fn declared_sensitivity(&self) -> Option<f64> {
        let inner = self.response.sensitivity()?;
        Some((1.0 - self.delta).max(self.delta * inner))
    }

    fn name(&self) -> String {
        format!("geometric_decay(delta={})", self.delta)
    }
}

/// `k` groups where group `j` (1-based) responds to the classifier published
/// `j` rounds ago.
///
/// The state is a `k`-component mixture: component `j` carries the response
/// to that group's classifier for every row, with weights conditioned on
/// group membership. Advancing a round shifts each snapshot down one group.
/// A state not produced by this map (e.g. the initial baseline) counts as
/// pre-history, and every group then responds to the current classifier.
#[derive(Debug, Clone)]
pub struct KGroups<R> {
    response: R,
    k: usize,
    group_of: Vec<usize>,
    shares: Vec<f64>,
    conditional: Vec<Vec<f64>>,
}

impl<R: ResponseFunction> KGroups<R> {
    /// Equal-size groups from a seeded shuffle of the baseline rows.
    pub fn new(response: R, k: usize, seed: u64) -> Result<Self> {
        let n = response.baseline().n();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut group_of = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            group_of[i] = pos * k.max(1) / n;
        }
        Self::with_groups(response, k, group_of)
    }

    /// Explicit 0-based group assignment per baseline row.
    pub fn with_groups(response: R, k: usize, group_of: Vec<usize>) -> Result<Self> {
        let base = response.baseline();
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if group_of.len() != base.n() {
            return Err(Error::Dimension(format!(
                "{} group labels for {} rows",
                group_of.len(),
                base.n()
            )));
        }
        if let Some(&g) = group_of.iter().find(|&&g| g >= k) {
            return Err(Error::InvalidArgument(format!("group {g} out of range for k={k}")));
        }
        let (shares, conditional) = if k == 1 {
            (vec![1.0], vec![base.weights().to_vec()])
        } else {
            let mut shares = vec![0.0; k];
            for (i, &g) in group_of.iter().enumerate() {
                shares[g] += base.weight(i);
            }
            if let Some(j) = shares.iter().position(|s| *s <= 0.0) {
                return Err(Error::InvalidArgument(format!("group {} has no mass", j + 1)));
            }
            let conditional = (0..k)
                .map(|j| {
                    group_of
                        .iter()
                        .enumerate()
                        .map(|(i, &g)| if g == j { base.weight(i) / shares[j] } else { 0.0 })
                        .collect()
                })
                .collect();
            (shares, conditional)
        };
        Ok(Self {
            response,
            k,
            group_of,
            shares,
            conditional,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    /// Baseline mass of each group.
    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    /// Per-group snapshots when `d` is a state this map produced.
    fn previous_groups<'a>(&self, d: &'a Distribution) -> Option<Vec<&'a Population>> {
        let Distribution::Mixture(m) = d else {
            return None;
        };
        let comps = m.components();
        let ours = comps.len() == self.k
            && comps
                .iter()
                .zip(&self.conditional)
                .all(|(c, w)| c.population.weights() == w.as_slice());
        ours.then(|| comps.iter().map(|c| &c.population).collect())
    }
}

impl<R: ResponseFunction> TransitionMap for KGroups<R> {
    fn apply(&self, d: &Distribution, theta: &Classifier) -> Result<Distribution> {
        let fresh = self.response.respond(theta)?;
        let previous = self.previous_groups(d);
        let mut components = Vec::with_capacity(self.k);
        for j in 0..self.k {
            let source = match (&previous, j) {
                (Some(prev), j) if j > 0 => prev[j - 1],
                _ => &fresh,
            };
            components.push(Component {
                weight: self.shares[j],
                population: source.with_weights(self.conditional[j].clone())?,
            });
        }
        MixtureDistribution::new(components).map(Distribution::Mixture)
    }

    fn declared_sensitivity(&self) -> Option<f64> {
        // with k > 1 the snapshot shift is not a contraction in d
        if self.k == 1 {
            self.response.sensitivity()
        } else {
            None
        }
    }

    fn name(&self) -> String {
        format!("k_groups(k={})", self.k)
    }
}

/// `Tr(d, theta) = 1 + eps * d + eps * theta` on point masses in `[1, inf)`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarLinear {
    epsilon: f64,
}

impl ScalarLinear {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be finite and >= 0, got {epsilon}")));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl TransitionMap for ScalarLinear {
    fn apply(&self, d: &Distribution, theta: &Classifier) -> Result<Distribution> {
        let Distribution::Scalar(pm) = d else {
            return Err(Error::Incompatible(format!(
                "scalar map applied to a {} distribution",
                d.kind()
            )));
        };
        if theta.dim() != 1 {
            return Err(Error::Dimension(format!(
                "scalar map needs a 1-dimensional classifier, got {}",
                theta.dim()
            )));
        }
        let t = theta.params()[0];
        // NaN fails both comparisons and is rejected as well
        if !(pm.value >= 1.0) || !(t >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "scalar map is defined for d, theta >= 1 (got d={}, theta={t})",
                pm.value
            )));
        }
        Ok(Distribution::Scalar(distribution::ScalarPointMass {
            value: 1.0 + self.epsilon * pm.value + self.epsilon * t,
        }))
    }

    fn declared_sensitivity(&self) -> Option<f64> {
        Some(self.epsilon)
    }

    fn name(&self) -> String {
        format!("scalar_linear(eps={})", self.epsilon)
    }
}

impl<T: TransitionMap + ?Sized> TransitionMap for Box<T> {
    fn apply(&self, d: &Distribution, theta: &Classifier) -> Result<Distribution> {
        (**self).apply(d, theta)
    }

    fn declared_sensitivity(&self) -> Option<f64> {
        (**self).declared_sensitivity()
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SensitivityEstimate {
    /// Largest observed ratio; a lower bound on the true sensitivity.
    pub epsilon_hat: f64,
    /// Index into the probe list of the maximizing pair.
    pub argmax: usize,
    pub used: usize,
    pub skipped: usize,
}

/// `max W1(Tr(d, t), Tr(d', t')) / (||t - t'|| + W1(d, d'))` over the probes.
/// Pairs with a zero denominator are skipped.
pub fn estimate_joint_sensitivity(
    map: &dyn TransitionMap,
    probes: &[(StatePoint, StatePoint)],
) -> Result<SensitivityEstimate> {
    let mut best: Option<(f64, usize)> = None;
    let mut skipped = 0;
    for (idx, (a, b)) in probes.iter().enumerate() {
        let denom = distribution::product_dist(a, b)?;
        if !(denom > 0.0) {
            skipped += 1;
            continue;
        }
        let ta = map.apply(&a.dist, &a.theta)?;
        let tb = map.apply(&b.dist, &b.theta)?;
        let ratio = distribution::w1(&ta, &tb)? / denom;
        if best.is_none_or(|(r, _)| ratio > r) {
            best = Some((ratio, idx));
        }
    }
    let (epsilon_hat, argmax) = best.ok_or(Error::DegenerateProbes)?;
    Ok(SensitivityEstimate {
        epsilon_hat,
        argmax,
        used: probes.len() - skipped,
        skipped,
    })
}

/// Probe pairs around the given states: each pair is a state and a copy with
/// its classifier (and, for point masses, its location) moved by seeded
/// Gaussian noise of standard deviation `scale`.
pub fn perturbation_probes(
    states: &[StatePoint],
    scale: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<(StatePoint, StatePoint)>> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("no states to perturb".into()));
    }
    let noise = Normal::new(0.0, scale)
        .map_err(|e| Error::InvalidArgument(format!("noise scale {scale}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let s = &states[k % states.len()];
        let params: Vec<f64> = s.theta.params().iter().map(|v| v + noise.sample(&mut rng)).collect();
        let theta = s.theta.with_params(params);
        let dist = match &s.dist {
            Distribution::Scalar(pm) => Distribution::scalar((pm.value + noise.sample(&mut rng)).max(1.0))?,
            other => other.clone(),
        };
        out.push((s.clone(), StatePoint::new(dist, theta)));
    }
    Ok(out)
}

/// Scalar probe pairs on `[1, 1 + span]`. Every other pair moves `d` and
/// `theta` in the same direction, which is where a linear map attains its
/// sensitivity.
pub fn scalar_probes(count: usize, span: f64, seed: u64) -> Result<Vec<(StatePoint, StatePoint)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let d = 1.0 + rng.random::<f64>() * span;
        let t = 1.0 + rng.random::<f64>() * span;
        let (d2, t2) = if k % 2 == 0 {
            let up = rng.random_bool(0.5);
            let (a, b) = (rng.random::<f64>() * span, rng.random::<f64>() * span);
            if up {
                (d + a, t + b)
            } else {
                ((d - a).max(1.0), (t - b).max(1.0))
            }
        } else {
            (1.0 + rng.random::<f64>() * span, 1.0 + rng.random::<f64>() * span)
        };
        out.push((
            StatePoint::new(Distribution::scalar(d)?, Classifier::half_line(t, 1.0)),
            StatePoint::new(Distribution::scalar(d2)?, Classifier::half_line(t2, 1.0)),
        ));
    }
    Ok(out)
}
