//! Distributions over instances `z = (x, y)` and the metrics convergence is
//! measured in.
//!
//! Every in-game distribution is a pushforward of one shared baseline
//! population: row `i` of any population or mixture component always refers
//! to baseline individual `i`. That lets W1 be bounded by the transport cost
//! of the identity coupling (row `i` to row `i`) instead of solving a full
//! optimal transport program. All values returned by [`w1_aligned`] are
//! therefore upper bounds on the true Wasserstein-1 distance, exact whenever
//! one side is a per-individual deterministic transform of the other.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::Classifier;

/// Tolerance on weight normalization.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Mixture components lighter than this are dropped.
pub const PRUNE_FLOOR: f64 = 1e-9;

/// Finite weighted empirical distribution over feature/label pairs.
///
/// Storage is shared (`Arc`), so clones are cheap and trajectories can keep
/// every snapshot.
#[derive(Debug, Clone)]
pub struct Population {
    n: usize,
    p: usize,
    features: Arc<[f64]>,
    labels: Arc<[f64]>,
    weights: Arc<[f64]>,
    fingerprint: u64,
}

impl Population {
    /// `features` is row-major, `n x p`.
    pub fn new(features: Vec<f64>, p: usize, labels: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidArgument("population needs at least one row".into()));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("population needs at least one feature column".into()));
        }
        if features.len() != n * p {
            return Err(Error::Dimension(format!(
                "{} feature values do not form {n} rows of width {p}",
                features.len()
            )));
        }
        if weights.len() != n {
            return Err(Error::Dimension(format!("{} weights for {n} rows", weights.len())));
        }
        if let Some(bad) = labels.iter().find(|y| **y != 1.0 && **y != -1.0) {
            return Err(Error::InvalidArgument(format!("label {bad} is not +1 or -1")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        check_weights(&weights)?;
        Ok(Self::from_parts(n, p, features.into(), labels.into(), weights.into()))
    }

    /// Uniform weights `1/n`.
    pub fn uniform(features: Vec<f64>, p: usize, labels: Vec<f64>) -> Result<Self> {
        let n = labels.len().max(1);
        let w = 1.0 / n as f64;
        let weights = vec![w; labels.len()];
        Self::new(features, p, labels, weights)
    }

    fn from_parts(
        n: usize,
        p: usize,
        features: Arc<[f64]>,
        labels: Arc<[f64]>,
        weights: Arc<[f64]>,
    ) -> Self {
        let fingerprint = content_fingerprint(&features, &labels);
        Self {
            n,
            p,
            features,
            labels,
            weights,
            fingerprint,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Feature dimension (including any intercept column).
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.p..(i + 1) * self.p]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same labels and weights, new feature matrix.
    pub fn with_features(&self, features: Vec<f64>) -> Result<Self> {
        if features.len() != self.n * self.p {
            return Err(Error::Dimension(format!(
                "replacement features have {} values, expected {}",
                features.len(),
                self.n * self.p
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self::from_parts(
            self.n,
            self.p,
            features.into(),
            Arc::clone(&self.labels),
            Arc::clone(&self.weights),
        ))
    }

    /// Same rows, new weights. Feature storage is shared, not copied.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.n {
            return Err(Error::Dimension(format!("{} weights for {} rows", weights.len(), self.n)));
        }
        check_weights(&weights)?;
        Ok(Self {
            weights: weights.into(),
            ..self.clone()
        })
    }

    /// True when both populations hold identical `(x, y)` rows (weights are
    /// not compared).
    pub fn same_content(&self, other: &Population) -> bool {
        if Arc::ptr_eq(&self.features, &other.features) && Arc::ptr_eq(&self.labels, &other.labels) {
            return true;
        }
        self.fingerprint == other.fingerprint
            && self.n == other.n
            && self.p == other.p
            && self.features == other.features
            && self.labels == other.labels
    }

    /// Euclidean distance between row `i` here and row `j` of `other`, over
    /// the full instance `(x, y)`.
    pub fn row_distance(&self, i: usize, other: &Population, j: usize) -> f64 {
        let dx: f64 = self
            .row(i)
            .iter()
            .zip(other.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let dy = self.label(i) - other.label(j);
        (dx + dy * dy).sqrt()
    }

    fn check_aligned(&self, other: &Population) -> Result<()> {
        if self.n != other.n || self.p != other.p {
            return Err(Error::Dimension(format!(
                "populations are {}x{} and {}x{}",
                self.n, self.p, other.n, other.p
            )));
        }
        Ok(())
    }
}

impl PartialEq for Population {
    fn eq(&self, other: &Self) -> bool {
        self.same_content(other) && self.weights == other.weights
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

fn content_fingerprint(features: &[f64], labels: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    features.len().hash(&mut h);
    for v in features.iter().chain(labels) {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub population: Population,
}

/// Weighted list of populations over one shared baseline index set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDistribution {
    components: Vec<Component>,
}

impl MixtureDistribution {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("mixture needs at least one component".into()))?;
        let (n, p) = (first.population.n(), first.population.p());
        for c in &components {
            if c.population.n() != n || c.population.p() != p {
                return Err(Error::Dimension(format!(
                    "mixture component is {}x{}, expected {n}x{p}",
                    c.population.n(),
                    c.population.p()
                )));
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "component weight {} outside (0, 1]",
                    c.weight
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidArgument(format!(
                "component weights sum to {total}, not 1"
            )));
        }
        Ok(Self { components })
    }

    /// Single-component mixture.
    pub fn single(population: Population) -> Self {
        Self {
            components: vec![Component {
                weight: 1.0,
                population,
            }],
        }
    }

    /// Builds a mixture from raw weights, dropping components below
    /// [`PRUNE_FLOOR`] and renormalizing only if something was dropped.
    pub fn pruned(mut components: Vec<Component>) -> Result<Self> {
        let before = components.len();
        components.retain(|c| c.weight >= PRUNE_FLOOR);
        if components.len() != before {
            let total: f64 = components.iter().map(|c| c.weight).sum();
            for c in &mut components {
                c.weight /= total;
            }
        }
        Self::new(components)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn n(&self) -> usize {
        self.components[0].population.n()
    }

    pub fn p(&self) -> usize {
        self.components[0].population.p()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }
}

impl From<Population> for MixtureDistribution {
    fn from(p: Population) -> Self {
        Self::single(p)
    }
}

/// Point mass on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarPointMass {
    pub value: f64,
}

impl ScalarPointMass {
    /// Any finite location is accepted; the scalar transition map enforces
    /// its own `[1, inf)` domain.
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("point mass at {value}")));
        }
        Ok(Self { value })
    }
}

/// The adversary's state.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Scalar(ScalarPointMass),
    Population(Population),
    Mixture(MixtureDistribution),
}

impl Distribution {
    pub fn scalar(value: f64) -> Result<Self> {
        ScalarPointMass::new(value).map(Distribution::Scalar)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Distribution::Scalar(_) => "scalar",
            Distribution::Population(_) => "population",
            Distribution::Mixture(_) => "mixture",
        }
    }

    /// Feature dimension for population-like distributions.
    pub fn feature_dim(&self) -> Option<usize> {
        match self {
            Distribution::Scalar(_) => None,
            Distribution::Population(p) => Some(p.p()),
            Distribution::Mixture(m) => Some(m.p()),
        }
    }

    /// Population-like distributions as a mixture (a population becomes a
    /// single component).
    pub fn to_mixture(&self) -> Result<MixtureDistribution> {
        match self {
            Distribution::Scalar(_) => Err(Error::Incompatible(
                "a scalar point mass has no mixture form".into(),
            )),
            Distribution::Population(p) => Ok(MixtureDistribution::single(p.clone())),
            Distribution::Mixture(m) => Ok(m.clone()),
        }
    }
}

impl From<Population> for Distribution {
    fn from(p: Population) -> Self {
        Distribution::Population(p)
    }
}

impl From<MixtureDistribution> for Distribution {
    fn from(m: MixtureDistribution) -> Self {
        Distribution::Mixture(m)
    }
}

/// A point `(d, theta)` of the product space.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePoint {
    pub dist: Distribution,
    pub theta: Classifier,
}

impl StatePoint {
    pub fn new(dist: Distribution, theta: Classifier) -> Self {
        Self { dist, theta }
    }
}

/// Exact W1 between two point masses.
pub fn w1_scalar(a: ScalarPointMass, b: ScalarPointMass) -> f64 {
    (a.value - b.value).abs()
}

/// Transport cost of the identity coupling between two baseline-aligned
/// distributions; an upper bound on W1.
///
/// Population against population pairs row `i` with row `i`. Mixtures are
/// coupled per individual: mass sitting in components with identical content
/// on both sides stays put, and only the remaining mass is moved (spread
/// proportionally across the remaining components).
pub fn w1_aligned(a: &Distribution, b: &Distribution) -> Result<f64> {
    match (a, b) {
        (Distribution::Population(pa), Distribution::Population(pb)) => w1_populations(pa, pb),
        (Distribution::Scalar(_), _) | (_, Distribution::Scalar(_)) => Err(Error::Incompatible(
            "aligned W1 needs population-like distributions".into(),
        )),
        _ => w1_mixtures(&a.to_mixture()?, &b.to_mixture()?),
    }
}

/// W1 dispatched by distribution kind.
pub fn w1(a: &Distribution, b: &Distribution) -> Result<f64> {
    match (a, b) {
        (Distribution::Scalar(x), Distribution::Scalar(y)) => Ok(w1_scalar(*x, *y)),
        _ => w1_aligned(a, b),
    }
}

fn w1_populations(a: &Population, b: &Population) -> Result<f64> {
    a.check_aligned(b)?;
    if a.same_content(b) {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..a.n() {
        let (wa, wb) = (a.weight(i), b.weight(i));
        if !masses_agree(wa, wb) {
            return Err(Error::Dimension(format!(
                "row {i} carries mass {wa} and {wb}; populations do not share a baseline"
            )));
        }
        if wa > 0.0 {
            total += wa * a.row_distance(i, b, i);
        }
    }
    Ok(total)
}

fn masses_agree(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) + 1e-15
}

fn w1_mixtures(a: &MixtureDistribution, b: &MixtureDistribution) -> Result<f64> {
    if a.n() != b.n() || a.p() != b.p() {
        return Err(Error::Dimension(format!(
            "mixtures are {}x{} and {}x{}",
            a.n(),
            a.p(),
            b.n(),
            b.p()
        )));
    }
    let ca = a.components();
    let cb = b.components();
    let matches: Vec<(usize, usize)> = ca
        .iter()
        .enumerate()
        .flat_map(|(i, x)| {
            cb.iter()
                .enumerate()
                .filter(move |(_, y)| x.population.same_content(&y.population))
                .map(move |(j, _)| (i, j))
        })
        .collect();

    let mut ra = vec![0.0; ca.len()];
    let mut rb = vec![0.0; cb.len()];
    let mut total = 0.0;
    for row in 0..a.n() {
        for (k, c) in ca.iter().enumerate() {
            ra[k] = c.weight * c.population.weight(row);
        }
        for (k, c) in cb.iter().enumerate() {
            rb[k] = c.weight * c.population.weight(row);
        }
        let (ma, mb): (f64, f64) = (ra.iter().sum(), rb.iter().sum());
        if !masses_agree(ma, mb) {
            return Err(Error::Dimension(format!(
                "individual {row} carries mass {ma} and {mb}; mixtures do not share a baseline"
            )));
        }
        for &(i, j) in &matches {
            let m = ra[i].min(rb[j]);
            ra[i] -= m;
            rb[j] -= m;
        }
        let residual = 0.5 * (ra.iter().sum::<f64>() + rb.iter().sum::<f64>());
        if residual <= 0.0 {
            continue;
        }
        let left: Vec<usize> = (0..ra.len()).filter(|&i| ra[i] > 0.0).collect();
        let right: Vec<usize> = (0..rb.len()).filter(|&j| rb[j] > 0.0).collect();
        if let ([i], [j]) = (left.as_slice(), right.as_slice()) {
            total += ra[*i] * ca[*i].population.row_distance(row, &cb[*j].population, row);
            continue;
        }
        for (i, &mi) in ra.iter().enumerate() {
            if mi <= 0.0 {
                continue;
            }
            for (j, &mj) in rb.iter().enumerate() {
                if mj <= 0.0 {
                    continue;
                }
                let d = ca[i].population.row_distance(row, &cb[j].population, row);
                total += mi * mj / residual * d;
            }
        }
    }
    Ok(total)
}

/// `W1(d, d') + ||theta - theta'||_2`.
pub fn product_dist(s: &StatePoint, t: &StatePoint) -> Result<f64> {
    Ok(w1(&s.dist, &t.dist)? + s.theta.distance(&t.theta)?)
}
