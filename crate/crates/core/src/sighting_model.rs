//! Per-species sighting probability: one-hot context features, presence /
//! absence training sets, L2-regularized logistic regression fitted by
//! full-batch gradient descent, and commonness-based rarity tiers.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use time::{Month, PrimitiveDateTime};

use crate::geo::GridIndex;
use crate::ingest::Dataset;

/// Number of entries in a [`FeatureVector`].
pub const FEATURE_LEN: usize = 11;
/// Version of the feature layout written into model files.
pub const SCHEMA_VERSION: u32 = 1;

/// Human-readable name of each feature position.
pub const FEATURE_NAMES: [&str; FEATURE_LEN] = [
    "bias", "dawn", "day", "dusk", "night", "spring", "summer", "fall", "winter", "count_high",
    "count_low",
];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("species `{0}` does not occur in the dataset")]
    UnknownSpecies(String),
    #[error("training data holds only one label ({positives} positive, {negatives} negative)")]
    DegenerateData { positives: usize, negatives: usize },
    #[error("gradient descent diverged at iteration {0}")]
    NonFinite(usize),
    #[error("model schema v{found} with {len} weights does not match v{SCHEMA_VERSION} with {FEATURE_LEN}")]
    SchemaMismatch { found: u32, len: usize },
    #[error("dataset has no complete checklists")]
    NoCompleteChecklists,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeOfDay {
    Dawn,
    Day,
    Dusk,
    Night,
}

impl TimeOfDay {
    /// Dawn 04:00-07:59, day 08:00-15:59, dusk 16:00-19:59, night otherwise.
    pub fn from_minute(minute_of_day: u16) -> Self {
        match minute_of_day / 60 {
            4..=7 => Self::Dawn,
            8..=15 => Self::Day,
            16..=19 => Self::Dusk,
            _ => Self::Night,
        }
    }

    fn slot(self) -> usize {
        1 + self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Spring,
    Summer,
    Fall,
    Winter,
}

impl Season {
    /// Meteorological seasons, northern hemisphere.
    pub fn from_month(month: Month) -> Self {
        use Month::*;
        match month {
            March | April | May => Self::Spring,
            June | July | August => Self::Summer,
            September | October | November => Self::Fall,
            December | January | February => Self::Winter,
        }
    }

    fn slot(self) -> usize {
        5 + self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountClass {
    High,
    Low,
    /// Query time: nothing has been counted yet.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub time_of_day: TimeOfDay,
    pub season: Season,
    pub count_class: CountClass,
}

impl Context {
    pub fn at(timestamp: PrimitiveDateTime, count_class: CountClass) -> Self {
        let minute = timestamp.hour() as u16 * 60 + timestamp.minute() as u16;
        Self {
            time_of_day: TimeOfDay::from_minute(minute),
            season: Season::from_month(timestamp.month()),
            count_class,
        }
    }
}

/// `[bias, dawn, day, dusk, night, spring, summer, fall, winter, count_high, count_low]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector([f64; FEATURE_LEN]);

impl FeatureVector {
    pub fn from_context(ctx: Context) -> Self {
        let mut v = [0.0; FEATURE_LEN];
        v[0] = 1.0;
        v[ctx.time_of_day.slot()] = 1.0;
        v[ctx.season.slot()] = 1.0;
        match ctx.count_class {
            CountClass::High => v[9] = 1.0,
            CountClass::Low => v[10] = 1.0,
            CountClass::Unknown => {}
        }
        Self(v)
    }

    /// The all-zero vector except for the bias term.
    pub fn bias_only() -> Self {
        let mut v = [0.0; FEATURE_LEN];
        v[0] = 1.0;
        Self(v)
    }

    pub fn values(&self) -> &[f64; FEATURE_LEN] {
        &self.0
    }

    fn bits(&self) -> u16 {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }
}

pub fn featurize(timestamp: PrimitiveDateTime, count_class: CountClass) -> FeatureVector {
    FeatureVector::from_context(Context::at(timestamp, count_class))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example {
    pub features: FeatureVector,
    pub label: bool,
}

/// Presence/absence examples for one species.
///
/// Every checklist reporting the species is a positive, classed `High` when its
/// count reaches the species' dataset-wide median. Complete checklists lacking
/// the species but within `radius_km` of some positive are negatives with
/// unknown count class.
pub fn build_training_set(
    dataset: &Dataset,
    index: &GridIndex,
    species: &str,
    radius_km: f64,
) -> Result<Vec<Example>, ModelError> {
    let sightings = dataset
        .species_index()
        .get(species)
        .ok_or_else(|| ModelError::UnknownSpecies(species.to_string()))?;
    let median = dataset.median_count(species).unwrap_or(0.0);

    let mut examples = Vec::new();
    let mut nearby = BTreeSet::new();
    for &(id, count) in sightings {
        let checklist = dataset.checklist(id).expect("species index refers to loaded checklists");
        let class = if count as f64 >= median { CountClass::High } else { CountClass::Low };
        examples.push(Example {
            features: featurize(checklist.meta.start(), class),
            label: true,
        });
        nearby.extend(index.query_radius(checklist.meta.point(), radius_km));
    }
    for id in nearby {
        let Some(checklist) = dataset.checklist(id) else { continue };
        if checklist.meta.complete && !checklist.contains(species) {
            examples.push(Example {
                features: featurize(checklist.meta.start(), CountClass::Unknown),
                label: false,
            });
        }
    }
    Ok(examples)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2_lambda: 1e-3,
            max_iters: 10_000,
            grad_tol: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.learning_rate) {
            return Err(ModelError::InvalidConfig("learning_rate must be positive"));
        }
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(ModelError::InvalidConfig("l2_lambda must be non-negative"));
        }
        if self.max_iters == 0 {
            return Err(ModelError::InvalidConfig("max_iters must be positive"));
        }
        if !positive(self.grad_tol) {
            return Err(ModelError::InvalidConfig("grad_tol must be positive"));
        }
        Ok(())
    }
}

pub type Weights = [f64; FEATURE_LEN];

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

fn dot(w: &Weights, x: &[f64; FEATURE_LEN]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Regularized mean logistic loss over a training set.
///
/// Examples are grouped by distinct feature vector (kept in a fixed order), so
/// every evaluation is independent of the order the examples were supplied in.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    patterns: Vec<Pattern>,
    n: f64,
    l2_lambda: f64,
}

#[derive(Debug, Clone)]
struct Pattern {
    x: [f64; FEATURE_LEN],
    positives: f64,
    total: f64,
}

impl LogisticObjective {
    pub fn new(examples: &[Example], l2_lambda: f64) -> Self {
        let mut groups: BTreeMap<u16, (FeatureVector, u64, u64)> = BTreeMap::new();
        for e in examples {
            let g = groups.entry(e.features.bits()).or_insert((e.features, 0, 0));
            g.1 += e.label as u64;
            g.2 += 1;
        }
        let patterns = groups
            .into_values()
            .map(|(fv, pos, total)| Pattern {
                x: fv.0,
                positives: pos as f64,
                total: total as f64,
            })
            .collect();
        Self {
            patterns,
            n: examples.len() as f64,
            l2_lambda,
        }
    }

    /// `mean(ln(1 + e^z) - y z) + (lambda / 2) * |w[1..]|^2`
    pub fn loss(&self, w: &Weights) -> f64 {
        let data: f64 = self
            .patterns
            .iter()
            .map(|p| {
                let z = dot(w, &p.x);
                p.total * softplus(z) - p.positives * z
            })
            .sum();
        let penalty: f64 = w[1..].iter().map(|x| x * x).sum();
        data / self.n + 0.5 * self.l2_lambda * penalty
    }

    pub fn gradient(&self, w: &Weights) -> Weights {
        let mut g = [0.0; FEATURE_LEN];
        for p in &self.patterns {
            let residual = p.total * sigmoid(dot(w, &p.x)) - p.positives;
            for (gj, xj) in g.iter_mut().zip(&p.x) {
                *gj += residual * xj;
            }
        }
        for gj in &mut g {
            *gj /= self.n;
        }
        for j in 1..FEATURE_LEN {
            g[j] += self.l2_lambda * w[j];
        }
        g
    }
}

/// Outcome of [`gradient_descent`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit {
    pub weights: Weights,
    pub iterations: usize,
    pub converged: bool,
}

/// Full-batch gradient descent from `w = 0`.
///
/// `observe` sees the loss before the first step and after each step. Stops
/// once the gradient's infinity norm drops below `grad_tol`, or after
/// `max_iters` steps.
pub fn gradient_descent(
    objective: &LogisticObjective,
    cfg: &TrainConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<Fit, ModelError> {
    cfg.validate()?;
    let mut w = [0.0; FEATURE_LEN];
    observe(0, objective.loss(&w));
    for iter in 0..cfg.max_iters {
        let g = objective.gradient(&w);
        let norm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !norm.is_finite() {
            return Err(ModelError::NonFinite(iter));
        }
        if norm < cfg.grad_tol {
            return Ok(Fit {
                weights: w,
                iterations: iter,
                converged: true,
            });
        }
        for (wj, gj) in w.iter_mut().zip(&g) {
            *wj -= cfg.learning_rate * gj;
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite(iter + 1));
        }
        observe(iter + 1, objective.loss(&w));
    }
    Ok(Fit {
        weights: w,
        iterations: cfg.max_iters,
        converged: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesModel {
    pub species: String,
    pub schema_version: u32,
    pub weights: Vec<f64>,
    pub positives: u64,
    pub negatives: u64,
}

impl SpeciesModel {
    /// A model that predicts 0.5 everywhere.
    pub fn zero(species: impl Into<String>) -> Self {
        Self {
            species: species.into(),
            schema_version: SCHEMA_VERSION,
            weights: alloc::vec![0.0; FEATURE_LEN],
            positives: 0,
            negatives: 0,
        }
    }

    pub fn check_schema(&self) -> Result<(), ModelError> {
        if self.schema_version != SCHEMA_VERSION || self.weights.len() != FEATURE_LEN {
            return Err(ModelError::SchemaMismatch {
                found: self.schema_version,
                len: self.weights.len(),
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::NonFinite(0));
        }
        Ok(())
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<f64, ModelError> {
        self.check_schema()?;
        let z: f64 = self.weights.iter().zip(x.values()).map(|(w, x)| w * x).sum();
        // Keep the result strictly inside (0, 1) even when the sigmoid saturates.
        Ok(sigmoid(z).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    }
}

pub fn predict(model: &SpeciesModel, x: &FeatureVector) -> Result<f64, ModelError> {
    model.predict(x)
}

fn label_counts(examples: &[Example]) -> (usize, usize) {
    let positives = examples.iter().filter(|e| e.label).count();
    (positives, examples.len() - positives)
}

/// Fit a logistic model to `examples`; both labels must be present.
pub fn train(species: &str, examples: &[Example], cfg: &TrainConfig) -> Result<SpeciesModel, ModelError> {
    let (positives, negatives) = label_counts(examples);
    if positives == 0 || negatives == 0 {
        return Err(ModelError::DegenerateData { positives, negatives });
    }
    let objective = LogisticObjective::new(examples, cfg.l2_lambda);
    let fit = gradient_descent(&objective, cfg, |_, _| {})?;
    Ok(SpeciesModel {
        species: species.to_string(),
        schema_version: SCHEMA_VERSION,
        weights: fit.weights.to_vec(),
        positives: positives as u64,
        negatives: negatives as u64,
    })
}

/// Build the training set for `species` and fit it.
///
/// A species with no usable negatives (seen on every nearby complete
/// checklist) gets an intercept-only model at the Laplace-smoothed rate
/// `(positives + 1) / (n + 2)` instead of a [`ModelError::DegenerateData`].
pub fn train_species(
    dataset: &Dataset,
    index: &GridIndex,
    species: &str,
    radius_km: f64,
    cfg: &TrainConfig,
) -> Result<SpeciesModel, ModelError> {
    let examples = build_training_set(dataset, index, species, radius_km)?;
    match train(species, &examples, cfg) {
        Err(ModelError::DegenerateData { positives, negatives }) => {
            let rate = (positives as f64 + 1.0) / ((positives + negatives) as f64 + 2.0);
            let mut model = SpeciesModel::zero(species);
            model.weights[0] = libm::log(rate / (1.0 - rate));
            model.positives = positives as u64;
            model.negatives = negatives as u64;
            Ok(model)
        }
        other => other,
    }
}

/// Fraction of complete checklists that report `species`.
pub fn commonness(dataset: &Dataset, species: &str) -> Result<f64, ModelError> {
    let complete: Vec<_> = dataset.checklists().iter().filter(|c| c.meta.complete).collect();
    if complete.is_empty() {
        return Err(ModelError::NoCompleteChecklists);
    }
    let hits = complete.iter().filter(|c| c.contains(species)).count();
    Ok(hits as f64 / complete.len() as f64)
}

/// Rarity bucket: 1 is common, 4 is rare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct RarityTier(u8);

impl RarityTier {
    pub const COMMON: Self = Self(1);
    pub const RARE: Self = Self(4);

    pub fn new(tier: u8) -> Option<Self> {
        (1..=4).contains(&tier).then_some(Self(tier))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Point multiplier for a capture: 1, 2, 4 or 8.
    pub fn multiplier(self) -> u64 {
        1 << (self.0 - 1)
    }
}

impl TryFrom<u8> for RarityTier {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v).ok_or_else(|| alloc::format!("rarity tier must be 1..=4, got {v}"))
    }
}

impl From<RarityTier> for u8 {
    fn from(t: RarityTier) -> u8 {
        t.0
    }
}

/// Inclusive lower commonness bounds for tiers 1, 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RarityThresholds {
    pub tier1: f64,
    pub tier2: f64,
    pub tier3: f64,
}

impl Default for RarityThresholds {
    fn default() -> Self {
        Self {
            tier1: 0.20,
            tier2: 0.05,
            tier3: 0.01,
        }
    }
}

pub fn rarity_tier(commonness: f64, thresholds: &RarityThresholds) -> RarityTier {
    if commonness >= thresholds.tier1 {
        RarityTier(1)
    } else if commonness >= thresholds.tier2 {
        RarityTier(2)
    } else if commonness >= thresholds.tier3 {
        RarityTier(3)
    } else {
        RarityTier(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RarityEntry {
    pub commonness: f64,
    pub tier: RarityTier,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RarityTable {
    entries: BTreeMap<String, RarityEntry>,
}

impl RarityTable {
    pub fn compute(dataset: &Dataset, thresholds: &RarityThresholds) -> Result<Self, ModelError> {
        let mut entries = BTreeMap::new();
        for species in dataset.species() {
            let c = commonness(dataset, species)?;
            entries.insert(
                species.to_string(),
                RarityEntry {
                    commonness: c,
                    tier: rarity_tier(c, thresholds),
                },
            );
        }
        Ok(Self { entries })
    }

    pub fn insert(&mut self, species: impl Into<String>, entry: RarityEntry) {
        self.entries.insert(species.into(), entry);
    }

    pub fn get(&self, species: &str) -> Option<&RarityEntry> {
        self.entries.get(species)
    }

    pub fn tier(&self, species: &str) -> Option<RarityTier> {
        self.get(species).map(|e| e.tier)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &RarityEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl FromIterator<(String, RarityEntry)> for RarityTable {
    fn from_iter<T: IntoIterator<Item = (String, RarityEntry)>>(iter: T) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use time::macros::datetime;

    fn fv(bits: &[usize]) -> [f64; FEATURE_LEN] {
        let mut v = [0.0; FEATURE_LEN];
        for &b in bits {
            v[b] = 1.0;
        }
        v
    }

    #[test]
    fn featurize_examples() {
        assert_eq!(
            featurize(datetime!(2017-06-15 10:30), CountClass::Unknown).values(),
            &fv(&[0, 2, 6])
        );
        assert_eq!(
            featurize(datetime!(2017-12-01 05:00), CountClass::High).values(),
            &fv(&[0, 1, 8, 9])
        );
        assert_eq!(
            featurize(datetime!(2017-03-01 23:59), CountClass::Low).values(),
            &fv(&[0, 4, 5, 10])
        );
    }

    #[test]
    fn bucket_boundaries() {
        let tod = |h: u16, m: u16| TimeOfDay::from_minute(h * 60 + m);
        assert_eq!(tod(3, 59), TimeOfDay::Night);
        assert_eq!(tod(4, 0), TimeOfDay::Dawn);
        assert_eq!(tod(7, 59), TimeOfDay::Dawn);
        assert_eq!(tod(8, 0), TimeOfDay::Day);
        assert_eq!(tod(15, 59), TimeOfDay::Day);
        assert_eq!(tod(16, 0), TimeOfDay::Dusk);
        assert_eq!(tod(19, 59), TimeOfDay::Dusk);
        assert_eq!(tod(20, 0), TimeOfDay::Night);
        assert_eq!(tod(0, 0), TimeOfDay::Night);
        assert_eq!(Season::from_month(Month::February), Season::Winter);
        assert_eq!(Season::from_month(Month::March), Season::Spring);
        assert_eq!(Season::from_month(Month::August), Season::Summer);
        assert_eq!(Season::from_month(Month::November), Season::Fall);
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = SpeciesModel::zero("Black Vulture");
        let x = featurize(datetime!(2017-06-15 10:30), CountClass::High);
        assert_eq!(m.predict(&x).unwrap(), 0.5);
    }

    #[test]
    fn saturated_prediction_stays_open_interval() {
        let mut m = SpeciesModel::zero("x");
        m.weights[0] = 1e6;
        let p = m.predict(&FeatureVector::bias_only()).unwrap();
        assert!(p < 1.0 && p > 0.0);
        m.weights[0] = -1e6;
        let p = m.predict(&FeatureVector::bias_only()).unwrap();
        assert!(p < 1.0 && p > 0.0);
    }

    #[test]
    fn schema_mismatch() {
        let mut m = SpeciesModel::zero("x");
        m.weights.pop();
        assert!(matches!(
            m.predict(&FeatureVector::bias_only()),
            Err(ModelError::SchemaMismatch { len: 10, .. })
        ));
        let mut m = SpeciesModel::zero("x");
        m.schema_version = 2;
        assert!(m.predict(&FeatureVector::bias_only()).is_err());
    }

    #[test]
    fn single_label_is_degenerate() {
        let ex: Vec<Example> = (0..5)
            .map(|_| Example {
                features: FeatureVector::bias_only(),
                label: true,
            })
            .collect();
        assert_eq!(
            train("x", &ex, &TrainConfig::default()),
            Err(ModelError::DegenerateData {
                positives: 5,
                negatives: 0
            })
        );
    }

    #[test]
    fn rarity_thresholds() {
        let t = RarityThresholds::default();
        assert_eq!(rarity_tier(0.25, &t).get(), 1);
        assert_eq!(rarity_tier(0.20, &t).get(), 1);
        assert_eq!(rarity_tier(0.05, &t).get(), 2);
        assert_eq!(rarity_tier(0.01, &t).get(), 3);
        assert_eq!(rarity_tier(0.001, &t).get(), 4);
        assert_eq!(rarity_tier(0.0, &t).get(), 4);
        assert_eq!(RarityTier::new(4).unwrap().multiplier(), 8);
        assert!(RarityTier::new(0).is_none());
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
    }
}
