//! Sighting verification by yes/no attribute questions.
//!
//! A claimed species is checked against a set of look-alike candidates. Each
//! answer is treated as a noisy observation of a binary attribute, correct with
//! probability `1 - noise_eps`; the posterior over candidates is updated by
//! Bayes' rule and the next question is the one with the largest expected
//! drop in posterior entropy.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("prior must hold one non-negative weight per candidate and sum to 1")]
    BadPrior,
    #[error("session is already {0}")]
    SessionClosed(Status),
    #[error("expected an answer to `{expected}`, got `{got}`")]
    WrongAttribute { expected: String, got: String },
    #[error("photo has {got} attributes, matrix has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid attribute matrix: {0}")]
    InvalidMatrix(String),
    #[error("invalid verifier configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Binary attribute values per species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMatrix {
    species: Vec<String>,
    attributes: Vec<String>,
    values: Vec<Vec<bool>>,
}

impl AttributeMatrix {
    pub fn new(species: Vec<String>, attributes: Vec<String>, values: Vec<Vec<bool>>) -> Result<Self, VerifyError> {
        if species.len() != values.len() {
            return Err(VerifyError::InvalidMatrix(alloc::format!(
                "{} species but {} rows",
                species.len(),
                values.len()
            )));
        }
        if let Some((i, _)) = values.iter().enumerate().find(|(_, r)| r.len() != attributes.len()) {
            return Err(VerifyError::InvalidMatrix(alloc::format!(
                "row for `{}` has {} cells, expected {}",
                species[i],
                values[i].len(),
                attributes.len()
            )));
        }
        if let Some(dup) = first_duplicate(&species) {
            return Err(VerifyError::InvalidMatrix(alloc::format!("duplicate species `{dup}`")));
        }
        if let Some(dup) = first_duplicate(&attributes) {
            return Err(VerifyError::InvalidMatrix(alloc::format!("duplicate attribute `{dup}`")));
        }
        Ok(Self {
            species,
            attributes,
            values,
        })
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    pub fn attribute_index(&self, label: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a == label)
    }

    pub fn row(&self, species: usize) -> &[bool] {
        &self.values[species]
    }

    pub fn row_of(&self, name: &str) -> Option<&[bool]> {
        self.species_index(name).map(|i| self.row(i))
    }

    pub fn value(&self, species: usize, attribute: usize) -> bool {
        self.values[species][attribute]
    }

    /// Whether every pair of species differs in at least one attribute.
    pub fn rows_distinct(&self) -> bool {
        let set: BTreeSet<&Vec<bool>> = self.values.iter().collect();
        set.len() == self.values.len()
    }
}

fn first_duplicate(names: &[String]) -> Option<&str> {
    let mut seen = BTreeSet::new();
    names.iter().find(|n| !seen.insert(n.as_str())).map(String::as_str)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub accept_threshold: f64,
    pub reject_threshold: f64,
    pub budget: usize,
    pub noise_eps: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            accept_threshold: 0.90,
            reject_threshold: 0.02,
            budget: 8,
            noise_eps: 0.10,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<(), VerifyError> {
        if !(0.0 < self.reject_threshold
            && self.reject_threshold < self.accept_threshold
            && self.accept_threshold < 1.0)
        {
            return Err(VerifyError::InvalidConfig(
                "thresholds must satisfy 0 < reject < accept < 1",
            ));
        }
        if !(0.0..0.5).contains(&self.noise_eps) {
            return Err(VerifyError::InvalidConfig("noise_eps must be in [0, 0.5)"));
        }
        if self.budget == 0 {
            return Err(VerifyError::InvalidConfig("budget must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
}

impl Answer {
    pub fn from_bool(b: bool) -> Self {
        if b { Self::Yes } else { Self::No }
    }

    pub fn as_bool(self) -> bool {
        self == Self::Yes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Open,
    Verified,
    Rejected,
    Inconclusive,
}

impl core::fmt::Display for Status {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Self::Open => "open",
            Self::Verified => "verified",
            Self::Rejected => "rejected",
            Self::Inconclusive => "inconclusive",
        })
    }
}

/// Shannon entropy in bits; zero-mass entries contribute nothing.
pub fn entropy_bits(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * libm::log2(x)).sum::<f64>()
}

fn normalize(p: &mut [f64]) -> bool {
    let total: f64 = p.iter().sum();
    if total.is_nan() || total <= 0.0 || total.is_infinite() {
        return false;
    }
    for x in p.iter_mut() {
        *x /= total;
    }
    true
}

fn likelihood(matches: bool, eps: f64) -> f64 {
    if matches { 1.0 - eps } else { eps }
}

/// Candidate prior from the attributes read off a photo.
///
/// `prior_s ∝ Π_a (1 - eps if photo[a] == matrix[s, a] else eps)`. When no
/// candidate is consistent with the photo (possible only at `eps = 0`) the
/// photo carries no usable evidence and the prior is uniform.
pub fn vision_prior(
    photo_attributes: &[bool],
    candidates: &[String],
    matrix: &AttributeMatrix,
    eps: f64,
) -> Result<Vec<f64>, VerifyError> {
    if photo_attributes.len() != matrix.attributes.len() {
        return Err(VerifyError::LengthMismatch {
            expected: matrix.attributes.len(),
            got: photo_attributes.len(),
        });
    }
    let rows = candidate_rows(candidates, matrix)?;
    // Log space keeps long attribute lists from underflowing.
    let logs: Vec<f64> = rows
        .iter()
        .map(|&s| {
            photo_attributes
                .iter()
                .zip(matrix.row(s))
                .map(|(p, m)| libm::log(likelihood(p == m, eps)))
                .sum()
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(uniform(rows.len()));
    }
    let mut prior: Vec<f64> = logs.iter().map(|&l| libm::exp(l - max)).collect();
    normalize(&mut prior);
    Ok(prior)
}

fn uniform(n: usize) -> Vec<f64> {
    alloc::vec![1.0 / n as f64; n]
}

fn candidate_rows(candidates: &[String], matrix: &AttributeMatrix) -> Result<Vec<usize>, VerifyError> {
    candidates
        .iter()
        .map(|c| matrix.species_index(c).ok_or_else(|| VerifyError::UnknownSpecies(c.clone())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskedQuestion {
    pub attribute: String,
    pub answer: Answer,
}

/// One verification dialogue for one claimed sighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationSession {
    pub id: String,
    claimed_species: String,
    claimed: usize,
    candidates: Vec<String>,
    attributes: Vec<String>,
    /// Attribute values, one row per candidate.
    rows: Vec<Vec<bool>>,
    posterior: Vec<f64>,
    asked: Vec<AskedQuestion>,
    asked_set: BTreeSet<usize>,
    pending: Option<usize>,
    status: Status,
    noise_eps: f64,
    budget: usize,
    accept_threshold: f64,
    reject_threshold: f64,
}

impl VerificationSession {
    /// Start a session; `prior = None` means uniform over `candidates`.
    pub fn open(
        id: impl Into<String>,
        claimed: &str,
        candidates: &[String],
        prior: Option<Vec<f64>>,
        matrix: &AttributeMatrix,
        cfg: &VerifyConfig,
    ) -> Result<Self, VerifyError> {
        cfg.validate()?;
        let claimed_pos = candidates
            .iter()
            .position(|c| c == claimed)
            .ok_or_else(|| VerifyError::UnknownSpecies(claimed.to_string()))?;
        if first_duplicate(candidates).is_some() {
            return Err(VerifyError::InvalidMatrix("duplicate candidate".to_string()));
        }
        let rows = candidate_rows(candidates, matrix)?;
        let posterior = match prior {
            None => uniform(candidates.len()),
            Some(p) => {
                let ok = p.len() == candidates.len()
                    && p.iter().all(|x| x.is_finite() && *x >= 0.0)
                    && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
                if !ok {
                    return Err(VerifyError::BadPrior);
                }
                p
            }
        };
        Ok(Self {
            id: id.into(),
            claimed_species: claimed.to_string(),
            claimed: claimed_pos,
            candidates: candidates.to_vec(),
            attributes: matrix.attributes.clone(),
            rows: rows.iter().map(|&s| matrix.row(s).to_vec()).collect(),
            posterior,
            asked: Vec::new(),
            asked_set: BTreeSet::new(),
            pending: None,
            status: Status::Open,
            noise_eps: cfg.noise_eps,
            budget: cfg.budget,
            accept_threshold: cfg.accept_threshold,
            reject_threshold: cfg.reject_threshold,
        })
    }

    pub fn claimed_species(&self) -> &str {
        &self.claimed_species
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn posterior(&self) -> &[f64] {
        &self.posterior
    }

    pub fn posterior_claimed(&self) -> f64 {
        self.posterior[self.claimed]
    }

    pub fn asked(&self) -> &[AskedQuestion] {
        &self.asked
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn noise_eps(&self) -> f64 {
        self.noise_eps
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn pending_question(&self) -> Option<&str> {
        self.pending.map(|a| self.attributes[a].as_str())
    }

    pub fn is_asked(&self, attribute: usize) -> bool {
        self.asked_set.contains(&attribute)
    }

    /// Posterior after observing `answer` to `attribute`, unnormalized.
    fn updated(&self, attribute: usize, answer: bool) -> Vec<f64> {
        self.posterior
            .iter()
            .zip(&self.rows)
            .map(|(p, row)| p * likelihood(row[attribute] == answer, self.noise_eps))
            .collect()
    }

    /// Expected entropy reduction (bits) from asking `attribute`.
    pub fn expected_gain(&self, attribute: usize) -> f64 {
        let h = entropy_bits(&self.posterior);
        let mut expected = 0.0;
        for answer in [true, false] {
            let mut post = self.updated(attribute, answer);
            let p_answer: f64 = post.iter().sum();
            if p_answer > 0.0 && normalize(&mut post) {
                expected += p_answer * entropy_bits(&post);
            }
        }
        // Gain is non-negative; clamp rounding noise so uninformative
        // attributes score exactly zero.
        (h - expected).max(0.0)
    }

    /// Pick and remember the unasked attribute with the largest expected gain.
    ///
    /// Ties go to the earlier attribute. `None` once every attribute is asked.
    pub fn next_question(&mut self) -> Result<Option<&str>, VerifyError> {
        self.ensure_open()?;
        let mut best: Option<(usize, f64)> = None;
        for a in (0..self.attributes.len()).filter(|a| !self.asked_set.contains(a)) {
            let gain = self.expected_gain(a);
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((a, gain));
            }
        }
        self.pending = best.map(|(a, _)| a);
        Ok(self.pending_question())
    }

    /// Apply the answer to the pending question and advance the status.
    pub fn submit_answer(&mut self, attribute: &str, answer: Answer) -> Result<Status, VerifyError> {
        self.ensure_open()?;
        let Some(pending) = self.pending.filter(|&p| self.attributes[p] == attribute) else {
            return Err(VerifyError::WrongAttribute {
                expected: self.pending_question().unwrap_or("<none>").to_string(),
                got: attribute.to_string(),
            });
        };
        self.pending = None;
        self.asked_set.insert(pending);
        self.asked.push(AskedQuestion {
            attribute: attribute.to_string(),
            answer,
        });

        let mut post = self.updated(pending, answer.as_bool());
        if !normalize(&mut post) {
            // Every candidate is contradicted: nothing on file matches the bird.
            self.status = Status::Rejected;
            return Ok(self.status);
        }
        self.posterior = post;
        self.status = self.decide();
        Ok(self.status)
    }

    fn decide(&self) -> Status {
        let claimed = self.posterior_claimed();
        if claimed >= self.accept_threshold {
            return Status::Verified;
        }
        if claimed <= self.reject_threshold {
            return Status::Rejected;
        }
        let exhausted = self.asked.len() >= self.budget || self.asked_set.len() == self.attributes.len();
        if !exhausted {
            return Status::Open;
        }
        let is_argmax = self.posterior.iter().all(|&p| p <= claimed);
        if is_argmax && claimed >= 0.5 {
            Status::Verified
        } else {
            Status::Inconclusive
        }
    }

    fn ensure_open(&self) -> Result<(), VerifyError> {
        match self.status {
            Status::Open => Ok(()),
            s => Err(VerifyError::SessionClosed(s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn matrix(rows: &[&[u8]]) -> AttributeMatrix {
        let species = (0..rows.len()).map(|i| alloc::format!("S{i}")).collect();
        let attrs = (0..rows[0].len()).map(|i| alloc::format!("a{i}")).collect();
        AttributeMatrix::new(species, attrs, rows.iter().map(|r| r.iter().map(|&x| x == 1).collect()).collect())
            .unwrap()
    }

    fn cfg(eps: f64) -> VerifyConfig {
        VerifyConfig {
            noise_eps: eps,
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn uniform_open() {
        let m = matrix(&[&[0, 0], &[0, 1], &[1, 0], &[1, 1]]);
        let s = VerificationSession::open("v1", "S0", m.species(), None, &m, &cfg(0.1)).unwrap();
        assert_eq!(s.posterior(), &[0.25; 4]);
        assert_eq!(s.status(), Status::Open);
    }

    #[test]
    fn open_errors() {
        let m = matrix(&[&[0, 0], &[0, 1]]);
        assert_eq!(
            VerificationSession::open("v", "S9", &names(&["S0", "S1"]), None, &m, &cfg(0.1)).unwrap_err(),
            VerifyError::UnknownSpecies("S9".into())
        );
        assert_eq!(
            VerificationSession::open("v", "S0", &names(&["S0", "S1"]), Some(vec![0.4, 0.4]), &m, &cfg(0.1))
                .unwrap_err(),
            VerifyError::BadPrior
        );
        assert_eq!(
            VerificationSession::open("v", "S0", &names(&["S0", "S7"]), None, &m, &cfg(0.1)).unwrap_err(),
            VerifyError::UnknownSpecies("S7".into())
        );
    }

    #[test]
    fn single_discriminating_attribute_gains_one_bit() {
        let m = matrix(&[&[1, 0, 1], &[1, 1, 1]]);
        let mut s = VerificationSession::open("v", "S0", m.species(), None, &m, &cfg(0.0)).unwrap();
        assert_eq!(s.expected_gain(0), 0.0);
        assert!((s.expected_gain(1) - 1.0).abs() < 1e-12);
        assert_eq!(s.next_question().unwrap(), Some("a1"));
    }

    #[test]
    fn noisy_update_matches_hand_computation() {
        let m = matrix(&[&[1], &[0]]);
        let mut s = VerificationSession::open("v", "S0", m.species(), None, &m, &cfg(0.1)).unwrap();
        s.next_question().unwrap();
        s.submit_answer("a0", Answer::Yes).unwrap();
        // 0.5 * 0.9 / (0.5 * 0.9 + 0.5 * 0.1)
        assert!((s.posterior()[0] - 0.9).abs() < 1e-12);
        assert_eq!(s.status(), Status::Verified);
    }

    #[test]
    fn contradiction_at_zero_noise_rejects() {
        let m = matrix(&[&[1, 0], &[0, 1], &[1, 1]]);
        let mut s = VerificationSession::open("v", "S0", m.species(), None, &m, &cfg(0.0)).unwrap();
        let q = s.next_question().unwrap().unwrap().to_string();
        let a = m.attribute_index(&q).unwrap();
        let contradicting = Answer::from_bool(!m.value(0, a));
        assert_eq!(s.submit_answer(&q, contradicting).unwrap(), Status::Rejected);
        assert_eq!(s.posterior_claimed(), 0.0);
        assert!(matches!(s.next_question(), Err(VerifyError::SessionClosed(Status::Rejected))));
        assert!(s.submit_answer(&q, Answer::Yes).is_err());
    }

    #[test]
    fn wrong_attribute_is_refused() {
        let m = matrix(&[&[1, 0], &[0, 1]]);
        let mut s = VerificationSession::open("v", "S0", m.species(), None, &m, &cfg(0.1)).unwrap();
        assert!(matches!(s.submit_answer("a0", Answer::Yes), Err(VerifyError::WrongAttribute { .. })));
        s.next_question().unwrap();
        assert!(matches!(s.submit_answer("zzz", Answer::Yes), Err(VerifyError::WrongAttribute { .. })));
    }

    #[test]
    fn vision_prior_examples() {
        let m = matrix(&[&[1, 1], &[1, 0], &[0, 0]]);
        let p = vision_prior(&[true, true], m.species(), &m, 0.1).unwrap();
        // [0.81, 0.09, 0.01] / 0.91
        let expected = [0.81 / 0.91, 0.09 / 0.91, 0.01 / 0.91];
        for (a, b) in p.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((p[0] - 0.8901).abs() < 1e-4 && (p[1] - 0.0989).abs() < 1e-4 && (p[2] - 0.0109).abs() < 1e-4);

        let exact = vision_prior(&[true, false], m.species(), &m, 0.0).unwrap();
        assert_eq!(exact, vec![0.0, 1.0, 0.0]);

        let flat = vision_prior(&[false, true], m.species(), &m, 0.5).unwrap();
        assert!(flat.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));

        assert_eq!(
            vision_prior(&[true], m.species(), &m, 0.1).unwrap_err(),
            VerifyError::LengthMismatch { expected: 2, got: 1 }
        );
    }

    #[test]
    fn exhausting_every_attribute_closes_the_session() {
        // Two identical rows can never be told apart.
        let m = AttributeMatrix::new(names(&["A", "B"]), names(&["x"]), vec![vec![true], vec![true]]).unwrap();
        let mut s = VerificationSession::open("v", "A", m.species(), None, &m, &cfg(0.1)).unwrap();
        assert_eq!(s.next_question().unwrap(), Some("x"));
        assert_eq!(s.submit_answer("x", Answer::Yes).unwrap(), Status::Verified);

        let m = AttributeMatrix::new(names(&["A", "B", "C"]), names(&["x"]), vec![vec![true]; 3]).unwrap();
        let mut s = VerificationSession::open("v", "A", m.species(), None, &m, &cfg(0.1)).unwrap();
        s.next_question().unwrap();
        assert_eq!(s.submit_answer("x", Answer::Yes).unwrap(), Status::Inconclusive);
    }

    #[test]
    fn matrix_validation() {
        assert!(AttributeMatrix::new(names(&["A", "A"]), names(&["x"]), vec![vec![true], vec![false]]).is_err());
        assert!(AttributeMatrix::new(names(&["A"]), names(&["x", "x"]), vec![vec![true, false]]).is_err());
        assert!(AttributeMatrix::new(names(&["A"]), names(&["x", "y"]), vec![vec![true]]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(VerifyConfig::default().validate().is_ok());
        let bad = VerifyConfig {
            reject_threshold: 0.95,
            ..VerifyConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(cfg(0.5).validate().is_err());
    }
}
