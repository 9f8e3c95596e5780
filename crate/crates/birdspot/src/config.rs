//! Engine configuration, loaded from one TOML file. Every key is optional.
//!
//! ```toml
//! [paths]
//! data = "checklists"          # directory of checklist CSVs, or a dataset cache
//! models = "models"
//! attributes = "attributes.csv"
//! events = "events"            # per-player JSONL logs written by the server
//!
//! [server]
//! listen = "127.0.0.1:8080"
//!
//! [suggest]
//! radius_km = 1.0
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use birdspot_core::geo::DEFAULT_CELL_SIZE_DEG;
use birdspot_core::sighting_model::{RarityThresholds, TrainConfig};
use birdspot_core::suggester::SuggestConfig;
use birdspot_core::verifier::VerifyConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub paths: Paths,
    pub server: ServerConfig,
    pub index: IndexConfig,
    pub train: TrainSection,
    pub rarity: RarityThresholds,
    pub suggest: SuggestConfig,
    pub verify: VerifyConfig,
    pub vision: VisionConfig,
    pub simulate: SimulateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: PathBuf,
    pub models: PathBuf,
    pub attributes: PathBuf,
    pub events: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            data: "dataset.bin".into(),
            models: "models".into(),
            attributes: "attributes.csv".into(),
            events: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: SocketAddr,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    pub cell_size_deg: f64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            cell_size_deg: DEFAULT_CELL_SIZE_DEG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    /// Complete checklists this close to a positive become negatives.
    pub negative_radius_km: f64,
    #[serde(flatten)]
    pub optimizer: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            negative_radius_km: 1.0,
            optimizer: TrainConfig::default(),
        }
    }
}

/// Noise assumed when turning a photo's attribute vector into a prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionConfig {
    pub eps: f64,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self { eps: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Truthful,
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub seed: u64,
    pub speed_kmh: f64,
    pub sample_interval_s: u32,
    /// Chance of spotting each not-yet-spotted suggestion at a stop.
    pub spot_probability: f64,
    /// Chance that each bit of a simulated photo is misread.
    pub photo_noise: f64,
    pub policy: PolicyKind,
    /// Answer flip probability under the noisy policy.
    pub p_flip: f64,
    pub level: u32,
    #[serde(with = "crate::formats::timestamp")]
    pub start: birdspot_core::PrimitiveDateTime,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            speed_kmh: 3.0,
            sample_interval_s: 120,
            spot_probability: 0.35,
            photo_noise: 0.0,
            policy: PolicyKind::Truthful,
            p_flip: 0.1,
            level: 1,
            start: time::macros::datetime!(2017-05-20 07:00),
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |x: f64| (0.0..=1.0).contains(&x);
        if !(self.speed_kmh.is_finite() && self.speed_kmh > 0.0) {
            return Err(Error::Config("simulate.speed_kmh must be positive".into()));
        }
        if self.sample_interval_s == 0 {
            return Err(Error::Config("simulate.sample_interval_s must be positive".into()));
        }
        if !prob(self.spot_probability) || !prob(self.photo_noise) || !prob(self.p_flip) {
            return Err(Error::Config("simulate probabilities must be in [0, 1]".into()));
        }
        if self.level == 0 {
            return Err(Error::Config("simulate.level must be at least 1".into()));
        }
        Ok(())
    }
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            cfg.paths.resolve_against(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.index.cell_size_deg.is_finite() && self.index.cell_size_deg > 0.0) {
            return Err(Error::Config("index.cell_size_deg must be positive".into()));
        }
        if !(self.train.negative_radius_km.is_finite() && self.train.negative_radius_km > 0.0) {
            return Err(Error::Config("train.negative_radius_km must be positive".into()));
        }
        self.train.optimizer.validate()?;
        self.verify.validate()?;
        let t = &self.rarity;
        if !(1.0 >= t.tier1 && t.tier1 >= t.tier2 && t.tier2 >= t.tier3 && t.tier3 >= 0.0) {
            return Err(Error::Config("rarity thresholds must satisfy 1 >= tier1 >= tier2 >= tier3 >= 0".into()));
        }
        let s = &self.suggest;
        if !(s.radius_km.is_finite() && s.radius_km > 0.0) || s.top_k == 0 || s.min_checklists == 0 {
            return Err(Error::Config("suggest.radius_km, top_k and min_checklists must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.vision.eps) {
            return Err(Error::Config("vision.eps must be in [0, 0.5)".into()));
        }
        self.simulate.validate()
    }
}

impl Paths {
    fn resolve_against(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.data);
        fix(&mut self.models);
        fix(&mut self.attributes);
        if let Some(events) = &mut self.events {
            fix(events);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(EngineConfig::from_toml("").unwrap(), EngineConfig::default());
    }

    #[test]
    fn overrides_apply() {
        let cfg = EngineConfig::from_toml(
            "[suggest]\nradius_km = 2.5\n[train]\nlearning_rate = 0.05\n[verify]\nnoise_eps = 0.0\n[simulate]\nstart = \"2018-04-01T06:30:00\"\n",
        )
        .unwrap();
        assert_eq!(cfg.suggest.radius_km, 2.5);
        assert_eq!(cfg.suggest.top_k, 10);
        assert_eq!(cfg.train.optimizer.learning_rate, 0.05);
        assert_eq!(cfg.train.optimizer.max_iters, 10_000);
        assert_eq!(cfg.verify.noise_eps, 0.0);
        assert_eq!(cfg.simulate.start, time::macros::datetime!(2018-04-01 06:30));
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(EngineConfig::from_toml("[suggest]\ntop_k = 0\n").is_err());
        assert!(EngineConfig::from_toml("[verify]\naccept_threshold = 0.01\n").is_err());
        assert!(EngineConfig::from_toml("[nonsense]\nx = 1\n").is_err());
    }
}
