//! Ranked nearby-bird suggestions for a player position.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use time::PrimitiveDateTime;

use crate::geo::{GeoPoint, GridIndex};
use crate::ingest::Dataset;
use crate::sighting_model::{featurize, CountClass, ModelError, RarityTable, RarityTier, SpeciesModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SuggestError {
    #[error("only {found} checklists nearby, need at least {required}")]
    NotEnoughData { found: usize, required: usize },
    #[error("no trained model for `{0}`")]
    MissingModel(String),
    #[error("no rarity entry for `{0}`")]
    MissingRarity(String),
    #[error("player level must be at least 1")]
    InvalidLevel,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub species: String,
    pub probability: f64,
    pub local_frequency: f64,
    /// Distance to the nearest nearby checklist reporting the species.
    pub distance_km: f64,
    pub tier: RarityTier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuggestConfig {
    pub radius_km: f64,
    pub top_k: usize,
    pub min_checklists: usize,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        Self {
            radius_km: 1.0,
            top_k: 10,
            min_checklists: 3,
        }
    }
}

/// Immutable engine inputs a suggestion is computed from.
#[derive(Debug, Clone, Copy)]
pub struct SuggestionSources<'a> {
    pub dataset: &'a Dataset,
    pub index: &'a GridIndex,
    pub models: &'a BTreeMap<String, SpeciesModel>,
    pub rarity: &'a RarityTable,
}

/// Highest rarity tier a player at `level` may be shown.
pub fn unlocked_tier(level: u32) -> RarityTier {
    RarityTier::new(level.clamp(1, 4) as u8).expect("clamped into 1..=4")
}

/// Canonical output order: probability desc, local frequency desc, name asc.
pub fn suggestion_order(a: &Suggestion, b: &Suggestion) -> Ordering {
    b.probability
        .total_cmp(&a.probability)
        .then(b.local_frequency.total_cmp(&a.local_frequency))
        .then_with(|| a.species.cmp(&b.species))
}

struct Local {
    checklists: usize,
    nearest_km: f64,
}

/// Suggest species likely to be seen near `position` at `timestamp`.
///
/// Species are shortlisted by the share of nearby checklists reporting them
/// (top `top_k`), scored by their sighting model with an unknown count class,
/// filtered to the tiers unlocked at `player_level`, and sorted by
/// [`suggestion_order`].
pub fn suggest(
    sources: SuggestionSources<'_>,
    position: GeoPoint,
    timestamp: PrimitiveDateTime,
    player_level: u32,
    cfg: &SuggestConfig,
) -> Result<Vec<Suggestion>, SuggestError> {
    if player_level == 0 {
        return Err(SuggestError::InvalidLevel);
    }
    let nearby = sources.index.query_radius_with_distance(position, cfg.radius_km);
    if nearby.len() < cfg.min_checklists.max(1) {
        return Err(SuggestError::NotEnoughData {
            found: nearby.len(),
            required: cfg.min_checklists,
        });
    }

    let mut local: BTreeMap<&str, Local> = BTreeMap::new();
    for &(id, dist) in &nearby {
        let Some(checklist) = sources.dataset.checklist(id) else { continue };
        for record in &checklist.records {
            let entry = local.entry(record.species.as_str()).or_insert(Local {
                checklists: 0,
                nearest_km: f64::INFINITY,
            });
            entry.checklists += 1;
            entry.nearest_km = entry.nearest_km.min(dist);
        }
    }

    let total = nearby.len() as f64;
    let mut shortlist: Vec<(&str, f64, f64)> = local
        .iter()
        .map(|(s, l)| (*s, l.checklists as f64 / total, l.nearest_km))
        .collect();
    shortlist.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    shortlist.truncate(cfg.top_k);

    let x = featurize(timestamp, CountClass::Unknown);
    let gate = unlocked_tier(player_level);
    let mut out = Vec::with_capacity(shortlist.len());
    for (species, local_frequency, distance_km) in shortlist {
        let model = sources
            .models
            .get(species)
            .ok_or_else(|| SuggestError::MissingModel(species.to_string()))?;
        let probability = model.predict(&x)?;
        let tier = sources
            .rarity
            .tier(species)
            .ok_or_else(|| SuggestError::MissingRarity(species.to_string()))?;
        if tier <= gate {
            out.push(Suggestion {
                species: species.to_string(),
                probability,
                local_frequency,
                distance_km,
                tier,
            });
        }
    }
    out.sort_by(suggestion_order);
    Ok(out)
}
