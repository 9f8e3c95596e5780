//! Points, levels, hike sessions and replayable player history.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};
use time::PrimitiveDateTime;

use crate::geo::{GeoError, GeoPoint, GpsTrace, Route};
use crate::sighting_model::RarityTier;
use crate::verifier::{Status, VerificationSession};

/// Points for a first capture at tier 1; higher tiers double per step.
pub const BASE_CAPTURE_POINTS: u64 = 10;
pub const MAX_LEVEL: u32 = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("hike `{0}` is already finished")]
    HikeFinished(String),
    #[error("position timestamp is not after the previous sample")]
    NonMonotonicTime,
    #[error("unknown hike `{0}`")]
    UnknownHike(String),
    #[error("hike `{0}` already exists")]
    DuplicateHike(String),
    #[error("verification session for `{0}` is not verified")]
    NotVerified(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
}

/// Minimum points for `level`: 0, 100, 300, 700, 1500, ...
pub fn level_threshold(level: u32) -> u64 {
    // T(1) = 0, T(k+1) = 2 T(k) + 100  =>  T(k) = 100 (2^(k-1) - 1)
    100 * ((1u64 << (level.clamp(1, 63) - 1)) - 1)
}

pub fn level_for(points: u64) -> u32 {
    (1..=MAX_LEVEL)
        .rev()
        .find(|&k| points >= level_threshold(k))
        .unwrap_or(1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerState {
    pub id: String,
    pub points: u64,
    pub level: u32,
    pub captures: BTreeSet<String>,
}

impl PlayerState {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            points: 0,
            level: 1,
            captures: BTreeSet::new(),
        }
    }

    /// Add `species` to the collection; returns the points gained.
    ///
    /// A species already collected earns nothing.
    pub fn award_capture(&mut self, species: &str, tier: RarityTier) -> u64 {
        if !self.captures.insert(species.to_string()) {
            return 0;
        }
        let gained = BASE_CAPTURE_POINTS * tier.multiplier();
        self.points += gained;
        self.level = level_for(self.points);
        gained
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HikeStatus {
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HikeSession {
    pub id: String,
    pub player_id: String,
    pub route: Route,
    trace: GpsTrace,
    pub suggested: BTreeSet<String>,
    spotted: BTreeSet<String>,
    status: HikeStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HikeReport {
    pub trace_distance_km: f64,
    pub route_length_km: f64,
    pub expected_species: BTreeSet<String>,
    pub spotted: BTreeSet<String>,
    pub missed: BTreeSet<String>,
}

impl HikeSession {
    pub fn start(id: impl Into<String>, player_id: impl Into<String>, route: Route) -> Self {
        Self {
            id: id.into(),
            player_id: player_id.into(),
            route,
            trace: GpsTrace::new(),
            suggested: BTreeSet::new(),
            spotted: BTreeSet::new(),
            status: HikeStatus::Active,
        }
    }

    pub fn trace(&self) -> &GpsTrace {
        &self.trace
    }

    pub fn spotted(&self) -> &BTreeSet<String> {
        &self.spotted
    }

    pub fn status(&self) -> HikeStatus {
        self.status
    }

    fn ensure_active(&self) -> Result<(), GameError> {
        match self.status {
            HikeStatus::Active => Ok(()),
            HikeStatus::Finished => Err(GameError::HikeFinished(self.id.clone())),
        }
    }

    pub fn record_position(&mut self, point: GeoPoint, timestamp: PrimitiveDateTime) -> Result<(), GameError> {
        self.ensure_active()?;
        self.trace.push(point, timestamp).map_err(|e| match e {
            GeoError::NonMonotonicTime => GameError::NonMonotonicTime,
            other => GameError::Geo(other),
        })
    }

    pub fn note_suggested<'a>(&mut self, species: impl IntoIterator<Item = &'a str>) {
        self.suggested.extend(species.into_iter().map(ToString::to_string));
    }

    /// Mark the claimed species of a verified session as spotted on this hike.
    pub fn record_verified(&mut self, session: &VerificationSession) -> Result<(), GameError> {
        self.ensure_active()?;
        if session.status() != Status::Verified {
            return Err(GameError::NotVerified(session.claimed_species().to_string()));
        }
        self.spotted.insert(session.claimed_species().to_string());
        Ok(())
    }

    pub fn finish(&mut self, expected_species: BTreeSet<String>) -> Result<HikeReport, GameError> {
        self.ensure_active()?;
        self.status = HikeStatus::Finished;
        Ok(self.report(expected_species))
    }

    fn report(&self, expected_species: BTreeSet<String>) -> HikeReport {
        let missed = expected_species.difference(&self.spotted).cloned().collect();
        HikeReport {
            trace_distance_km: self.trace.distance_km(),
            route_length_km: self.route.length_km(),
            expected_species,
            spotted: self.spotted.clone(),
            missed,
        }
    }
}

/// One entry of a player's append-only history.
///
/// Serialized adjacently tagged: `{"event": "capture", "payload": {...}}`.
/// The event timestamp travels alongside, outside this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "payload", rename_all = "snake_case")]
pub enum GameEvent {
    HikeStart {
        hike_id: String,
        route: Route,
    },
    Position {
        hike_id: String,
        lat: f64,
        lon: f64,
    },
    Capture {
        species: String,
        tier: RarityTier,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hike_id: Option<String>,
    },
    HikeFinish {
        hike_id: String,
        expected_species: BTreeSet<String>,
    },
}

/// Player state plus hike history, rebuilt by folding [`GameEvent`]s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerRecord {
    pub player: PlayerState,
    pub hikes: BTreeMap<String, HikeSession>,
    pub reports: BTreeMap<String, HikeReport>,
}

impl PlayerRecord {
    pub fn new(player_id: impl Into<String>) -> Self {
        Self {
            player: PlayerState::new(player_id),
            hikes: BTreeMap::new(),
            reports: BTreeMap::new(),
        }
    }

    pub fn replay<'a>(
        player_id: impl Into<String>,
        events: impl IntoIterator<Item = (PrimitiveDateTime, &'a GameEvent)>,
    ) -> Result<Self, GameError> {
        let mut record = Self::new(player_id);
        for (ts, event) in events {
            record.apply(ts, event)?;
        }
        Ok(record)
    }

    fn hike_mut(&mut self, id: &str) -> Result<&mut HikeSession, GameError> {
        self.hikes.get_mut(id).ok_or_else(|| GameError::UnknownHike(id.to_string()))
    }

    /// Apply one event. Returns the points gained (non-zero only for a new capture).
    pub fn apply(&mut self, ts: PrimitiveDateTime, event: &GameEvent) -> Result<u64, GameError> {
        match event {
            GameEvent::HikeStart { hike_id, route } => {
                if self.hikes.contains_key(hike_id) {
                    return Err(GameError::DuplicateHike(hike_id.clone()));
                }
                let hike = HikeSession::start(hike_id.clone(), self.player.id.clone(), route.clone());
                self.hikes.insert(hike_id.clone(), hike);
                Ok(0)
            }
            GameEvent::Position { hike_id, lat, lon } => {
                let point = GeoPoint::new(*lat, *lon)?;
                self.hike_mut(hike_id)?.record_position(point, ts)?;
                Ok(0)
            }
            GameEvent::Capture { species, tier, hike_id } => {
                if let Some(h) = hike_id {
                    let hike = self.hike_mut(h)?;
                    hike.ensure_active()?;
                    hike.spotted.insert(species.clone());
                }
                Ok(self.player.award_capture(species, *tier))
            }
            GameEvent::HikeFinish {
                hike_id,
                expected_species,
            } => {
                let report = self.hike_mut(hike_id)?.finish(expected_species.clone())?;
                self.reports.insert(hike_id.clone(), report);
                Ok(0)
            }
        }
    }
}
