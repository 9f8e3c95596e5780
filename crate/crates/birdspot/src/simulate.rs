//! Deterministic hike simulation: walk a route, take suggestions, "spot" some
//! of them, answer verification questions per a policy and score captures.

use std::collections::BTreeSet;

use birdspot_core::game::{GameEvent, HikeReport, PlayerRecord, PlayerState};
use birdspot_core::geo::Route;
use birdspot_core::suggester::Suggestion;
use birdspot_core::verifier::{Answer, Status};
use birdspot_core::PrimitiveDateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{PolicyKind, SimulateConfig};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::events::LogLine;
use crate::formats::format_timestamp;

pub const SIM_PLAYER: &str = "sim-player";
pub const SIM_HIKE: &str = "hike-1";

/// How the simulated hiker answers verification questions about the bird
/// they actually saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnswerPolicy {
    Truthful,
    /// Each answer is flipped with probability `p_flip`.
    Noisy { p_flip: f64 },
}

impl AnswerPolicy {
    pub fn from_config(cfg: &SimulateConfig) -> Self {
        match cfg.policy {
            PolicyKind::Truthful => Self::Truthful,
            PolicyKind::Noisy => Self::Noisy { p_flip: cfg.p_flip },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Start {
        ts: String,
        route: String,
        route_length_km: f64,
        seed: u64,
        expected_species: BTreeSet<String>,
    },
    Position {
        ts: String,
        progress_km: f64,
        lat: f64,
        lon: f64,
        suggestions: Vec<Suggestion>,
    },
    Sighting {
        ts: String,
        session: String,
        species: String,
        photo_attributes: Vec<u8>,
        prior_claimed: f64,
    },
    Question {
        session: String,
        attribute: String,
        answer: Answer,
        posterior_claimed: f64,
    },
    Outcome {
        session: String,
        species: String,
        status: Status,
        points_awarded: u64,
        points: u64,
        level: u32,
    },
    Finish {
        ts: String,
        report: HikeReport,
    },
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub transcript: Vec<TranscriptEntry>,
    pub events: Vec<LogLine>,
    pub report: HikeReport,
    pub player: PlayerState,
    pub attempts: usize,
    pub verified: usize,
}

impl Simulation {
    /// The transcript as JSON lines.
    pub fn render_transcript(&self) -> String {
        self.transcript
            .iter()
            .map(|e| serde_json::to_string(e).expect("transcript serializes") + "\n")
            .collect()
    }
}

fn bits(v: &[bool]) -> Vec<u8> {
    v.iter().map(|&b| b as u8).collect()
}

struct Walker<'a> {
    engine: &'a Engine,
    cfg: &'a SimulateConfig,
    policy: AnswerPolicy,
    rng: ChaCha8Rng,
    record: PlayerRecord,
    transcript: Vec<TranscriptEntry>,
    events: Vec<LogLine>,
    attempts: usize,
    verified: usize,
}

impl Walker<'_> {
    fn apply(&mut self, ts: PrimitiveDateTime, event: GameEvent) -> Result<u64> {
        let gained = self.record.apply(ts, &event)?;
        self.events.push(LogLine::new(ts, event));
        Ok(gained)
    }

    fn level(&self) -> u32 {
        self.record.player.level.max(self.cfg.level)
    }

    fn spotted(&self) -> &BTreeSet<String> {
        self.record.hikes[SIM_HIKE].spotted()
    }

    /// One verification dialogue for a bird of `species` seen at `ts`.
    fn attempt(&mut self, ts: PrimitiveDateTime, species: &str) -> Result<()> {
        let matrix = self.engine.matrix();
        let truth = matrix.row_of(species).expect("caller checked the matrix").to_vec();
        let photo: Vec<bool> = truth
            .iter()
            .map(|&b| b ^ self.rng.random_bool(self.cfg.photo_noise))
            .collect();
        self.attempts += 1;
        let session_id = format!("v{}", self.attempts);
        let mut session = self.engine.open_verification(session_id.clone(), species, &photo)?;
        self.transcript.push(TranscriptEntry::Sighting {
            ts: format_timestamp(ts),
            session: session_id.clone(),
            species: species.to_string(),
            photo_attributes: bits(&photo),
            prior_claimed: session.posterior_claimed(),
        });

        while session.status() == Status::Open {
            let Some(attribute) = session.next_question()?.map(str::to_string) else { break };
            let a = matrix.attribute_index(&attribute).expect("session attributes come from the matrix");
            let flip = match self.policy {
                AnswerPolicy::Truthful => false,
                AnswerPolicy::Noisy { p_flip } => self.rng.random_bool(p_flip),
            };
            let answer = Answer::from_bool(truth[a] ^ flip);
            session.submit_answer(&attribute, answer)?;
            self.transcript.push(TranscriptEntry::Question {
                session: session_id.clone(),
                attribute,
                answer,
                posterior_claimed: session.posterior_claimed(),
            });
        }

        let mut points_awarded = 0;
        if session.status() == Status::Verified {
            self.verified += 1;
            let tier = self
                .engine
                .rarity()
                .tier(species)
                .ok_or_else(|| Error::Suggest(birdspot_core::suggester::SuggestError::MissingRarity(species.into())))?;
            points_awarded = self.apply(
                ts,
                GameEvent::Capture {
                    species: species.to_string(),
                    tier,
                    hike_id: Some(SIM_HIKE.to_string()),
                },
            )?;
        }
        self.transcript.push(TranscriptEntry::Outcome {
            session: session_id,
            species: species.to_string(),
            status: session.status(),
            points_awarded,
            points: self.record.player.points,
            level: self.record.player.level,
        });
        Ok(())
    }
}

/// Walk `route` from `cfg.start` at `cfg.speed_kmh`, stopping every
/// `cfg.sample_interval_s` seconds and once more at the end of the route.
///
/// Everything random comes from one ChaCha8 stream seeded with `cfg.seed`,
/// so equal inputs give byte-identical transcripts.
pub fn simulate(engine: &Engine, route: &Route, cfg: &SimulateConfig) -> Result<Simulation> {
    cfg.validate()?;
    let mut w = Walker {
        engine,
        cfg,
        policy: AnswerPolicy::from_config(cfg),
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        record: PlayerRecord::new(SIM_PLAYER),
        transcript: Vec::new(),
        events: Vec::new(),
        attempts: 0,
        verified: 0,
    };

    let start = cfg.start;
    w.apply(
        start,
        GameEvent::HikeStart {
            hike_id: SIM_HIKE.into(),
            route: route.clone(),
        },
    )?;
    let expected = engine.expected_species(route, start, w.level())?;
    w.transcript.push(TranscriptEntry::Start {
        ts: format_timestamp(start),
        route: route.name().to_string(),
        route_length_km: route.length_km(),
        seed: cfg.seed,
        expected_species: expected.clone(),
    });

    let step_km = cfg.speed_kmh * cfg.sample_interval_s as f64 / 3600.0;
    let interval = time::Duration::seconds(cfg.sample_interval_s.into());
    let mut ts = start;
    let mut k = 0u64;
    loop {
        let progress = (k as f64 * step_km).min(route.length_km());
        let point = route.position_at(progress)?;
        w.apply(
            ts,
            GameEvent::Position {
                hike_id: SIM_HIKE.into(),
                lat: point.lat(),
                lon: point.lon(),
            },
        )?;
        let suggestions = engine.suggest_or_empty(point, ts, w.level())?;
        w.transcript.push(TranscriptEntry::Position {
            ts: format_timestamp(ts),
            progress_km: progress,
            lat: point.lat(),
            lon: point.lon(),
            suggestions: suggestions.clone(),
        });
        for s in &suggestions {
            // Draw for every suggestion so the stream does not depend on
            // which species happen to be spottable.
            let seen = w.rng.random_bool(cfg.spot_probability);
            if seen && !w.spotted().contains(&s.species) && engine.matrix().species_index(&s.species).is_some() {
                w.attempt(ts, &s.species)?;
            }
        }
        if progress >= route.length_km() {
            break;
        }
        k += 1;
        ts += interval;
    }

    w.apply(
        ts,
        GameEvent::HikeFinish {
            hike_id: SIM_HIKE.into(),
            expected_species: expected,
        },
    )?;
    let report = w.record.reports[SIM_HIKE].clone();
    w.transcript.push(TranscriptEntry::Finish {
        ts: format_timestamp(ts),
        report: report.clone(),
    });

    Ok(Simulation {
        transcript: w.transcript,
        events: w.events,
        report,
        player: w.record.player,
        attempts: w.attempts,
        verified: w.verified,
    })
}
