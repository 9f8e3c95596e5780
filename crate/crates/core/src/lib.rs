//! Engine core for a location-based bird spotting game.
//!
//! Everything here is `no_std` with `alloc`: checklist row semantics, great-circle
//! geometry and a grid index, per-species logistic sighting models, the nearby
//! suggestion ranker, the attribute-question verifier, and player progression.
//! File formats, IO and the network service live in the `birdspot` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod game;
pub mod geo;
pub mod ingest;
pub mod sighting_model;
pub mod suggester;
pub mod verifier;

pub use geo::GeoPoint;
pub use ingest::{Checklist, ChecklistId, Dataset};
pub use time::{Date, PrimitiveDateTime};
