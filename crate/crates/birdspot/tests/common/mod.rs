#![allow(dead_code)]

use std::path::PathBuf;

use birdspot::checklist_file::load_dataset_from;
use birdspot::config::EngineConfig;
use birdspot::formats::{read_attributes, read_route};
use birdspot::Engine;
use birdspot_core::geo::Route;

pub const FOUR: [&str; 4] = ["Black Vulture", "American Crow", "Pine Warbler", "Blue-gray Gnatcatcher"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn mcafee() -> PathBuf {
    fixtures().join("mcafee")
}

pub fn fixture_config() -> EngineConfig {
    EngineConfig::load(&mcafee().join("config.toml")).unwrap()
}

pub fn fixture_route() -> Route {
    read_route(&mcafee().join("route.json")).unwrap()
}

/// Engine trained in-process on the McAfee checklists.
pub fn fixture_engine() -> Engine {
    let config = fixture_config();
    let dataset = load_dataset_from(std::slice::from_ref(&config.paths.data)).unwrap();
    let matrix = read_attributes(&config.paths.attributes).unwrap();
    Engine::train(config, dataset, matrix).unwrap()
}

pub fn checklist_files() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(mcafee().join("checklists"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}
