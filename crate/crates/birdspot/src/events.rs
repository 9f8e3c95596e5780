//! Append-only player event logs, one JSON object per line:
//! `{"ts": "...", "event": "capture", "payload": {...}}`.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use birdspot_core::game::{GameEvent, PlayerRecord};
use birdspot_core::PrimitiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    #[serde(with = "crate::formats::timestamp")]
    pub ts: PrimitiveDateTime,
    #[serde(flatten)]
    pub event: GameEvent,
}

impl LogLine {
    pub fn new(ts: PrimitiveDateTime, event: GameEvent) -> Self {
        Self { ts, event }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

pub fn parse_event_log(text: &str) -> Result<Vec<LogLine>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}

pub fn read_event_log(path: &Path) -> Result<Vec<LogLine>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    parse_event_log(&text).map_err(|e| Error::format(path, e))
}

pub fn render_event_log(lines: &[LogLine]) -> String {
    lines.iter().map(|l| l.to_json() + "\n").collect()
}

pub fn write_event_log(path: &Path, lines: &[LogLine]) -> Result<()> {
    fs::write(path, render_event_log(lines)).map_err(|e| Error::io(path, e))
}

pub fn append_event(path: &Path, line: &LogLine) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(file, "{}", line.to_json()).map_err(|e| Error::io(path, e))
}

pub fn replay(player_id: &str, lines: &[LogLine]) -> Result<PlayerRecord> {
    Ok(PlayerRecord::replay(player_id, lines.iter().map(|l| (l.ts, &l.event)))?)
}
