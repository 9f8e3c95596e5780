//! On-disk formats other than checklists: timestamps, routes, traces, models,
//! rarity tables, attribute matrices and the dataset cache.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use birdspot_core::geo::{GeoPoint, GpsTrace, Route, TraceSample};
use birdspot_core::ingest::Checklist;
use birdspot_core::sighting_model::{RarityEntry, RarityTable, RarityTier, SpeciesModel};
use birdspot_core::verifier::AttributeMatrix;
use birdspot_core::{Dataset, PrimitiveDateTime};
use serde::{Deserialize, Serialize};
use time::format_description::FormatItem;
use time::macros::format_description;

use crate::error::{Error, Result};

const TS_SECONDS: &[FormatItem<'_>] = format_description!("[year]-[month]-[day]T[hour]:[minute]:[second]");
const TS_MINUTES: &[FormatItem<'_>] = format_description!("[year]-[month]-[day]T[hour]:[minute]");

/// Parse a local ISO 8601 timestamp, `YYYY-MM-DDTHH:MM[:SS]`. A space may
/// stand in for the `T`.
pub fn parse_timestamp(s: &str) -> Result<PrimitiveDateTime, String> {
    let s = s.trim().replacen(' ', "T", 1);
    PrimitiveDateTime::parse(&s, TS_SECONDS)
        .or_else(|_| PrimitiveDateTime::parse(&s, TS_MINUTES))
        .map_err(|_| format!("invalid timestamp `{s}`, expected YYYY-MM-DDTHH:MM[:SS]"))
}

pub fn format_timestamp(ts: PrimitiveDateTime) -> String {
    ts.format(TS_SECONDS).expect("calendar dates format")
}

/// Serde adapter for timestamps in the textual form above.
pub mod timestamp {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(ts: &PrimitiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_timestamp(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PrimitiveDateTime, D::Error> {
        let s = String::deserialize(d)?;
        parse_timestamp(&s).map_err(serde::de::Error::custom)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_route(path: &Path) -> Result<Route> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e))
}

pub fn write_route(path: &Path, route: &Route) -> Result<()> {
    let json = serde_json::to_string_pretty(route).expect("routes serialize");
    write_text(path, &(json + "\n"))
}

/// Trace CSV: `timestamp_iso8601,lat,lon` per line, no header.
pub fn parse_trace<R: Read>(reader: R) -> Result<GpsTrace, String> {
    let mut csv = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut samples = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| e.to_string())?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).map(str::trim).ok_or(format!("line {line}: expected 3 fields"));
        let timestamp = parse_timestamp(field(0)?).map_err(|e| format!("line {line}: {e}"))?;
        let coord = |i: usize| -> Result<f64, String> {
            field(i)?.parse().map_err(|_| format!("line {line}: bad coordinate"))
        };
        let point = GeoPoint::new(coord(1)?, coord(2)?).map_err(|e| format!("line {line}: {e}"))?;
        samples.push(TraceSample { point, timestamp });
    }
    GpsTrace::from_samples(samples).map_err(|e| e.to_string())
}

pub fn read_trace(path: &Path) -> Result<GpsTrace> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trace(file).map_err(|e| Error::format(path, e))
}

pub fn write_trace<W: Write>(trace: &GpsTrace, writer: W) -> std::io::Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    for s in trace.samples() {
        csv.write_record([
            format_timestamp(s.timestamp),
            s.point.lat().to_string(),
            s.point.lon().to_string(),
        ])
        .map_err(std::io::Error::other)?;
    }
    csv.flush()
}

/// File name for a species model: lower-case words joined by `-`.
pub fn model_file_name(species: &str) -> String {
    let slug: String = species
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    format!("{}.json", slug.split('-').filter(|s| !s.is_empty()).collect::<Vec<_>>().join("-"))
}

pub fn read_model(path: &Path) -> Result<SpeciesModel> {
    let model: SpeciesModel = serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e))?;
    model.check_schema().map_err(|e| Error::format(path, e))?;
    Ok(model)
}

pub fn write_model(dir: &Path, model: &SpeciesModel) -> Result<PathBuf> {
    let path = dir.join(model_file_name(&model.species));
    let json = serde_json::to_string_pretty(model).expect("models serialize");
    write_text(&path, &(json + "\n"))?;
    Ok(path)
}

/// Every `*.json` model in `dir`, keyed by species.
pub fn read_models(dir: &Path) -> Result<BTreeMap<String, SpeciesModel>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut models = BTreeMap::new();
    for path in paths {
        let model = read_model(&path)?;
        if let Some(prev) = models.insert(model.species.clone(), model) {
            return Err(Error::format(&path, format!("second model for `{}`", prev.species)));
        }
    }
    Ok(models)
}

pub const RARITY_FILE: &str = "rarity.csv";

#[derive(Serialize, Deserialize)]
struct RarityRow {
    species: String,
    commonness: f64,
    tier: u8,
}

/// Rarity CSV with header `species,commonness,tier`.
pub fn parse_rarity<R: Read>(reader: R) -> Result<RarityTable, String> {
    let mut csv = csv::Reader::from_reader(reader);
    let mut table = RarityTable::default();
    for row in csv.deserialize::<RarityRow>() {
        let row = row.map_err(|e| e.to_string())?;
        let tier = RarityTier::new(row.tier).ok_or(format!("`{}`: tier must be 1-4", row.species))?;
        if !(0.0..=1.0).contains(&row.commonness) {
            return Err(format!("`{}`: commonness must be in [0, 1]", row.species));
        }
        table.insert(row.species, RarityEntry { commonness: row.commonness, tier });
    }
    Ok(table)
}

pub fn read_rarity(path: &Path) -> Result<RarityTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_rarity(file).map_err(|e| Error::format(path, e))
}

pub fn write_rarity(path: &Path, table: &RarityTable) -> Result<()> {
    let mut csv = csv::Writer::from_writer(Vec::new());
    for (species, entry) in table.iter() {
        csv.serialize(RarityRow {
            species: species.to_string(),
            commonness: entry.commonness,
            tier: entry.tier.get(),
        })
        .expect("rarity rows serialize");
    }
    let bytes = csv.into_inner().expect("in-memory writer");
    write_text(path, &String::from_utf8(bytes).expect("UTF-8"))
}

/// Attribute matrix CSV: header `species,<attr>...`, then one row of 0/1
/// cells per species.
pub fn parse_attributes<R: Read>(reader: R) -> Result<AttributeMatrix, String> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = csv.headers().map_err(|e| e.to_string())?.clone();
    if header.get(0) != Some("species") {
        return Err("header must start with `species`".into());
    }
    let attributes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut species = Vec::new();
    let mut values = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| e.to_string())?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .skip(1)
            .map(|cell| match cell {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(format!("line {line}: cell `{other}` is not 0 or 1")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        species.push(record[0].to_string());
        values.push(row);
    }
    AttributeMatrix::new(species, attributes, values).map_err(|e| e.to_string())
}

pub fn read_attributes(path: &Path) -> Result<AttributeMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_attributes(file).map_err(|e| Error::format(path, e))
}

const CACHE_FORMAT: &str = "birdspot-dataset";
const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheEnvelope<C> {
    format: String,
    version: u32,
    checklists: C,
}

/// Write the parsed dataset as a versioned cache file.
pub fn write_dataset_cache(path: &Path, dataset: &Dataset) -> Result<()> {
    let envelope = CacheEnvelope {
        format: CACHE_FORMAT.into(),
        version: CACHE_VERSION,
        checklists: dataset.checklists(),
    };
    write_text(path, &serde_json::to_string(&envelope).expect("datasets serialize"))
}

pub fn read_dataset_cache(path: &Path) -> Result<Dataset> {
    let envelope: CacheEnvelope<Vec<Checklist>> =
        serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, format!("not a dataset cache: {e}")))?;
    if envelope.format != CACHE_FORMAT || envelope.version != CACHE_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported cache {} v{}", envelope.format, envelope.version),
        ));
    }
    Ok(Dataset::from_checklists(envelope.checklists))
}
