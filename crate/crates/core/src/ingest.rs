//! Checklist semantics: the 14 metadata rows, species report rows, and the
//! in-memory sighting dataset with its inverted species index.
//!
//! Tokenizing CSV text into rows is the caller's job; this module works on
//! already-split [`RawRow`]s so it stays free of IO.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};
use time::{Date, Month, PrimitiveDateTime, Time};

use crate::geo::{BoundingBox, GeoPoint};

/// Metadata keys of rows 1 through 14, in file order.
pub const METADATA_KEYS: [&str; 14] = [
    "LocationName",
    "Latitude",
    "Longitude",
    "Date",
    "StartTime",
    "DurationMin",
    "ObservationType",
    "DistanceKm",
    "PartySize",
    "Complete",
    "ObserverId",
    "Notes",
    "RegionCode",
    "Reserved",
];

/// 1-based row number of the first species report row.
pub const FIRST_REPORT_ROW: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChecklistId(pub u32);

impl fmt::Display for ChecklistId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationType {
    Traveling,
    Stationary,
    Historical,
    Incidental,
}

impl ObservationType {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Traveling => "traveling",
            Self::Stationary => "stationary",
            Self::Historical => "historical",
            Self::Incidental => "incidental",
        }
    }
}

impl FromStr for ObservationType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "traveling" => Ok(Self::Traveling),
            "stationary" => Ok(Self::Stationary),
            "historical" => Ok(Self::Historical),
            "incidental" => Ok(Self::Incidental),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChecklistMeta {
    pub location_name: String,
    pub latitude: f64,
    pub longitude: f64,
    pub date: Date,
    /// Minutes since local midnight, 0..=1439.
    pub start_minute: u16,
    pub duration_min: u32,
    pub observation_type: ObservationType,
    pub distance_km: f64,
    pub party_size: u32,
    pub complete: bool,
    pub observer_id: String,
    pub notes: String,
    pub region_code: String,
}

impl ChecklistMeta {
    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.latitude, self.longitude)
            .expect("checklist coordinates are validated on parse")
    }

    /// Local date and start time of the observation.
    pub fn start(&self) -> PrimitiveDateTime {
        let time = Time::from_hms((self.start_minute / 60) as u8, (self.start_minute % 60) as u8, 0)
            .expect("start minute is validated on parse");
        PrimitiveDateTime::new(self.date, time)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SightingRecord {
    pub species: String,
    pub count: u32,
    pub field_notes: Option<String>,
    pub checklist_id: ChecklistId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checklist {
    pub id: ChecklistId,
    pub meta: ChecklistMeta,
    pub records: Vec<SightingRecord>,
}

impl Checklist {
    pub fn record(&self, species: &str) -> Option<&SightingRecord> {
        self.records.iter().find(|r| r.species == species)
    }

    pub fn contains(&self, species: &str) -> bool {
        self.record(species).is_some()
    }

    /// Rows in file order: 14 `key,value` rows followed by one row per record.
    pub fn to_rows(&self) -> Vec<Vec<String>> {
        let m = &self.meta;
        let values = [
            m.location_name.clone(),
            m.latitude.to_string(),
            m.longitude.to_string(),
            format_date(m.date),
            format!("{:02}:{:02}", m.start_minute / 60, m.start_minute % 60),
            m.duration_min.to_string(),
            m.observation_type.as_str().to_owned(),
            m.distance_km.to_string(),
            m.party_size.to_string(),
            m.complete.to_string(),
            m.observer_id.clone(),
            m.notes.clone(),
            m.region_code.clone(),
            String::new(),
        ];
        let mut rows: Vec<Vec<String>> = METADATA_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| alloc::vec![(*k).to_owned(), v])
            .collect();
        for r in &self.records {
            let mut row = alloc::vec![r.species.clone(), r.count.to_string()];
            if let Some(notes) = &r.field_notes {
                row.push(notes.clone());
            }
            rows.push(row);
        }
        rows
    }
}

fn format_date(d: Date) -> String {
    format!("{:04}-{:02}-{:02}", d.year(), u8::from(d.month()), d.day())
}

/// One tokenized input row with its 1-based row number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRow {
    pub number: usize,
    pub fields: Vec<String>,
}

impl RawRow {
    pub fn new<S: Into<String>>(number: usize, fields: impl IntoIterator<Item = S>) -> Self {
        Self {
            number,
            fields: fields.into_iter().map(Into::into).collect(),
        }
    }

    fn is_blank(&self) -> bool {
        self.fields.iter().all(|f| f.trim().is_empty())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BadValueReason {
    Empty,
    Malformed,
    OutOfRange,
    /// The value contradicts another field (e.g. non-zero distance for a
    /// stationary count).
    Inconsistent,
}

impl fmt::Display for BadValueReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Empty => "empty",
            Self::Malformed => "malformed",
            Self::OutOfRange => "out-of-range",
            Self::Inconsistent => "inconsistent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("row {0}: missing or misplaced metadata row")]
    MissingMetadataRow(usize),
    #[error("row {row}: bad {field}: {reason}")]
    BadValue {
        row: usize,
        field: &'static str,
        reason: BadValueReason,
    },
    #[error("row {row}: species `{name}` is reported twice")]
    DuplicateSpecies { row: usize, name: String },
    #[error("row {0}: no species reported")]
    EmptyReport(usize),
}

impl ParseError {
    /// 1-based row the error refers to.
    pub fn row(&self) -> usize {
        match self {
            Self::MissingMetadataRow(row) | Self::EmptyReport(row) => *row,
            Self::BadValue { row, .. } | Self::DuplicateSpecies { row, .. } => *row,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("species name is empty")]
pub struct EmptyName;

/// Normalize a common name: trim, collapse whitespace, capitalize each word.
///
/// Only the first letter of each space-separated word is upper-cased; letters
/// after a hyphen are lower-cased, so `blue-gray` becomes `Blue-gray`.
pub fn canonicalize_species(name: &str) -> Result<String, EmptyName> {
    let mut out = String::with_capacity(name.len());
    for word in name.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        let mut chars = word.chars();
        if let Some(first) = chars.next() {
            out.extend(first.to_uppercase());
            out.push_str(&chars.as_str().to_lowercase());
        }
    }
    if out.is_empty() {
        Err(EmptyName)
    } else {
        Ok(out)
    }
}

/// Build a checklist from tokenized rows.
///
/// Rows 1-14 must be the metadata keys of [`METADATA_KEYS`] in order; every
/// later non-blank row is `CommonName,Count[,FieldNotes]`.
pub fn parse_rows<I>(id: ChecklistId, rows: I) -> Result<Checklist, ParseError>
where
    I: IntoIterator<Item = RawRow>,
{
    let mut meta_rows: [Option<RawRow>; 14] = Default::default();
    let mut report_rows = Vec::new();
    for row in rows {
        match row.number {
            0 => continue,
            n if n < FIRST_REPORT_ROW => meta_rows[n - 1] = Some(row),
            _ => report_rows.push(row),
        }
    }

    let mut values: [&str; 14] = [""; 14];
    for (i, slot) in meta_rows.iter().enumerate() {
        let row_no = i + 1;
        let row = slot
            .as_ref()
            .filter(|r| !r.is_blank())
            .ok_or(ParseError::MissingMetadataRow(row_no))?;
        if row.fields[0].trim() != METADATA_KEYS[i] {
            return Err(ParseError::MissingMetadataRow(row_no));
        }
        let is_reserved = row_no == 14;
        if row.fields.len() > 2 && !is_reserved {
            return Err(bad(row_no, META_FIELDS[i], BadValueReason::Malformed));
        }
        values[i] = row.fields.get(1).map(|s| s.trim()).unwrap_or("");
    }
    let meta = parse_meta(&values)?;

    let mut records: Vec<SightingRecord> = Vec::new();
    let mut seen = BTreeSet::new();
    report_rows.sort_by_key(|r| r.number);
    for row in report_rows.iter().filter(|r| !r.is_blank()) {
        let n = row.number;
        if !(2..=3).contains(&row.fields.len()) {
            return Err(bad(n, "row", BadValueReason::Malformed));
        }
        let species = canonicalize_species(&row.fields[0])
            .map_err(|_| bad(n, "common_name", BadValueReason::Empty))?;
        let count = parse_positive(n, "count", row.fields[1].trim())?;
        if !seen.insert(species.clone()) {
            return Err(ParseError::DuplicateSpecies { row: n, name: species });
        }
        let field_notes = row
            .fields
            .get(2)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(ToOwned::to_owned);
        records.push(SightingRecord {
            species,
            count,
            field_notes,
            checklist_id: id,
        });
    }
    if records.is_empty() {
        return Err(ParseError::EmptyReport(FIRST_REPORT_ROW));
    }
    Ok(Checklist { id, meta, records })
}

const META_FIELDS: [&str; 14] = [
    "location_name",
    "latitude",
    "longitude",
    "date",
    "start_time",
    "duration_min",
    "observation_type",
    "distance_km",
    "party_size",
    "complete",
    "observer_id",
    "notes",
    "region_code",
    "reserved",
];

fn bad(row: usize, field: &'static str, reason: BadValueReason) -> ParseError {
    ParseError::BadValue { row, field, reason }
}

fn parse_meta(v: &[&str; 14]) -> Result<ChecklistMeta, ParseError> {
    let non_empty = |i: usize| -> Result<String, ParseError> {
        if v[i].is_empty() {
            Err(bad(i + 1, META_FIELDS[i], BadValueReason::Empty))
        } else {
            Ok(v[i].to_owned())
        }
    };
    let location_name = non_empty(0)?;
    let latitude = parse_bounded(2, "latitude", v[1], -90.0, 90.0)?;
    let longitude = parse_bounded(3, "longitude", v[2], -180.0, 180.0)?;
    let date = parse_date(4, v[3])?;
    let start_minute = parse_clock(5, v[4])?;
    let duration_min = parse_positive(6, "duration_min", v[5])?;
    let observation_type = v[6]
        .parse::<ObservationType>()
        .map_err(|_| bad(7, "observation_type", BadValueReason::Malformed))?;
    let distance_km = parse_bounded(8, "distance_km", v[7], 0.0, f64::MAX)?;
    if observation_type == ObservationType::Stationary && distance_km != 0.0 {
        return Err(bad(8, "distance_km", BadValueReason::Inconsistent));
    }
    let party_size = parse_positive(9, "party_size", v[8])?;
    let complete = match v[9] {
        "true" => true,
        "false" => false,
        _ => return Err(bad(10, "complete", BadValueReason::Malformed)),
    };
    let observer_id = non_empty(10)?;
    Ok(ChecklistMeta {
        location_name,
        latitude,
        longitude,
        date,
        start_minute,
        duration_min,
        observation_type,
        distance_km,
        party_size,
        complete,
        observer_id,
        notes: v[11].to_owned(),
        region_code: v[12].to_owned(),
    })
}

fn parse_bounded(row: usize, field: &'static str, s: &str, lo: f64, hi: f64) -> Result<f64, ParseError> {
    if s.is_empty() {
        return Err(bad(row, field, BadValueReason::Empty));
    }
    let x: f64 = s.parse().map_err(|_| bad(row, field, BadValueReason::Malformed))?;
    if !x.is_finite() {
        return Err(bad(row, field, BadValueReason::Malformed));
    }
    if !(lo..=hi).contains(&x) {
        return Err(bad(row, field, BadValueReason::OutOfRange));
    }
    Ok(x)
}

fn parse_positive(row: usize, field: &'static str, s: &str) -> Result<u32, ParseError> {
    if s.is_empty() {
        return Err(bad(row, field, BadValueReason::Empty));
    }
    if !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad(row, field, BadValueReason::Malformed));
    }
    match s.parse::<u32>() {
        Ok(0) | Err(_) => Err(bad(row, field, BadValueReason::OutOfRange)),
        Ok(n) => Ok(n),
    }
}

fn digits(s: &str, len: usize) -> Option<u32> {
    (s.len() == len && s.bytes().all(|b| b.is_ascii_digit()))
        .then(|| s.parse().ok())
        .flatten()
}

fn parse_date(row: usize, s: &str) -> Result<Date, ParseError> {
    let malformed = || bad(row, "date", BadValueReason::Malformed);
    let mut parts = s.split('-');
    let (y, m, d) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
        (Some(y), Some(m), Some(d), None) => (
            digits(y, 4).ok_or_else(malformed)?,
            digits(m, 2).ok_or_else(malformed)?,
            digits(d, 2).ok_or_else(malformed)?,
        ),
        _ => return Err(malformed()),
    };
    let month = Month::try_from(m as u8).map_err(|_| bad(row, "date", BadValueReason::OutOfRange))?;
    Date::from_calendar_date(y as i32, month, d as u8)
        .map_err(|_| bad(row, "date", BadValueReason::OutOfRange))
}

fn parse_clock(row: usize, s: &str) -> Result<u16, ParseError> {
    let malformed = || bad(row, "start_time", BadValueReason::Malformed);
    let (h, m) = s.split_once(':').ok_or_else(malformed)?;
    let h = digits(h, 2).ok_or_else(malformed)?;
    let m = digits(m, 2).ok_or_else(malformed)?;
    if h > 23 || m > 59 {
        return Err(bad(row, "start_time", BadValueReason::OutOfRange));
    }
    Ok((h * 60 + m) as u16)
}

pub type SpeciesIndex = BTreeMap<String, Vec<(ChecklistId, u32)>>;

/// All loaded checklists plus the species → (checklist, count) inversion.
///
/// Checklist ids are dense: the checklist with id `n` is `checklists()[n]`.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    checklists: Vec<Checklist>,
    species_index: SpeciesIndex,
    region_bounds: Option<BoundingBox>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collect checklists, re-assigning ids in iteration order.
    pub fn from_checklists(checklists: impl IntoIterator<Item = Checklist>) -> Self {
        let mut ds = Self::new();
        for c in checklists {
            ds.insert(c);
        }
        ds
    }

    /// Append a checklist, assigning it the next id and updating the index.
    pub fn insert(&mut self, mut checklist: Checklist) -> ChecklistId {
        let id = ChecklistId(self.checklists.len() as u32);
        checklist.id = id;
        for r in &mut checklist.records {
            r.checklist_id = id;
            self.species_index
                .entry(r.species.clone())
                .or_default()
                .push((id, r.count));
        }
        let p = checklist.meta.point();
        match &mut self.region_bounds {
            Some(b) => b.extend(p),
            None => self.region_bounds = Some(BoundingBox::of_point(p)),
        }
        self.checklists.push(checklist);
        id
    }

    pub fn checklists(&self) -> &[Checklist] {
        &self.checklists
    }

    pub fn checklist(&self, id: ChecklistId) -> Option<&Checklist> {
        self.checklists.get(id.0 as usize)
    }

    pub fn len(&self) -> usize {
        self.checklists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checklists.is_empty()
    }

    pub fn species_index(&self) -> &SpeciesIndex {
        &self.species_index
    }

    pub fn species(&self) -> impl Iterator<Item = &str> {
        self.species_index.keys().map(String::as_str)
    }

    pub fn contains_species(&self, species: &str) -> bool {
        self.species_index.contains_key(species)
    }

    pub fn region_bounds(&self) -> Option<BoundingBox> {
        self.region_bounds
    }

    /// Recompute the species index from the checklists alone.
    pub fn rebuild_species_index(&self) -> SpeciesIndex {
        let mut index = SpeciesIndex::new();
        for c in &self.checklists {
            for r in &c.records {
                index.entry(r.species.clone()).or_default().push((c.id, r.count));
            }
        }
        index
    }

    /// Median reported count of `species` over the whole dataset.
    pub fn median_count(&self, species: &str) -> Option<f64> {
        let mut counts: Vec<u32> = self.species_index.get(species)?.iter().map(|&(_, n)| n).collect();
        counts.sort_unstable();
        let mid = counts.len() / 2;
        Some(if counts.len() % 2 == 1 {
            counts[mid] as f64
        } else {
            (counts[mid - 1] as f64 + counts[mid] as f64) / 2.0
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn meta_rows(overrides: &[(usize, &str)]) -> Vec<RawRow> {
        let mut values = [
            "Johns Springs Shelter",
            "37.3806",
            "-80.0753",
            "2017-06-15",
            "07:30",
            "90",
            "traveling",
            "2.4",
            "2",
            "true",
            "obs-1",
            "",
            "US-VA",
            "",
        ];
        for &(row, v) in overrides {
            values[row - 1] = v;
        }
        METADATA_KEYS
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (k, v))| RawRow::new(i + 1, [*k, v]))
            .collect()
    }

    fn with_report(mut rows: Vec<RawRow>, report: &[&[&str]]) -> Vec<RawRow> {
        for (i, fields) in report.iter().enumerate() {
            rows.push(RawRow::new(FIRST_REPORT_ROW + i, fields.iter().copied()));
        }
        rows
    }

    #[test]
    fn parses_single_record() {
        let rows = with_report(meta_rows(&[]), &[&["American Crow", "3"]]);
        let c = parse_rows(ChecklistId(0), rows).unwrap();
        assert_eq!(c.records.len(), 1);
        assert_eq!(c.records[0].species, "American Crow");
        assert_eq!(c.records[0].count, 3);
        assert_eq!(c.records[0].field_notes, None);
        assert_eq!(c.meta.start_minute, 450);
        assert_eq!(c.meta.observation_type, ObservationType::Traveling);
    }

    #[test]
    fn empty_report() {
        assert_eq!(
            parse_rows(ChecklistId(0), meta_rows(&[])),
            Err(ParseError::EmptyReport(15))
        );
    }

    #[test]
    fn longitude_out_of_range() {
        let rows = with_report(meta_rows(&[(3, "200.0")]), &[&["American Crow", "3"]]);
        assert_eq!(
            parse_rows(ChecklistId(0), rows),
            Err(ParseError::BadValue {
                row: 3,
                field: "longitude",
                reason: BadValueReason::OutOfRange
            })
        );
    }

    #[test]
    fn stationary_with_distance_is_inconsistent() {
        let rows = with_report(meta_rows(&[(7, "stationary")]), &[&["American Crow", "3"]]);
        assert_eq!(
            parse_rows(ChecklistId(0), rows).unwrap_err(),
            bad(8, "distance_km", BadValueReason::Inconsistent)
        );
        let rows = with_report(meta_rows(&[(7, "stationary"), (8, "0")]), &[&["American Crow", "3"]]);
        assert!(parse_rows(ChecklistId(0), rows).is_ok());
    }

    #[test]
    fn duplicate_after_canonicalization() {
        let rows = with_report(
            meta_rows(&[]),
            &[&["Pine Warbler", "1"], &["pine  warbler", "2"]],
        );
        assert_eq!(
            parse_rows(ChecklistId(0), rows),
            Err(ParseError::DuplicateSpecies {
                row: 16,
                name: "Pine Warbler".into()
            })
        );
    }

    #[test]
    fn missing_and_misordered_metadata() {
        let mut rows = meta_rows(&[]);
        rows.remove(4);
        assert_eq!(
            parse_rows(ChecklistId(0), rows).unwrap_err(),
            ParseError::MissingMetadataRow(5)
        );
        let mut rows = meta_rows(&[]);
        rows[1].fields[0] = "Longitude".into();
        assert_eq!(
            parse_rows(ChecklistId(0), rows).unwrap_err(),
            ParseError::MissingMetadataRow(2)
        );
    }

    #[test]
    fn bad_clock_date_and_counts() {
        let report: &[&[&str]] = &[&["American Crow", "3"]];
        let err = |o: &[(usize, &str)]| parse_rows(ChecklistId(0), with_report(meta_rows(o), report)).unwrap_err();
        assert_eq!(err(&[(5, "24:00")]), bad(5, "start_time", BadValueReason::OutOfRange));
        assert_eq!(err(&[(5, "7:30")]), bad(5, "start_time", BadValueReason::Malformed));
        assert_eq!(err(&[(4, "2017-02-30")]), bad(4, "date", BadValueReason::OutOfRange));
        assert_eq!(err(&[(4, "15/06/2017")]), bad(4, "date", BadValueReason::Malformed));
        assert_eq!(err(&[(6, "0")]), bad(6, "duration_min", BadValueReason::OutOfRange));
        assert_eq!(err(&[(10, "yes")]), bad(10, "complete", BadValueReason::Malformed));
        assert_eq!(err(&[(2, "nan")]), bad(2, "latitude", BadValueReason::Malformed));

        let rows = with_report(meta_rows(&[]), &[&["American Crow", "X"]]);
        assert_eq!(parse_rows(ChecklistId(0), rows).unwrap_err(), bad(15, "count", BadValueReason::Malformed));
        let rows = with_report(meta_rows(&[]), &[&["   ", "2"]]);
        assert_eq!(parse_rows(ChecklistId(0), rows).unwrap_err(), bad(15, "common_name", BadValueReason::Empty));
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize_species("  american   crow ").unwrap(), "American Crow");
        assert_eq!(canonicalize_species("blue-gray gnatcatcher").unwrap(), "Blue-gray Gnatcatcher");
        assert_eq!(canonicalize_species("BLUE-GRAY GNATCATCHER").unwrap(), "Blue-gray Gnatcatcher");
        assert_eq!(canonicalize_species("cooper's hawk").unwrap(), "Cooper's Hawk");
        assert_eq!(canonicalize_species(""), Err(EmptyName));
        assert_eq!(canonicalize_species(" \t "), Err(EmptyName));
    }

    #[test]
    fn rows_round_trip() {
        let rows = with_report(
            meta_rows(&[(12, "foggy ridge")]),
            &[&["Black Vulture", "4", "soaring over the knob"], &["Pine Warbler", "1"]],
        );
        let c = parse_rows(ChecklistId(0), rows).unwrap();
        let again = c
            .to_rows()
            .into_iter()
            .enumerate()
            .map(|(i, f)| RawRow::new(i + 1, f));
        assert_eq!(parse_rows(ChecklistId(0), again).unwrap(), c);
    }

    #[test]
    fn dataset_index_and_median() {
        let mk = |counts: &[(&str, u32)]| {
            let mut rows = meta_rows(&[]);
            for (i, (species, n)) in counts.iter().enumerate() {
                rows.push(RawRow::new(FIRST_REPORT_ROW + i, [species.to_string(), n.to_string()]));
            }
            parse_rows(ChecklistId(99), rows).unwrap()
        };
        let ds = Dataset::from_checklists([
            mk(&[("American Crow", 2), ("Pine Warbler", 1)]),
            mk(&[("American Crow", 4)]),
            mk(&[("American Crow", 9)]),
        ]);
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.checklist(ChecklistId(2)).unwrap().records[0].checklist_id, ChecklistId(2));
        assert_eq!(ds.species_index().len(), 2);
        assert_eq!(ds.rebuild_species_index(), *ds.species_index());
        assert_eq!(ds.median_count("American Crow"), Some(4.0));
        assert_eq!(ds.median_count("Pine Warbler"), Some(1.0));
        assert_eq!(ds.median_count("Fish Crow"), None);
    }
}
