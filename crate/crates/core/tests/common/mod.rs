#![allow(dead_code)]

use birdspot_core::geo::GeoPoint;
use birdspot_core::ingest::{Checklist, ChecklistId, ChecklistMeta, ObservationType, SightingRecord};
use birdspot_core::Date;
use time::Month;

pub fn checklist(lat: f64, lon: f64, complete: bool, species: &[(&str, u32)]) -> Checklist {
    checklist_at(lat, lon, complete, (2017, Month::June, 15), 7 * 60 + 30, species)
}

pub fn checklist_at(
    lat: f64,
    lon: f64,
    complete: bool,
    (y, m, d): (i32, Month, u8),
    start_minute: u16,
    species: &[(&str, u32)],
) -> Checklist {
    let id = ChecklistId(0);
    Checklist {
        id,
        meta: ChecklistMeta {
            location_name: "test site".into(),
            latitude: lat,
            longitude: lon,
            date: Date::from_calendar_date(y, m, d).unwrap(),
            start_minute,
            duration_min: 60,
            observation_type: ObservationType::Traveling,
            distance_km: 1.0,
            party_size: 1,
            complete,
            observer_id: "tester".into(),
            notes: String::new(),
            region_code: "US-VA".into(),
        },
        records: species
            .iter()
            .map(|&(s, count)| SightingRecord {
                species: s.into(),
                count,
                field_notes: None,
                checklist_id: id,
            })
            .collect(),
    }
}

pub fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon).unwrap()
}
