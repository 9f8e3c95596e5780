mod common;

use std::collections::BTreeSet;

use birdspot_core::geo::{haversine_km, GeoPoint, GridIndex, Route};
use birdspot_core::ingest::ChecklistId;
use common::pt;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force(points: &[GeoPoint], center: GeoPoint, radius_km: f64) -> BTreeSet<ChecklistId> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| haversine_km(center, **p) <= radius_km)
        .map(|(i, _)| ChecklistId(i as u32))
        .collect()
}

fn index_of(points: &[GeoPoint], cell: f64) -> GridIndex {
    let mut index = GridIndex::new(cell).unwrap();
    for (i, p) in points.iter().enumerate() {
        index.insert(ChecklistId(i as u32), *p);
    }
    index
}

fn any_point() -> impl Strategy<Value = GeoPoint> {
    (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(a, b)| pt(a, b))
}

/// Points clustered around a trailhead plus a sprinkling of global ones and
/// a few on the poles and the antimeridian.
fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<GeoPoint> {
    let mut v = Vec::with_capacity(n);
    for i in 0..n {
        let p = match i % 10 {
            0 => pt(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0)),
            1 => pt(rng.random_range(85.0..=90.0), rng.random_range(-180.0..=180.0)),
            2 => pt(rng.random_range(-10.0..=10.0), if rng.random_bool(0.5) { 180.0 } else { -179.999 }),
            _ => pt(37.39 + rng.random_range(-0.2..0.2), -80.04 + rng.random_range(-0.2..0.2)),
        };
        v.push(p);
    }
    v
}

#[test]
fn grid_query_equals_brute_force_on_seeded_trials() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let n = rng.random_range(1..=1000);
        let points = random_points(&mut rng, n);
        let cell = [0.02, 0.005, 0.5, 3.0][trial % 4];
        let index = index_of(&points, cell);
        for _ in 0..100 {
            let center = if rng.random_bool(0.5) {
                points[rng.random_range(0..points.len())]
            } else {
                random_points(&mut rng, 1)[0]
            };
            let radius = [0.1, 1.0, 5.0, 50.0, 800.0][rng.random_range(0..5)] * rng.random_range(0.5..1.5);
            assert_eq!(
                index.query_radius(center, radius),
                brute_force(&points, center, radius),
                "trial {trial} center {center:?} r {radius}"
            );
        }
    }
}

proptest! {
    #[test]
    fn haversine_is_symmetric_and_non_negative(a in any_point(), b in any_point()) {
        let d = haversine_km(a, b);
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, haversine_km(b, a));
    }

    #[test]
    fn grid_matches_brute_force(
        points in prop::collection::vec(any_point(), 1..200),
        center in any_point(),
        radius in 0.01f64..3000.0,
        cell in prop::sample::select(vec![0.01, 0.1, 1.0, 7.5]),
    ) {
        let index = index_of(&points, cell);
        prop_assert_eq!(index.query_radius(center, radius), brute_force(&points, center, radius));
    }

    #[test]
    fn query_is_monotone_in_radius(
        points in prop::collection::vec(any_point(), 1..200),
        center in any_point(),
        r1 in 0.0f64..2000.0,
        extra in 0.0f64..2000.0,
    ) {
        let index = index_of(&points, 1.0);
        let small = index.query_radius(center, r1);
        let large = index.query_radius(center, r1 + extra);
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn every_point_lands_in_exactly_one_floor_cell(points in prop::collection::vec(any_point(), 0..100)) {
        let cell = 0.02;
        let index = index_of(&points, cell);
        let mut seen = 0;
        for (&(la, lo), entries) in index.cells() {
            for (_, p) in entries {
                prop_assert_eq!(la, (p.lat() / cell).floor() as i64);
                prop_assert_eq!(lo, (p.lon() / cell).floor() as i64);
                seen += 1;
            }
        }
        prop_assert_eq!(seen, points.len());
    }

    #[test]
    fn center_checklist_is_always_found(points in prop::collection::vec(any_point(), 1..50), pick in 0usize..50, r in 0.001f64..10.0) {
        let index = index_of(&points, 0.02);
        let i = pick % points.len();
        prop_assert!(index.query_radius(points[i], r).contains(&ChecklistId(i as u32)));
    }

    #[test]
    fn route_length_is_sum_of_segments(wps in prop::collection::vec((37.0f64..38.0, -81.0f64..-80.0), 2..12)) {
        let wps: Vec<GeoPoint> = wps.into_iter().map(|(a, b)| pt(a, b)).collect();
        let route = Route::new("r", wps.clone()).unwrap();
        let sum: f64 = wps.windows(2).map(|w| haversine_km(w[0], w[1])).sum();
        prop_assert!((route.length_km() - sum).abs() <= 1e-9);
        prop_assert_eq!(route.position_at(0.0).unwrap(), wps[0]);
        prop_assert_eq!(route.position_at(route.length_km()).unwrap(), *wps.last().unwrap());
    }

    #[test]
    fn route_position_is_continuous(
        wps in prop::collection::vec((37.0f64..37.1, -80.1f64..-80.0), 2..8),
        frac in 0.0f64..1.0,
    ) {
        let wps: Vec<GeoPoint> = wps.into_iter().map(|(a, b)| pt(a, b)).collect();
        let route = Route::new("r", wps.clone()).unwrap();
        let s = frac * route.length_km();
        let h = 1e-7;
        let a = route.position_at((s - h).max(0.0)).unwrap();
        let b = route.position_at((s + h).min(route.length_km())).unwrap();
        prop_assert!(haversine_km(a, b) < 1e-5);
        // Joints specifically.
        let mut joint = 0.0;
        for w in wps.windows(2) {
            joint += haversine_km(w[0], w[1]);
            if joint > h && joint < route.length_km() - h {
                let a = route.position_at(joint - h).unwrap();
                let b = route.position_at(joint + h).unwrap();
                prop_assert!(haversine_km(a, b) < 1e-5);
            }
        }
    }
}

#[test]
fn empty_index_has_no_cells() {
    let ds = birdspot_core::Dataset::new();
    let index = GridIndex::build(&ds, 0.02).unwrap();
    assert_eq!(index.cell_count(), 0);
    assert!(index.query_radius(pt(0.0, 0.0), 100.0).is_empty());
}

#[test]
fn radius_smaller_than_any_distance_is_empty() {
    let points = [pt(37.0, -80.0), pt(37.1, -80.0)];
    let index = index_of(&points, 0.02);
    assert!(index.query_radius(pt(37.05, -80.05), 1.0).is_empty());
}
