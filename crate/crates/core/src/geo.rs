//! Great-circle geometry, routes, GPS traces and the grid spatial index.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};
use time::PrimitiveDateTime;

use crate::ingest::{ChecklistId, Dataset};

/// Spherical Earth radius used for every distance in the engine.
pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Default cell edge for [`GridIndex`], about 2.2 km of latitude.
pub const DEFAULT_CELL_SIZE_DEG: f64 = 0.02;

// Widening applied to candidate-cell bounds so that rounding in the bound
// computation can only add cells, never drop one.
const BOUND_PAD_DEG: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("coordinate ({lat}, {lon}) is outside [-90, 90] x [-180, 180]")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("a route needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("progress {progress} km is outside the route length [0, {length}] km")]
    OutOfRange { progress: f64, length: f64 },
    #[error("trace timestamps must be strictly increasing")]
    NonMonotonicTime,
    #[error("cell size must be a positive finite number of degrees, got {0}")]
    InvalidCellSize(f64),
}

/// A WGS84-style latitude/longitude pair in decimal degrees.
///
/// Serialized as a `[lat, lon]` array, the form used by route files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
            Ok(Self { lat, lon })
        } else {
            Err(GeoError::InvalidCoordinate { lat, lon })
        }
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl TryFrom<(f64, f64)> for GeoPoint {
    type Error = GeoError;

    fn try_from((lat, lon): (f64, f64)) -> Result<Self, Self::Error> {
        GeoPoint::new(lat, lon)
    }
}

impl From<GeoPoint> for (f64, f64) {
    fn from(p: GeoPoint) -> Self {
        (p.lat, p.lon)
    }
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
///
/// Exactly symmetric in its arguments: both coordinate deltas enter through
/// their absolute value and the cosine product commutes.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let dlat = (b.lat - a.lat).abs().to_radians();
    let dlon = (b.lon - a.lon).abs().to_radians();
    let s_lat = libm::sin(dlat / 2.0);
    let s_lon = libm::sin(dlon / 2.0);
    let h = s_lat * s_lat
        + libm::cos(a.lat.to_radians()) * libm::cos(b.lat.to_radians()) * s_lon * s_lon;
    2.0 * EARTH_RADIUS_KM * libm::asin(libm::sqrt(h.clamp(0.0, 1.0)))
}

/// Sum of haversine distances over consecutive points.
pub fn path_length_km(points: &[GeoPoint]) -> f64 {
    points.windows(2).map(|w| haversine_km(w[0], w[1])).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn of_point(p: GeoPoint) -> Self {
        Self {
            min_lat: p.lat,
            max_lat: p.lat,
            min_lon: p.lon,
            max_lon: p.lon,
        }
    }

    pub fn extend(&mut self, p: GeoPoint) {
        self.min_lat = self.min_lat.min(p.lat);
        self.max_lat = self.max_lat.max(p.lat);
        self.min_lon = self.min_lon.min(p.lon);
        self.max_lon = self.max_lon.max(p.lon);
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat)
            && (self.min_lon..=self.max_lon).contains(&p.lon)
    }
}

/// A named trail given as an ordered polyline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RouteRepr", into = "RouteRepr")]
pub struct Route {
    name: String,
    waypoints: Vec<GeoPoint>,
    length_km: f64,
}

#[derive(Serialize, Deserialize)]
struct RouteRepr {
    name: String,
    waypoints: Vec<GeoPoint>,
}

impl TryFrom<RouteRepr> for Route {
    type Error = GeoError;

    fn try_from(r: RouteRepr) -> Result<Self, Self::Error> {
        Route::new(r.name, r.waypoints)
    }
}

impl From<Route> for RouteRepr {
    fn from(r: Route) -> Self {
        RouteRepr {
            name: r.name,
            waypoints: r.waypoints,
        }
    }
}

impl Route {
    pub fn new(name: impl Into<String>, waypoints: Vec<GeoPoint>) -> Result<Self, GeoError> {
        if waypoints.len() < 2 {
            return Err(GeoError::TooFewWaypoints(waypoints.len()));
        }
        let length_km = path_length_km(&waypoints);
        Ok(Self {
            name: name.into(),
            waypoints,
            length_km,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn waypoints(&self) -> &[GeoPoint] {
        &self.waypoints
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    /// The point reached after walking `progress_km` along the route.
    ///
    /// Within a segment the position is linearly interpolated in lat/lon.
    pub fn position_at(&self, progress_km: f64) -> Result<GeoPoint, GeoError> {
        if !(0.0..=self.length_km).contains(&progress_km) {
            return Err(GeoError::OutOfRange {
                progress: progress_km,
                length: self.length_km,
            });
        }
        let last = self.waypoints[self.waypoints.len() - 1];
        if progress_km >= self.length_km {
            return Ok(last);
        }
        let mut remaining = progress_km;
        for seg in self.waypoints.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let d = haversine_km(a, b);
            if remaining <= d {
                if d == 0.0 {
                    return Ok(a);
                }
                return Ok(lerp(a, b, remaining / d));
            }
            remaining -= d;
        }
        Ok(last)
    }
}

/// Free-function form of [`Route::position_at`].
pub fn route_position(route: &Route, progress_km: f64) -> Result<GeoPoint, GeoError> {
    route.position_at(progress_km)
}

fn lerp(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    if t >= 1.0 {
        return b;
    }
    GeoPoint {
        lat: a.lat + (b.lat - a.lat) * t,
        lon: a.lon + (b.lon - a.lon) * t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub point: GeoPoint,
    pub timestamp: PrimitiveDateTime,
}

/// Append-only sequence of timestamped positions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GpsTrace {
    samples: Vec<TraceSample>,
}

impl GpsTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: Vec<TraceSample>) -> Result<Self, GeoError> {
        let mut trace = Self::new();
        for s in samples {
            trace.push(s.point, s.timestamp)?;
        }
        Ok(trace)
    }

    pub fn push(&mut self, point: GeoPoint, timestamp: PrimitiveDateTime) -> Result<(), GeoError> {
        if let Some(last) = self.samples.last() {
            if timestamp <= last.timestamp {
                return Err(GeoError::NonMonotonicTime);
            }
        }
        self.samples.push(TraceSample { point, timestamp });
        Ok(())
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last_timestamp(&self) -> Option<PrimitiveDateTime> {
        self.samples.last().map(|s| s.timestamp)
    }

    pub fn points(&self) -> Vec<GeoPoint> {
        self.samples.iter().map(|s| s.point).collect()
    }

    pub fn distance_km(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| haversine_km(w[0].point, w[1].point))
            .sum()
    }
}

/// Free-function form of [`GpsTrace::distance_km`].
pub fn trace_distance_km(trace: &GpsTrace) -> f64 {
    trace.distance_km()
}

type CellKey = (i64, i64);

/// Uniform lat/lon grid over checklist locations.
///
/// A point lands in cell `(floor(lat / size), floor(lon / size))`.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size_deg: f64,
    cells: BTreeMap<CellKey, Vec<(ChecklistId, GeoPoint)>>,
    len: usize,
}

impl GridIndex {
    pub fn new(cell_size_deg: f64) -> Result<Self, GeoError> {
        if !(cell_size_deg.is_finite() && cell_size_deg > 0.0) {
            return Err(GeoError::InvalidCellSize(cell_size_deg));
        }
        Ok(Self {
            cell_size_deg,
            cells: BTreeMap::new(),
            len: 0,
        })
    }

    /// Index every checklist of `dataset` at its recorded coordinates.
    pub fn build(dataset: &Dataset, cell_size_deg: f64) -> Result<Self, GeoError> {
        let mut index = Self::new(cell_size_deg)?;
        for checklist in dataset.checklists() {
            index.insert(checklist.id, checklist.meta.point());
        }
        Ok(index)
    }

    pub fn insert(&mut self, id: ChecklistId, point: GeoPoint) {
        let key = self.cell_of(point);
        self.cells.entry(key).or_default().push((id, point));
        self.len += 1;
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    pub fn cell_of(&self, p: GeoPoint) -> (i64, i64) {
        (self.cell_coord(p.lat), self.cell_coord(p.lon))
    }

    fn cell_coord(&self, deg: f64) -> i64 {
        libm::floor(deg / self.cell_size_deg) as i64
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cells(&self) -> impl Iterator<Item = (&(i64, i64), &[(ChecklistId, GeoPoint)])> {
        self.cells.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Checklists within `radius_km` of `center`, by exact haversine distance.
    pub fn query_radius(&self, center: GeoPoint, radius_km: f64) -> BTreeSet<ChecklistId> {
        let mut out = BTreeSet::new();
        self.visit_within(center, radius_km, |id, _| {
            out.insert(id);
        });
        out
    }

    /// Like [`query_radius`](Self::query_radius) but also reports each distance,
    /// ordered by checklist id.
    pub fn query_radius_with_distance(
        &self,
        center: GeoPoint,
        radius_km: f64,
    ) -> Vec<(ChecklistId, f64)> {
        let mut out = Vec::new();
        self.visit_within(center, radius_km, |id, d| out.push((id, d)));
        out.sort_by_key(|&(id, _)| id);
        out
    }

    fn visit_within(&self, center: GeoPoint, radius_km: f64, mut visit: impl FnMut(ChecklistId, f64)) {
        if radius_km.is_nan() || radius_km < 0.0 || self.cells.is_empty() {
            return;
        }
        let window = CandidateWindow::new(center, radius_km);
        let lat_lo = self.cell_coord(window.lat_lo);
        let lat_hi = self.cell_coord(window.lat_hi);
        let lon_cells: Vec<(i64, i64)> = window
            .lon_ranges
            .iter()
            .map(|&(lo, hi)| (self.cell_coord(lo), self.cell_coord(hi)))
            .collect();

        let mut check_cell = |entries: &[(ChecklistId, GeoPoint)]| {
            for &(id, p) in entries {
                let d = haversine_km(center, p);
                if d <= radius_km {
                    visit(id, d);
                }
            }
        };

        let rows = (lat_hi - lat_lo + 1) as u64;
        if rows.saturating_mul(lon_cells.len() as u64) > self.cells.len() as u64 {
            // Sweeping occupied cells is cheaper than probing every candidate row.
            let band = self.cells.range((lat_lo, i64::MIN)..=(lat_hi, i64::MAX));
            for (&(_, lon_cell), entries) in band {
                if lon_cells.iter().any(|&(lo, hi)| (lo..=hi).contains(&lon_cell)) {
                    check_cell(entries);
                }
            }
        } else {
            for row in lat_lo..=lat_hi {
                for &(lo, hi) in &lon_cells {
                    for (_, entries) in self.cells.range((row, lo)..=(row, hi)) {
                        check_cell(entries);
                    }
                }
            }
        }
    }
}

/// Free-function form of [`GridIndex::build`].
pub fn build_index(dataset: &Dataset, cell_size_deg: f64) -> Result<GridIndex, GeoError> {
    GridIndex::build(dataset, cell_size_deg)
}

/// Free-function form of [`GridIndex::query_radius`].
pub fn query_radius(index: &GridIndex, center: GeoPoint, radius_km: f64) -> BTreeSet<ChecklistId> {
    index.query_radius(center, radius_km)
}

/// Degree-space window guaranteed to contain the spherical cap of the query.
struct CandidateWindow {
    lat_lo: f64,
    lat_hi: f64,
    lon_ranges: Vec<(f64, f64)>,
}

impl CandidateWindow {
    fn new(center: GeoPoint, radius_km: f64) -> Self {
        let full = || alloc::vec![(-180.0, 180.0)];
        let angular = radius_km / EARTH_RADIUS_KM;
        if angular >= PI {
            return Self {
                lat_lo: -90.0,
                lat_hi: 90.0,
                lon_ranges: full(),
            };
        }
        let dlat = angular.to_degrees() + BOUND_PAD_DEG;
        let lat_lo = (center.lat - dlat).max(-90.0);
        let lat_hi = (center.lat + dlat).min(90.0);
        if center.lat - dlat <= -90.0 || center.lat + dlat >= 90.0 {
            // The cap contains a pole: every longitude is reachable.
            return Self {
                lat_lo,
                lat_hi,
                lon_ranges: full(),
            };
        }
        let s = libm::sin(angular) / libm::cos(center.lat.to_radians());
        if s >= 1.0 {
            return Self {
                lat_lo,
                lat_hi,
                lon_ranges: full(),
            };
        }
        let dlon = libm::asin(s).to_degrees() + BOUND_PAD_DEG;
        let (lo, hi) = (center.lon - dlon, center.lon + dlon);
        let lon_ranges = if hi - lo >= 360.0 {
            full()
        } else if lo < -180.0 {
            alloc::vec![(-180.0, hi), (lo + 360.0, 180.0)]
        } else if hi > 180.0 {
            alloc::vec![(lo, 180.0), (-180.0, hi - 360.0)]
        } else {
            alloc::vec![(lo, hi)]
        };
        Self {
            lat_lo,
            lat_hi,
            lon_ranges,
        }
    }
}
