//! Geographic plumbing: projection, track ingestion, GeoJSON, evaluation and
//! synthetic scenarios.

pub mod eval;
pub mod geojson;
pub mod scenario;
pub mod tracks;

use serde::{Deserialize, Serialize};

use crate::model::GeoPoint;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Local equirectangular projection about `(lat0, lon0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub lat0: f64,
    pub lon0: f64,
}

impl Projection {
    pub const fn new(lat0: f64, lon0: f64) -> Self {
        Projection { lat0, lon0 }
    }

    /// Origin at the center of the bounding box of `(lat, lon)` pairs.
    pub fn fit(coords: impl IntoIterator<Item = (f64, f64)>) -> Option<Self> {
        let mut bbox: Option<(f64, f64, f64, f64)> = None;
        for (lat, lon) in coords {
            bbox = Some(match bbox {
                None => (lat, lat, lon, lon),
                Some((a, b, c, d)) => (a.min(lat), b.max(lat), c.min(lon), d.max(lon)),
            });
        }
        bbox.map(|(a, b, c, d)| Projection::new((a + b) / 2.0, (c + d) / 2.0))
    }

    pub fn project(&self, lat: f64, lon: f64) -> GeoPoint {
        let k = std::f64::consts::PI / 180.0;
        GeoPoint::new(
            EARTH_RADIUS_M * (lon - self.lon0) * (self.lat0 * k).cos() * k,
            EARTH_RADIUS_M * (lat - self.lat0) * k,
        )
    }

    /// Inverse of [`Projection::project`]; returns `(lat, lon)`.
    pub fn unproject(&self, p: GeoPoint) -> (f64, f64) {
        let k = std::f64::consts::PI / 180.0;
        (
            self.lat0 + p.y / (EARTH_RADIUS_M * k),
            self.lon0 + p.x / (EARTH_RADIUS_M * (self.lat0 * k).cos() * k),
        )
    }
}
