//! Synthetic planted-obstacle scenarios.
//!
//! Reference trajectories run straight along a corridor on parallel lanes and
//! cross a disk. Query trajectories use the same lanes but leave them where
//! they meet a larger concentric circle, follow that circle around the disk
//! and rejoin their lane on the far side. All tracks travel toward +x.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::eval::GroundTruthRegion;
use super::Projection;
use crate::error::{Error, Result};
use crate::model::{GeoPoint, Trajectory};

pub const TRUTH_VERTICES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioParams {
    pub reference_count: usize,
    pub query_count: usize,
    pub lanes: usize,
    pub lane_spacing_m: f64,
    pub corridor_length_m: f64,
    /// Distance between consecutive samples along a track.
    pub step_m: f64,
    /// Disk center, measured along the corridor from its midpoint.
    pub disk_offset_m: f64,
    pub disk_radius_m: f64,
    /// Gap between the disk and the circle the queries follow.
    pub detour_clearance_m: f64,
    /// Standard deviation of the positional noise on each coordinate.
    pub noise_m: f64,
    /// Detour alternately north and south instead of always north.
    pub two_sided: bool,
    pub truth_enlarge_m: f64,
    pub origin_lat: f64,
    pub origin_lon: f64,
    /// Seconds between samples when written as tracks.
    pub interval_s: i64,
    pub start_timestamp: i64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            reference_count: 50,
            query_count: 50,
            lanes: 3,
            lane_spacing_m: 150.0,
            corridor_length_m: 6000.0,
            step_m: 100.0,
            disk_offset_m: 0.0,
            disk_radius_m: 300.0,
            detour_clearance_m: 50.0,
            noise_m: 5.0,
            two_sided: false,
            truth_enlarge_m: 0.0,
            origin_lat: 1.25,
            origin_lon: 103.8,
            interval_s: 30,
            start_timestamp: 1_700_000_000,
            seed: 42,
        }
    }
}

impl ScenarioParams {
    fn lane_offset(&self, lane: usize) -> f64 {
        (lane as f64 - (self.lanes as f64 - 1.0) / 2.0) * self.lane_spacing_m
    }

    fn detour_radius(&self) -> f64 {
        self.disk_radius_m + self.detour_clearance_m
    }

    pub fn disk_center(&self) -> GeoPoint {
        GeoPoint::new(self.disk_offset_m, 0.0)
    }

    pub fn projection(&self) -> Projection {
        Projection::new(self.origin_lat, self.origin_lon)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Scenario(m));
        if self.reference_count < 10 || self.query_count < 10 {
            return bad(format!(
                "need at least 10 trajectories per corpus, got {} + {}",
                self.reference_count, self.query_count
            ));
        }
        if self.lanes == 0 {
            return bad("need at least one lane".into());
        }
        let positive = [
            ("lane spacing", self.lane_spacing_m, self.lanes == 1),
            ("corridor length", self.corridor_length_m, false),
            ("step", self.step_m, false),
            ("disk radius", self.disk_radius_m, false),
            ("detour clearance", self.detour_clearance_m, false),
        ];
        for (name, v, may_be_zero) in positive {
            if !(v.is_finite() && (v > 0.0 || (may_be_zero && v >= 0.0))) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.noise_m >= 0.0 && self.noise_m.is_finite()) || !(self.truth_enlarge_m >= 0.0) {
            return bad("noise and truth buffer must be non-negative".into());
        }
        if self.interval_s <= 0 {
            return bad(format!("interval must be positive, got {}", self.interval_s));
        }
        if !(self.origin_lat.abs() < 85.0 && self.origin_lon.abs() <= 180.0) {
            return bad("origin out of range".into());
        }
        let outer = self.lane_offset(self.lanes - 1);
        if outer >= self.disk_radius_m {
            return bad(format!(
                "outer lane at {outer} m misses the disk of radius {} m",
                self.disk_radius_m
            ));
        }
        let half = self.corridor_length_m / 2.0;
        if self.disk_offset_m.abs() + self.detour_radius() + self.step_m >= half {
            return bad("the disk and its detour do not fit inside the corridor".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub reference: Vec<Trajectory>,
    pub query: Vec<Trajectory>,
    pub truth: GroundTruthRegion,
    pub seed: u64,
}

/// A track: the lane, optionally bent around the detour circle.
struct Path {
    x0: f64,
    y0: f64,
    center: GeoPoint,
    radius: f64,
    /// `(x_in, theta_in, arc_len)` when the path detours.
    detour: Option<(f64, f64, f64)>,
    /// +1 over the north side, -1 over the south side.
    side: f64,
    length: f64,
}

impl Path {
    fn new(p: &ScenarioParams, y0: f64, detour: Option<f64>) -> Path {
        let half = p.corridor_length_m / 2.0;
        let center = p.disk_center();
        let radius = p.detour_radius();
        let side = detour.unwrap_or(1.0);
        let detour = detour.map(|_| {
            // mirror southern detours onto the northern case
            let y = y0 * side;
            let a = (y / radius).asin();
            let dx = (radius * radius - y * y).sqrt();
            (center.x - dx, std::f64::consts::PI - a, radius * (std::f64::consts::PI - 2.0 * a))
        });
        let length = match detour {
            None => 2.0 * half,
            Some((x_in, _, arc)) => 2.0 * half - 2.0 * (center.x - x_in) + arc,
        };
        Path {
            x0: -half,
            y0,
            center,
            radius,
            detour,
            side,
            length,
        }
    }

    fn at(&self, s: f64) -> GeoPoint {
        let Some((x_in, theta_in, arc)) = self.detour else {
            return GeoPoint::new(self.x0 + s, self.y0);
        };
        let before = x_in - self.x0;
        if s <= before {
            return GeoPoint::new(self.x0 + s, self.y0);
        }
        if s <= before + arc {
            let theta = theta_in - (s - before) / self.radius;
            return GeoPoint::new(
                self.center.x + self.radius * theta.cos(),
                self.side * self.radius * theta.sin(),
            );
        }
        let x_out = 2.0 * self.center.x - x_in;
        GeoPoint::new(x_out + (s - before - arc), self.y0)
    }
}

fn sample(
    path: &Path,
    step: f64,
    noise: Option<&Normal<f64>>,
    rng: &mut ChaCha8Rng,
) -> Vec<GeoPoint> {
    let phase = rng.random_range(0.0..step);
    let n = ((path.length - phase) / step).floor() as usize + 1;
    (0..n)
        .map(|i| {
            let p = path.at(phase + i as f64 * step);
            match noise {
                Some(d) => GeoPoint::new(p.x + d.sample(rng), p.y + d.sample(rng)),
                None => p,
            }
        })
        .collect()
}

pub fn truth_polygon(center: GeoPoint, radius: f64) -> Vec<GeoPoint> {
    (0..TRUTH_VERTICES)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / TRUTH_VERTICES as f64;
            GeoPoint::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        })
        .collect()
}

pub fn generate_scenario(params: &ScenarioParams) -> Result<Scenario> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = (params.noise_m > 0.0).then(|| Normal::new(0.0, params.noise_m).expect("finite noise"));
    let mut reference = Vec::with_capacity(params.reference_count);
    for i in 0..params.reference_count {
        let path = Path::new(params, params.lane_offset(i % params.lanes), None);
        let pts = sample(&path, params.step_m, noise.as_ref(), &mut rng);
        reference.push(Trajectory::new(format!("r{i:03}"), pts)?);
    }
    let mut query = Vec::with_capacity(params.query_count);
    for i in 0..params.query_count {
        let side = if params.two_sided && i % 2 == 1 { -1.0 } else { 1.0 };
        let path = Path::new(params, params.lane_offset(i % params.lanes), Some(side));
        let pts = sample(&path, params.step_m, noise.as_ref(), &mut rng);
        query.push(Trajectory::new(format!("q{i:03}"), pts)?);
    }
    let truth = GroundTruthRegion::new(
        truth_polygon(params.disk_center(), params.disk_radius_m),
        params.truth_enlarge_m,
    )?;
    Ok(Scenario {
        params: *params,
        reference,
        query,
        truth,
        seed: params.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::euclidean;

    fn noiseless() -> ScenarioParams {
        ScenarioParams {
            noise_m: 0.0,
            ..ScenarioParams::default()
        }
    }

    #[test]
    fn references_cross_and_queries_avoid_the_disk() {
        for two_sided in [false, true] {
            let p = ScenarioParams { two_sided, ..noiseless() };
            let s = generate_scenario(&p).unwrap();
            assert_eq!((s.reference.len(), s.query.len()), (50, 50));
            let c = p.disk_center();
            for t in &s.reference {
                assert!(t.points().iter().any(|&q| euclidean(q, c) < p.disk_radius_m));
            }
            for t in &s.query {
                let d = t.points().iter().map(|&q| euclidean(q, c)).fold(f64::INFINITY, f64::min);
                assert!(d > p.disk_radius_m, "{} at {d}", t.id());
            }
            if two_sided {
                assert!(s.query[1].points().iter().any(|q| q.y < -p.disk_radius_m));
            }
        }
    }

    #[test]
    fn samples_are_evenly_spaced_along_the_path() {
        let s = generate_scenario(&noiseless()).unwrap();
        for t in &s.reference {
            assert!(t.points().windows(2).all(|w| (euclidean(w[0], w[1]) - 100.0).abs() < 1e-9));
        }
        for t in &s.query {
            for w in t.points().windows(2) {
                // chords cutting a bend are shorter than the step along the path
                let d = euclidean(w[0], w[1]);
                assert!(d <= 100.0 + 1e-9 && d > 50.0, "{d}");
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scenario(&ScenarioParams::default()).unwrap();
        let b = generate_scenario(&ScenarioParams::default()).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&ScenarioParams { seed: 7, ..ScenarioParams::default() }).unwrap();
        assert_ne!(a.reference, c.reference);
    }

    #[test]
    fn truth_is_a_32_gon() {
        let s = generate_scenario(&ScenarioParams::default()).unwrap();
        assert_eq!(s.truth.polygon.len(), 32);
        assert!(s.truth.polygon.iter().all(|&v| (euclidean(v, GeoPoint::default()) - 300.0).abs() < 1e-9));
    }

    #[test]
    fn degenerate_geometry_is_rejected() {
        let d = ScenarioParams::default();
        assert!(generate_scenario(&ScenarioParams { disk_offset_m: 5000.0, ..d }).is_err());
        assert!(generate_scenario(&ScenarioParams { lane_spacing_m: 400.0, ..d }).is_err());
        assert!(generate_scenario(&ScenarioParams { reference_count: 5, ..d }).is_err());
        assert!(generate_scenario(&ScenarioParams { step_m: 0.0, ..d }).is_err());
    }

    #[test]
    fn params_serialize_with_defaults_filled() {
        let p: ScenarioParams = serde_json::from_str(r#"{"seed": 9}"#).unwrap();
        assert_eq!(p, ScenarioParams { seed: 9, ..ScenarioParams::default() });
        let text = serde_json::to_string(&ScenarioParams::default()).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioParams>(&text).unwrap(), ScenarioParams::default());
    }
}
