//! Precision, recall and F1 of detected obstacles against ground truth.
//!
//! An obstacle matches a truth region when its hull (or any of its last
//! points) lies within `enlarge_m` of the region's polygon and its mean
//! heading points toward the region: the angle between the heading and the
//! vector from the obstacle centroid to the region centroid must be below
//! `max_angle_deg`.

use serde::Serialize;

use crate::detector::DetectionResult;
use crate::error::{Error, Result};
use crate::geometry::{polygon_centroid, shape_distance};
use crate::model::GeoPoint;

pub const DEFAULT_ENLARGE_M: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRegion {
    /// Planar meters, at least three vertices, not closed.
    pub polygon: Vec<GeoPoint>,
    pub enlarge_m: f64,
}

impl GroundTruthRegion {
    pub fn new(polygon: Vec<GeoPoint>, enlarge_m: f64) -> Result<Self> {
        if polygon.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "ground truth polygon needs 3 vertices, got {}",
                polygon.len()
            )));
        }
        if !(enlarge_m >= 0.0 && enlarge_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("enlarge_m must be non-negative, got {enlarge_m}")));
        }
        Ok(GroundTruthRegion { polygon, enlarge_m })
    }
}

/// The parts of an obstacle that evaluation looks at.
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleShape {
    pub hull: Vec<GeoPoint>,
    pub points: Vec<GeoPoint>,
    pub heading: GeoPoint,
}

impl ObstacleShape {
    fn centroid(&self) -> GeoPoint {
        if self.hull.is_empty() {
            crate::geometry::mean_point(&self.points)
        } else {
            polygon_centroid(&self.hull)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// False when nothing was returned and precision is reported as 0.
    pub precision_defined: bool,
    pub returned: usize,
    pub matched_returned: usize,
    pub matched_truths: usize,
    pub truths: usize,
}

pub fn matches(o: &ObstacleShape, truth: &GroundTruthRegion, max_angle_deg: f64) -> bool {
    let near = |shape: &[GeoPoint]| !shape.is_empty() && shape_distance(shape, &truth.polygon) <= truth.enlarge_m;
    let touches = near(&o.hull) || o.points.iter().any(|p| near(std::slice::from_ref(p)));
    if !touches {
        return false;
    }
    let from = o.centroid();
    let to = polygon_centroid(&truth.polygon);
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    let (norm_h, norm_d) = (o.heading.x.hypot(o.heading.y), dx.hypot(dy));
    if norm_h == 0.0 || norm_d == 0.0 {
        return false;
    }
    let cos = (o.heading.x * dx + o.heading.y * dy) / (norm_h * norm_d);
    cos > max_angle_deg.to_radians().cos()
}

pub fn evaluate_shapes(obstacles: &[ObstacleShape], truths: &[GroundTruthRegion], max_angle_deg: f64) -> Result<EvalReport> {
    if truths.is_empty() {
        return Err(Error::InvalidParameter("no ground truth regions".into()));
    }
    let matched_returned = obstacles
        .iter()
        .filter(|o| truths.iter().any(|t| matches(o, t, max_angle_deg)))
        .count();
    let matched_truths = truths
        .iter()
        .filter(|t| obstacles.iter().any(|o| matches(o, t, max_angle_deg)))
        .count();
    let precision_defined = !obstacles.is_empty();
    let precision = if precision_defined {
        100.0 * matched_returned as f64 / obstacles.len() as f64
    } else {
        0.0
    };
    let recall = 100.0 * matched_truths as f64 / truths.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalReport {
        precision,
        recall,
        f1,
        precision_defined,
        returned: obstacles.len(),
        matched_returned,
        matched_truths,
        truths: truths.len(),
    })
}

pub fn shapes_of(result: &DetectionResult) -> Vec<ObstacleShape> {
    result
        .obstacles
        .iter()
        .map(|o| ObstacleShape {
            hull: o.hull.clone(),
            points: o.points.clone(),
            heading: o.mean_heading,
        })
        .collect()
}

/// Evaluate with the 90 degree direction rule.
pub fn evaluate(result: &DetectionResult, truths: &[GroundTruthRegion]) -> Result<EvalReport> {
    evaluate_shapes(&shapes_of(result), truths, 90.0)
}
