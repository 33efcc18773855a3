//! GeoJSON output for obstacles and ground truth, and the readers used by
//! evaluation. Coordinates are `[lon, lat]`; object keys are written sorted.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::eval::{GroundTruthRegion, ObstacleShape, DEFAULT_ENLARGE_M};
use super::Projection;
use crate::detector::DetectionResult;
use crate::error::{Error, Result};
use crate::model::GeoPoint;

fn lonlat(p: GeoPoint, proj: &Projection) -> Value {
    let (lat, lon) = proj.unproject(p);
    json!([lon, lat])
}

fn closed_ring(ring: &[GeoPoint], proj: &Projection) -> Value {
    let mut coords: Vec<Value> = ring.iter().map(|&p| lonlat(p, proj)).collect();
    coords.push(coords[0].clone());
    Value::Array(coords)
}

/// Point, LineString or Polygon depending on the number of hull vertices.
fn hull_geometry(hull: &[GeoPoint], proj: &Projection) -> Value {
    match hull.len() {
        1 => json!({"type": "Point", "coordinates": lonlat(hull[0], proj)}),
        2 => json!({
            "type": "LineString",
            "coordinates": [lonlat(hull[0], proj), lonlat(hull[1], proj)],
        }),
        _ => json!({"type": "Polygon", "coordinates": [closed_ring(hull, proj)]}),
    }
}

/// Compass bearing in degrees of a planar direction (0 = north, 90 = east).
pub fn bearing_deg(heading: GeoPoint) -> f64 {
    heading.x.atan2(heading.y).to_degrees().rem_euclid(360.0)
}

pub fn obstacles_to_geojson(result: &DetectionResult, proj: &Projection) -> Value {
    let mut features = Vec::new();
    for (i, o) in result.obstacles.iter().enumerate() {
        let props = json!({
            "obstacle": i,
            "candidates": o.candidate_subs.len(),
            "heading": [o.mean_heading.x, o.mean_heading.y],
            "heading_deg": bearing_deg(o.mean_heading),
        });
        let mut hull_props = props.clone();
        hull_props["role"] = json!("hull");
        features.push(json!({
            "type": "Feature",
            "geometry": hull_geometry(&o.hull, proj),
            "properties": hull_props,
        }));
        let mut point_props = props;
        point_props["role"] = json!("last_points");
        let coords: Vec<Value> = o.points.iter().map(|&p| lonlat(p, proj)).collect();
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "MultiPoint", "coordinates": coords},
            "properties": point_props,
        }));
    }
    json!({"type": "FeatureCollection", "features": features})
}

pub fn truths_to_geojson(truths: &[GroundTruthRegion], proj: &Projection) -> Value {
    let features: Vec<Value> = truths
        .iter()
        .map(|t| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [closed_ring(&t.polygon, proj)]},
                "properties": {"enlarge_m": t.enlarge_m},
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn to_canonical_string(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values always serialize");
    s.push('\n');
    s
}

pub fn write_geojson(value: &Value, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_canonical_string(value)).map_err(|e| Error::io(path, e))
}

pub fn export_geojson(result: &DetectionResult, proj: &Projection, path: impl AsRef<Path>) -> Result<()> {
    write_geojson(&obstacles_to_geojson(result, proj), path)
}

pub fn read_geojson(path: impl AsRef<Path>) -> Result<Value> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::GeoJson(format!("{}: {e}", path.display())))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::GeoJson(msg.into())
}

fn features(doc: &Value) -> Result<&Vec<Value>> {
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(bad("expected a FeatureCollection"));
    }
    doc.get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| bad("FeatureCollection without a features array"))
}

fn position(v: &Value) -> Result<(f64, f64)> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([lon, lat, ..]) => match (lon.as_f64(), lat.as_f64()) {
            (Some(lon), Some(lat)) => Ok((lat, lon)),
            _ => Err(bad("non-numeric position")),
        },
        _ => Err(bad("position needs two numbers")),
    }
}

fn positions(v: &Value) -> Result<Vec<(f64, f64)>> {
    v.as_array()
        .ok_or_else(|| bad("expected an array of positions"))?
        .iter()
        .map(position)
        .collect()
}

fn open_ring(mut ring: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

/// Every coordinate in a geometry, used to fit a shared projection.
pub fn all_positions(doc: &Value) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for f in features(doc)? {
        let g = &f["geometry"];
        let c = &g["coordinates"];
        match g["type"].as_str() {
            Some("Point") => out.push(position(c)?),
            Some("LineString") | Some("MultiPoint") => out.extend(positions(c)?),
            Some("Polygon") => {
                for ring in c.as_array().ok_or_else(|| bad("polygon without rings"))? {
                    out.extend(positions(ring)?);
                }
            }
            other => return Err(bad(format!("unsupported geometry {other:?}"))),
        }
    }
    Ok(out)
}

/// Obstacles from a file written by [`export_geojson`], in obstacle order.
pub fn read_obstacles(doc: &Value, proj: &Projection) -> Result<Vec<ObstacleShape>> {
    let mut by_id: BTreeMap<u64, ObstacleShape> = BTreeMap::new();
    for f in features(doc)? {
        let props = f.get("properties").and_then(Value::as_object).ok_or_else(|| bad("feature without properties"))?;
        let id = props.get("obstacle").and_then(Value::as_u64).ok_or_else(|| bad("feature without an obstacle id"))?;
        let entry = by_id.entry(id).or_insert_with(|| ObstacleShape {
            hull: Vec::new(),
            points: Vec::new(),
            heading: GeoPoint::default(),
        });
        let heading = props
            .get("heading")
            .map(position)
            .transpose()?
            .ok_or_else(|| bad("feature without a heading"))?;
        entry.heading = GeoPoint::new(heading.1, heading.0);
        let g = &f["geometry"];
        let c = &g["coordinates"];
        let project = |pts: Vec<(f64, f64)>| -> Vec<GeoPoint> {
            pts.into_iter().map(|(lat, lon)| proj.project(lat, lon)).collect()
        };
        match (props.get("role").and_then(Value::as_str), g["type"].as_str()) {
            (Some("hull"), Some("Point")) => entry.hull = project(vec![position(c)?]),
            (Some("hull"), Some("LineString")) => entry.hull = project(positions(c)?),
            (Some("hull"), Some("Polygon")) => {
                let outer = c.get(0).ok_or_else(|| bad("polygon without rings"))?;
                entry.hull = project(open_ring(positions(outer)?));
            }
            (Some("last_points"), Some("MultiPoint")) => entry.points = project(positions(c)?),
            (role, ty) => return Err(bad(format!("unexpected feature {role:?}/{ty:?}"))),
        }
    }
    let out: Vec<ObstacleShape> = by_id.into_values().collect();
    if out.iter().any(|o| o.hull.is_empty() && o.points.is_empty()) {
        return Err(bad("obstacle without geometry"));
    }
    Ok(out)
}

/// Ground-truth polygons; `enlarge_m` defaults to 2000 m when absent.
pub fn read_truths(doc: &Value, proj: &Projection) -> Result<Vec<GroundTruthRegion>> {
    let mut out = Vec::new();
    for f in features(doc)? {
        let g = &f["geometry"];
        if g["type"].as_str() != Some("Polygon") {
            return Err(bad("ground truth features must be Polygons"));
        }
        let outer = g["coordinates"].get(0).ok_or_else(|| bad("polygon without rings"))?;
        let ring = open_ring(positions(outer)?);
        let enlarge_m = match f.get("properties").and_then(|p| p.get("enlarge_m")) {
            None | Some(Value::Null) => DEFAULT_ENLARGE_M,
            Some(v) => v.as_f64().ok_or_else(|| bad("enlarge_m must be a number"))?,
        };
        let polygon = ring.into_iter().map(|(lat, lon)| proj.project(lat, lon)).collect();
        out.push(GroundTruthRegion::new(polygon, enlarge_m)?);
    }
    Ok(out)
}

/// Keys of a GeoJSON object, for tests that check the written layout.
pub fn keys(v: &Value) -> Vec<String> {
    v.as_object().map(Map::keys).into_iter().flatten().cloned().collect()
}
