//! Track CSV ingestion and fixed-rate resampling.
//!
//! Input rows are `track_id,timestamp,lat,lon` with integer epoch seconds.
//! Rows may appear in any order; samples are grouped by track in order of
//! first appearance and sorted by time.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::Projection;
use crate::error::{Error, Result};
use crate::model::{GeoPoint, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTrack {
    pub id: String,
    /// Strictly increasing in time.
    pub samples: Vec<Sample>,
}

#[derive(Deserialize)]
struct Row {
    track_id: String,
    timestamp: i64,
    lat: f64,
    lon: f64,
}

pub fn load_tracks(path: impl AsRef<Path>) -> Result<Vec<RawTrack>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_tracks(file, path)
}

/// Parse tracks from any reader; `path` only labels errors.
pub fn read_tracks(reader: impl std::io::Read, path: &Path) -> Result<Vec<RawTrack>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    let mut order: HashMap<String, usize> = HashMap::new();
    let mut tracks: Vec<RawTrack> = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(parse_err(line, e.to_string())),
        }
        let line = record.position().map_or(line, |p| p.line());
        let row: Row = record
            .deserialize(Some(&headers))
            .map_err(|e| parse_err(line, e.to_string()))?;
        if !(row.lat.abs() <= 90.0 && row.lon.abs() <= 180.0) {
            return Err(parse_err(line, format!("coordinate out of range: {}, {}", row.lat, row.lon)));
        }
        let slot = *order.entry(row.track_id.clone()).or_insert_with(|| {
            tracks.push(RawTrack {
                id: row.track_id.clone(),
                samples: Vec::new(),
            });
            tracks.len() - 1
        });
        tracks[slot].samples.push(Sample {
            timestamp: row.timestamp,
            lat: row.lat,
            lon: row.lon,
        });
    }
    for track in &mut tracks {
        track.samples.sort_by_key(|s| s.timestamp);
        if let Some(w) = track.samples.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
            return Err(Error::DuplicateTimestamp {
                track: track.id.clone(),
                timestamp: w[0].timestamp,
            });
        }
    }
    Ok(tracks)
}

/// Write tracks sampled every `interval_s` seconds from `start`.
pub fn write_tracks(
    path: impl AsRef<Path>,
    trajectories: &[Trajectory],
    projection: &Projection,
    start: i64,
    interval_s: i64,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["track_id", "timestamp", "lat", "lon"]).map_err(|e| csv_io(path, e))?;
    for t in trajectories {
        for (i, p) in t.points().iter().enumerate() {
            let (lat, lon) = projection.unproject(*p);
            let ts = start + i as i64 * interval_s;
            w.write_record([t.id(), &ts.to_string(), &lat.to_string(), &lon.to_string()])
                .map_err(|e| csv_io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Projection origin for a set of tracks, or `None` when there are no samples.
pub fn fit_projection(tracks: &[RawTrack]) -> Option<Projection> {
    Projection::fit(tracks.iter().flat_map(|t| t.samples.iter().map(|s| (s.lat, s.lon))))
}

/// Resample one planar track every `interval_s` seconds, splitting at gaps
/// longer than `max_gap_s`. Pieces that yield fewer than two points are
/// dropped. Several pieces get ids `id#0`, `id#1`, ...
pub fn interpolate_planar(
    id: &str,
    samples: &[(i64, GeoPoint)],
    interval_s: f64,
    max_gap_s: f64,
) -> Result<Vec<Trajectory>> {
    if !(interval_s > 0.0 && interval_s.is_finite()) {
        return Err(Error::InvalidParameter(format!("interval must be positive, got {interval_s}")));
    }
    if !(max_gap_s > 0.0) {
        return Err(Error::InvalidParameter(format!("max gap must be positive, got {max_gap_s}")));
    }
    if samples.len() < 2 {
        log::warn!("track {id}: {} sample(s), skipped", samples.len());
        return Ok(Vec::new());
    }
    let mut pieces: Vec<&[(i64, GeoPoint)]> = Vec::new();
    let mut start = 0;
    for i in 1..samples.len() {
        if (samples[i].0 - samples[i - 1].0) as f64 > max_gap_s {
            pieces.push(&samples[start..i]);
            start = i;
        }
    }
    pieces.push(&samples[start..]);

    let mut out = Vec::new();
    let split = pieces.len() > 1;
    for (n, piece) in pieces.into_iter().enumerate() {
        let points = resample(piece, interval_s);
        if points.len() < 2 {
            log::warn!("track {id}: piece {n} too short after resampling, dropped");
            continue;
        }
        let name = if split { format!("{id}#{n}") } else { id.to_string() };
        out.push(Trajectory::new(name, points)?);
    }
    Ok(out)
}

fn resample(piece: &[(i64, GeoPoint)], interval_s: f64) -> Vec<GeoPoint> {
    let t0 = piece[0].0 as f64;
    let end = piece[piece.len() - 1].0 as f64;
    let mut out = Vec::new();
    let mut seg = 0;
    let mut i = 0u64;
    loop {
        let t = t0 + i as f64 * interval_s;
        if t > end {
            break;
        }
        while seg + 2 < piece.len() && (piece[seg + 1].0 as f64) < t {
            seg += 1;
        }
        if piece.len() == 1 {
            out.push(piece[0].1);
        } else {
            let (ta, a) = (piece[seg].0 as f64, piece[seg].1);
            let (tb, b) = (piece[seg + 1].0 as f64, piece[seg + 1].1);
            let f = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            out.push(GeoPoint::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)));
        }
        i += 1;
    }
    let mut speed_max: f64 = 0.0;
    for w in piece.windows(2) {
        let v = crate::similarity::euclidean(w[0].1, w[1].1) / (w[1].0 - w[0].0) as f64;
        speed_max = speed_max.max(v);
    }
    if out
        .windows(2)
        .any(|w| crate::similarity::euclidean(w[0], w[1]) > speed_max * interval_s * (1.0 + 1e-9) + 1e-9)
    {
        log::warn!("resampled step exceeds the input's maximum speed");
    }
    out
}

/// Project and resample every track.
pub fn interpolate_tracks(
    tracks: &[RawTrack],
    projection: &Projection,
    interval_s: f64,
    max_gap_s: f64,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for t in tracks {
        let planar: Vec<(i64, GeoPoint)> = t
            .samples
            .iter()
            .map(|s| (s.timestamp, projection.project(s.lat, s.lon)))
            .collect();
        out.extend(interpolate_planar(&t.id, &planar, interval_s, max_gap_s)?);
    }
    Ok(out)
}
