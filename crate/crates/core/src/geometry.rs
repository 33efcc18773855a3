//! Planar helpers: convex hull, containment and polygon distances.

use crate::model::GeoPoint;
use crate::similarity::euclidean;

fn cross(o: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull by monotone chain, counter-clockwise, without collinear
/// vertices. One distinct input point gives a 1-vertex hull, collinear
/// inputs give the 2 extreme points.
pub fn convex_hull(points: &[GeoPoint]) -> Vec<GeoPoint> {
    let mut pts: Vec<GeoPoint> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<GeoPoint> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 2 {
        // all points collinear and the chain collapsed; keep the extremes
        return vec![pts[0], pts[pts.len() - 1]];
    }
    hull
}

/// Shoelace area centroid; falls back to the vertex mean for degenerate rings.
pub fn polygon_centroid(ring: &[GeoPoint]) -> GeoPoint {
    let n = ring.len();
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (p, q) = (ring[i], ring[(i + 1) % n]);
        let c = p.x * q.y - q.x * p.y;
        a += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    if a.abs() < 1e-12 {
        return mean_point(ring);
    }
    GeoPoint::new(cx / (3.0 * a), cy / (3.0 * a))
}

pub fn mean_point(points: &[GeoPoint]) -> GeoPoint {
    let n = points.len().max(1) as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
    GeoPoint::new(sx / n, sy / n)
}

/// Distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: GeoPoint, a: GeoPoint, b: GeoPoint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return euclidean(p, a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    euclidean(p, GeoPoint::new(a.x + t * dx, a.y + t * dy))
}

fn segments_intersect(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    // touching or collinear overlap
    point_segment_distance(a, c, d) == 0.0
        || point_segment_distance(b, c, d) == 0.0
        || point_segment_distance(c, a, b) == 0.0
        || point_segment_distance(d, a, b) == 0.0
}

pub fn segment_distance(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Even-odd containment; points on the boundary count as inside.
pub fn point_in_polygon(p: GeoPoint, ring: &[GeoPoint]) -> bool {
    let n = ring.len();
    if n == 0 {
        return false;
    }
    if n == 1 {
        return p == ring[0];
    }
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if point_segment_distance(p, a, b) == 0.0 {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    n >= 3 && inside
}

fn edges(ring: &[GeoPoint]) -> impl Iterator<Item = (GeoPoint, GeoPoint)> + '_ {
    let n = ring.len();
    let count = match n {
        0 | 1 => 0,
        2 => 1,
        _ => n,
    };
    (0..count).map(move |i| (ring[i], ring[(i + 1) % n]))
}

/// Smallest distance between two shapes given as rings (a 1-vertex ring is a
/// point, a 2-vertex ring a segment); 0 if they overlap.
pub fn shape_distance(a: &[GeoPoint], b: &[GeoPoint]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    if a.iter().any(|&p| point_in_polygon(p, b)) || b.iter().any(|&p| point_in_polygon(p, a)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    match (a.len(), b.len()) {
        (1, 1) => return euclidean(a[0], b[0]),
        (1, _) => {
            for (c, d) in edges(b) {
                best = best.min(point_segment_distance(a[0], c, d));
            }
        }
        (_, 1) => {
            for (c, d) in edges(a) {
                best = best.min(point_segment_distance(b[0], c, d));
            }
        }
        _ => {
            for (p, q) in edges(a) {
                for (c, d) in edges(b) {
                    best = best.min(segment_distance(p, q, c, d));
                }
            }
        }
    }
    best
}
