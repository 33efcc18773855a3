//! Obstacle detection.
//!
//! For every query window `q` not yet visited, the reference windows nearest
//! to `q` are tested: a reference window is a candidate when its succeed
//! density ratio drops significantly more in the query corpus than in the
//! reference corpus (one-sided two-proportion z-score above `tau`) while
//! both densities exceed the support threshold `delta`. Whenever `q` yields
//! a candidate, the search expands depth-first into the query windows
//! nearest to `q`. Each expansion that finds candidates becomes one obstacle:
//! the last points of its candidate windows and their convex hull.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::density::{density_profile, is_profilable, DensityParams, DensityProfile, ProfileSettings};
use crate::error::{Error, Result};
use crate::geometry::convex_hull;
use crate::index::{CorpusIndex, Neighbor, Probe};
use crate::model::{GeoPoint, SubTrajectoryStore, WindowId};

/// Sign inside the z-score radicand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ZMode {
    /// `1/f_ref - 1/f_qry`, as the formula is printed.
    Paper,
    /// `1/f_ref + 1/f_qry`, the standard two-proportion test.
    #[default]
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Optimizations {
    /// Read reference distinct neighbors from the index table.
    pub precomputed_reference: bool,
    /// Decide each reference window once per detection.
    pub reference_bitmap: bool,
    /// Do not expand into query windows closer than epsilon to the current one.
    pub skip_close_queries: bool,
    /// Reuse the verdict of a decided graph neighbor closer than epsilon.
    pub skip_close_references: bool,
}

impl Optimizations {
    pub const ALL: Optimizations = Optimizations {
        precomputed_reference: true,
        reference_bitmap: true,
        skip_close_queries: true,
        skip_close_references: true,
    };
    pub const NONE: Optimizations = Optimizations {
        precomputed_reference: false,
        reference_bitmap: false,
        skip_close_queries: false,
        skip_close_references: false,
    };
}

impl Default for Optimizations {
    fn default() -> Self {
        Optimizations::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub tau: f64,
    pub delta: f64,
    pub k: usize,
    /// Skip-closeness threshold in normalized-DTW units; 0 disables skips.
    pub epsilon: f64,
    pub z_mode: ZMode,
    pub density: DensityParams,
    pub optimizations: Optimizations,
    /// Exact linear-scan neighbor searches instead of the graphs.
    pub exact_knn: bool,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            tau: 1.645,
            delta: 1.0,
            k: 8,
            epsilon: 0.0,
            z_mode: ZMode::Pooled,
            density: DensityParams::default(),
            optimizations: Optimizations::ALL,
            exact_knn: false,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if self.k == 0 {
            return bad("k must be at least 1".into());
        }
        self.density.validate()
    }
}

/// One-sided z-score of the density-variation drop from reference to query.
///
/// Total over supported profiles: a zero numerator scores 0, and a
/// non-positive radicand scores `-inf`. Panics on an unsupported profile.
pub fn score(profile: &DensityProfile, mode: ZMode) -> f64 {
    assert!(profile.is_supported(), "score of an unsupported profile");
    let (p1, p2) = (profile.p1().unwrap(), profile.p2().unwrap());
    let p = profile.pooled().unwrap();
    let numerator = p1 - p2;
    if numerator == 0.0 {
        return 0.0;
    }
    let spread = match mode {
        ZMode::Paper => 1.0 / profile.f_ref - 1.0 / profile.f_qry,
        ZMode::Pooled => 1.0 / profile.f_ref + 1.0 / profile.f_qry,
    };
    let variance = p * (1.0 - p);
    let radicand = variance * spread;
    if variance <= 0.0 || radicand <= 0.0 {
        return f64::NEG_INFINITY;
    }
    numerator / radicand.sqrt()
}

/// Significance and support test for one profile.
pub fn is_candidate(profile: &DensityProfile, params: &DetectParams) -> bool {
    profile.is_supported()
        && profile.f_ref > params.delta
        && profile.f_qry > params.delta
        && score(profile, params.z_mode) > params.tau
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Obstacle {
    /// Accepted reference windows, ascending.
    pub candidate_subs: Vec<WindowId>,
    /// Last point of each candidate, in the same order.
    pub points: Vec<GeoPoint>,
    /// Counter-clockwise convex hull of `points`.
    pub hull: Vec<GeoPoint>,
    /// Mean direction of the candidates' final segments (unit vector, or
    /// zero if they cancel out).
    pub mean_heading: GeoPoint,
}

/// Build an obstacle from a non-empty candidate set.
pub fn build_obstacle(store: &SubTrajectoryStore, candidates: &BTreeSet<WindowId>) -> Obstacle {
    assert!(!candidates.is_empty(), "obstacle from an empty candidate set");
    let candidate_subs: Vec<WindowId> = candidates.iter().copied().collect();
    let points: Vec<GeoPoint> = candidate_subs
        .iter()
        .map(|&w| store.get(w).last_point())
        .collect();
    let hull = convex_hull(&points);
    let (mut hx, mut hy) = (0.0, 0.0);
    for &w in &candidate_subs {
        let pts = store.points(w);
        let (a, b) = (pts[pts.len() - 2], pts[pts.len() - 1]);
        let len = crate::similarity::euclidean(a, b);
        if len > 0.0 {
            hx += (b.x - a.x) / len;
            hy += (b.y - a.y) / len;
        }
    }
    let norm = hx.hypot(hy);
    let mean_heading = if norm > 1e-12 {
        GeoPoint::new(hx / norm, hy / norm)
    } else {
        GeoPoint::new(0.0, 0.0)
    };
    Obstacle {
        candidate_subs,
        points,
        hull,
        mean_heading,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DetectStats {
    /// Query windows whose reference neighbors were examined.
    pub queries_checked: u64,
    /// Full significance/support evaluations of reference windows.
    pub candidates_tested: u64,
    /// Query expansions plus reference evaluations avoided by epsilon skips.
    pub skips_taken: u64,
    /// Normalized-DTW evaluations on both indexes.
    pub distance_evaluations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionResult {
    pub obstacles: Vec<Obstacle>,
    pub stats: DetectStats,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl DetectionResult {
    /// Every reference window accepted by any obstacle.
    pub fn candidate_union(&self) -> BTreeSet<WindowId> {
        self.obstacles
            .iter()
            .flat_map(|o| o.candidate_subs.iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verdict {
    Unknown,
    Accepted,
    Rejected,
}

/// Mutable state of one detection run.
pub struct Detector<'a> {
    reference: &'a CorpusIndex,
    query: &'a CorpusIndex,
    params: DetectParams,
    settings: ProfileSettings,
    flagged: Vec<bool>,
    verdicts: Vec<Verdict>,
    stats: DetectStats,
}

impl<'a> Detector<'a> {
    pub fn new(reference: &'a CorpusIndex, query: &'a CorpusIndex, params: DetectParams) -> Result<Self> {
        params.validate()?;
        if reference.partition() != query.partition() {
            return Err(Error::InvalidParameter(format!(
                "reference windows {:?} and query windows {:?} differ",
                reference.partition(),
                query.partition()
            )));
        }
        Ok(Detector {
            reference,
            query,
            settings: ProfileSettings {
                k: params.k,
                density: params.density,
                exact: params.exact_knn,
                use_precomputed: params.optimizations.precomputed_reference,
            },
            params,
            flagged: vec![false; query.store().len()],
            verdicts: vec![Verdict::Unknown; reference.store().len()],
            stats: DetectStats::default(),
        })
    }

    fn ref_knn(&self, probe: Probe<'_>) -> Vec<Neighbor> {
        if self.params.exact_knn {
            self.reference.exact_knn(probe, self.params.k)
        } else {
            self.reference.knn(probe, self.params.k)
        }
    }

    fn query_knn(&self, probe: Probe<'_>) -> Vec<Neighbor> {
        if self.params.exact_knn {
            self.query.exact_knn(probe, self.params.k)
        } else {
            self.query.knn(probe, self.params.k)
        }
    }

    /// Decide one reference window.
    fn evaluate(&mut self, t: WindowId) -> bool {
        if !is_profilable(self.reference, t) {
            return false;
        }
        let opts = self.params.optimizations;
        if opts.skip_close_references && self.params.epsilon > 0.0 {
            let probe = Probe::from_store(self.reference.store(), t);
            let decided: Vec<WindowId> = self
                .reference
                .graph_neighbors(t)
                .filter(|n| self.verdicts[n.index()] != Verdict::Unknown)
                .collect();
            for n in decided {
                if self.reference.distance_to(probe, n) < self.params.epsilon {
                    self.stats.skips_taken += 1;
                    return self.verdicts[n.index()] == Verdict::Accepted;
                }
            }
        }
        self.stats.candidates_tested += 1;
        density_profile(t, self.reference, self.query, &self.settings)
            .is_some_and(|p| is_candidate(&p, &self.params))
    }

    /// Examine the reference neighbors of one query window; returns the
    /// accepted ones.
    fn check_query(&mut self, q: WindowId) -> Vec<WindowId> {
        self.stats.queries_checked += 1;
        let probe = Probe::from_store(self.query.store(), q);
        let mut accepted = Vec::new();
        for n in self.ref_knn(probe) {
            let t = n.window;
            let known = self.verdicts[t.index()];
            if self.params.optimizations.reference_bitmap && known != Verdict::Unknown {
                if known == Verdict::Accepted {
                    accepted.push(t);
                }
                continue;
            }
            let ok = self.evaluate(t);
            self.verdicts[t.index()] = if ok { Verdict::Accepted } else { Verdict::Rejected };
            if ok {
                accepted.push(t);
            }
        }
        accepted
    }

    /// Depth-first candidate search from query window `q`, with an explicit
    /// stack. Every query window is flagged at most once.
    pub fn find_candidates(&mut self, q: WindowId) -> BTreeSet<WindowId> {
        let mut found = BTreeSet::new();
        // (window, the window whose expansion pushed it)
        let mut stack: Vec<(WindowId, Option<WindowId>)> = vec![(q, None)];
        while let Some((cur, from)) = stack.pop() {
            if self.flagged[cur.index()] {
                continue;
            }
            if let Some(from) = from {
                if self.params.optimizations.skip_close_queries && self.params.epsilon > 0.0 {
                    let d = self
                        .query
                        .distance_to(Probe::from_store(self.query.store(), from), cur);
                    if d < self.params.epsilon {
                        self.flagged[cur.index()] = true;
                        self.stats.skips_taken += 1;
                        continue;
                    }
                }
            }
            self.flagged[cur.index()] = true;
            if !self.query.is_indexed(cur) {
                continue;
            }
            let accepted = self.check_query(cur);
            if accepted.is_empty() {
                continue;
            }
            found.extend(accepted);
            let next = self.query_knn(Probe::from_store(self.query.store(), cur));
            // reversed so the nearest is expanded first
            for n in next.into_iter().rev() {
                if !self.flagged[n.window.index()] {
                    stack.push((n.window, Some(cur)));
                }
            }
        }
        found
    }

    /// Run detection over every query window in order.
    pub fn run(mut self) -> DetectionResult {
        let started = Instant::now();
        let before = self.reference.distance_evaluations() + self.query.distance_evaluations();
        let mut obstacles = Vec::new();
        for q in self.query.store().ids() {
            if self.flagged[q.index()] {
                continue;
            }
            let c = self.find_candidates(q);
            if !c.is_empty() {
                obstacles.push(build_obstacle(self.reference.store(), &c));
            }
        }
        self.stats.distance_evaluations =
            self.reference.distance_evaluations() + self.query.distance_evaluations() - before;
        DetectionResult {
            obstacles,
            stats: self.stats,
            elapsed: started.elapsed(),
        }
    }
}

/// Detect obstacles of `query` relative to `reference`.
pub fn detect(reference: &CorpusIndex, query: &CorpusIndex, params: &DetectParams) -> Result<DetectionResult> {
    Ok(Detector::new(reference, query, *params)?.run())
}
