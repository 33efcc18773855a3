//! Sub-trajectory index under normalized DTW.
//!
//! A [`CorpusIndex`] owns the partitioned corpus, a layered proximity graph
//! over its non-stationary windows, and (for reference corpora) a table with
//! the distinct-parent nearest neighbors of every window. Exact linear-scan
//! searches with the same contracts are provided as the ground truth for the
//! approximate ones.

mod exact;
mod graph;
mod persist;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Projection;
use crate::model::{GeoPoint, PartitionParams, SubTrajectoryStore, Trajectory, WindowId};
use crate::similarity::ndtw_with_norms;

use graph::{Graph, Scored};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexParams {
    /// Neighbor count for queries and for the precomputed distinct lists.
    pub k: usize,
    /// Graph out-degree budget (twice this at level 0).
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            k: 8,
            m: 16,
            ef_construction: 200,
            ef_search: 64,
            seed: 42,
        }
    }
}

impl IndexParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(Error::InvalidParameter("M must be at least 2".into()));
        }
        if self.ef_search < self.k {
            return Err(Error::InvalidParameter(format!(
                "ef_search ({}) must be at least k ({})",
                self.ef_search, self.k
            )));
        }
        if self.ef_construction == 0 {
            return Err(Error::InvalidParameter("ef_construction must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    Reference,
    Query,
}

/// How the distinct-parent neighbor table is filled at build time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistinctPrecompute {
    None,
    /// Graph search, the normal mode.
    Graph,
    /// Linear scan; used when exact neighbors are required end to end.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub window: WindowId,
    pub distance: f64,
}

/// A window to search for: its points and the square root of its path length.
#[derive(Debug, Clone, Copy)]
pub struct Probe<'a> {
    pub points: &'a [GeoPoint],
    pub norm: f64,
}

impl<'a> Probe<'a> {
    pub fn new(points: &'a [GeoPoint]) -> Self {
        Probe {
            points,
            norm: crate::similarity::path_length(points).sqrt(),
        }
    }

    pub fn from_store(store: &'a SubTrajectoryStore, id: WindowId) -> Self {
        Probe {
            points: store.points(id),
            norm: store.sqrt_path_len(id),
        }
    }

    pub fn is_stationary(&self) -> bool {
        self.norm == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DistinctTable {
    exact: bool,
    /// `offsets[w]..offsets[w + 1]` index `entries` for window `w`.
    offsets: Vec<u32>,
    entries: Vec<Neighbor>,
}

impl DistinctTable {
    fn get(&self, id: WindowId) -> &[Neighbor] {
        let i = id.index();
        &self.entries[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

#[derive(Debug)]
pub struct CorpusIndex {
    store: SubTrajectoryStore,
    kind: CorpusKind,
    params: IndexParams,
    origin: Option<Projection>,
    graph: Graph,
    /// Graph node -> window.
    nodes: Vec<WindowId>,
    /// Window -> graph node, `u32::MAX` for stationary windows.
    node_of: Vec<u32>,
    distinct: Option<DistinctTable>,
    evaluations: AtomicU64,
}

impl CorpusIndex {
    /// Partition `trajectories` and index every non-stationary window.
    pub fn build(
        trajectories: Vec<Trajectory>,
        partition: PartitionParams,
        params: IndexParams,
        kind: CorpusKind,
        precompute: DistinctPrecompute,
    ) -> Result<Self> {
        params.validate()?;
        let store = SubTrajectoryStore::new(trajectories, partition);
        if store.is_empty() {
            return Err(Error::EmptyCorpus {
                window: partition.window(),
            });
        }
        let nodes: Vec<WindowId> = store.ids().filter(|&id| !store.is_stationary(id)).collect();
        if nodes.is_empty() {
            return Err(Error::InvalidParameter(
                "every window of the corpus is stationary".into(),
            ));
        }
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut graph = Graph::new(params.m);
        let evaluations = AtomicU64::new(0);
        {
            let mut dist = |a: u32, b: u32| {
                let (wa, wb) = (nodes[a as usize], nodes[b as usize]);
                ndtw_with_norms(
                    store.points(wa),
                    store.sqrt_path_len(wa),
                    store.points(wb),
                    store.sqrt_path_len(wb),
                )
            };
            for node in 0..nodes.len() as u32 {
                let level = Graph::random_level(params.m, &mut rng);
                graph.insert(node, level, params.ef_construction, &mut dist);
            }
        }
        debug!(
            "graph over {} windows built in {:.2?}",
            nodes.len(),
            started.elapsed()
        );
        let mut node_of = vec![u32::MAX; store.len()];
        for (n, w) in nodes.iter().enumerate() {
            node_of[w.index()] = n as u32;
        }
        let mut index = CorpusIndex {
            store,
            kind,
            params,
            origin: None,
            graph,
            nodes,
            node_of,
            distinct: None,
            evaluations,
        };
        match precompute {
            DistinctPrecompute::None => {}
            DistinctPrecompute::Graph => index.precompute_distinct(false),
            DistinctPrecompute::Exact => index.precompute_distinct(true),
        }
        Ok(index)
    }

    fn precompute_distinct(&mut self, exact: bool) {
        let started = Instant::now();
        let k = self.params.k;
        let lists: Vec<Vec<Neighbor>> = self
            .store
            .ids()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|&id| {
                if self.store.is_stationary(id) {
                    return Vec::new();
                }
                let probe = Probe::from_store(&self.store, id);
                let own = Some(self.store.parent(id));
                if exact {
                    self.exact_distinct_knn(probe, k, own)
                } else {
                    self.distinct_knn(probe, k, own)
                }
            })
            .collect();
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        let mut entries = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        offsets.push(0u32);
        for l in lists {
            entries.extend(l);
            offsets.push(entries.len() as u32);
        }
        self.distinct = Some(DistinctTable {
            exact,
            offsets,
            entries,
        });
        debug!("distinct neighbor table computed in {:.2?}", started.elapsed());
    }

    pub fn store(&self) -> &SubTrajectoryStore {
        &self.store
    }

    pub fn kind(&self) -> CorpusKind {
        self.kind
    }

    pub fn params(&self) -> &IndexParams {
        &self.params
    }

    pub fn partition(&self) -> PartitionParams {
        self.store.params()
    }

    pub fn trajectory_count(&self) -> usize {
        self.store.trajectory_count()
    }

    /// Number of windows in the graph (stationary windows excluded).
    pub fn indexed_len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_indexed(&self, id: WindowId) -> bool {
        self.node_of[id.index()] != u32::MAX
    }

    pub fn origin(&self) -> Option<Projection> {
        self.origin
    }

    pub fn set_origin(&mut self, origin: Option<Projection>) {
        self.origin = origin;
    }

    /// Number of normalized-DTW evaluations performed by searches so far.
    pub fn distance_evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    /// Precomputed distinct-parent neighbors of an indexed window, excluding
    /// its own parent. `None` if the table was not built.
    pub fn precomputed_distinct(&self, id: WindowId) -> Option<&[Neighbor]> {
        self.distinct.as_ref().map(|t| t.get(id))
    }

    /// Whether the precomputed table came from exact scans.
    pub fn precomputed_is_exact(&self) -> Option<bool> {
        self.distinct.as_ref().map(|t| t.exact)
    }

    /// Level-0 graph neighbors of an indexed window.
    pub fn graph_neighbors(&self, id: WindowId) -> impl Iterator<Item = WindowId> + '_ {
        let node = self.node_of[id.index()];
        let list: &[u32] = if node == u32::MAX {
            &[]
        } else {
            self.graph.neighbors(node, 0)
        };
        list.iter().map(|&n| self.nodes[n as usize])
    }

    /// Normalized DTW between a probe and a window, counted in
    /// [`distance_evaluations`](Self::distance_evaluations).
    pub fn distance_to(&self, probe: Probe<'_>, window: WindowId) -> f64 {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        ndtw_with_norms(
            probe.points,
            probe.norm,
            self.store.points(window),
            self.store.sqrt_path_len(window),
        )
    }

    fn to_neighbors(&self, found: Vec<Scored>) -> Vec<Neighbor> {
        found
            .into_iter()
            .map(|s| Neighbor {
                window: self.nodes[s.node as usize],
                distance: s.dist,
            })
            .collect()
    }

    /// Approximate k nearest windows, ascending by distance.
    pub fn knn(&self, probe: Probe<'_>, k: usize) -> Vec<Neighbor> {
        if probe.is_stationary() || k == 0 {
            return Vec::new();
        }
        let found = self.graph.knn(k, self.params.ef_search, |n| {
            self.distance_to(probe, self.nodes[n as usize])
        });
        self.to_neighbors(found)
    }

    /// Approximate k nearest windows from pairwise-distinct parents, never
    /// from `exclude_parent`.
    pub fn distinct_knn(
        &self,
        probe: Probe<'_>,
        k: usize,
        exclude_parent: Option<u32>,
    ) -> Vec<Neighbor> {
        if probe.is_stationary() || k == 0 {
            return Vec::new();
        }
        let found = self.graph.distinct_knn(
            k,
            self.params.ef_search,
            exclude_parent,
            |n| self.store.parent(self.nodes[n as usize]),
            |n| self.distance_to(probe, self.nodes[n as usize]),
        );
        let out = self.to_neighbors(found);
        debug_assert!(self.parents_distinct(&out, exclude_parent));
        out
    }

    fn parents_distinct(&self, list: &[Neighbor], exclude_parent: Option<u32>) -> bool {
        let mut parents: Vec<u32> = list.iter().map(|n| self.store.parent(n.window)).collect();
        parents.sort_unstable();
        parents.windows(2).all(|w| w[0] != w[1])
            && exclude_parent.is_none_or(|p| !parents.contains(&p))
    }
}
