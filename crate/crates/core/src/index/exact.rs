//! Linear-scan searches: the ground truth for the graph searches.

use std::collections::BTreeMap;

use super::graph::Scored;
use super::{CorpusIndex, Neighbor, Probe};

impl CorpusIndex {
    /// Exact k nearest indexed windows, ties broken by window order.
    pub fn exact_knn(&self, probe: Probe<'_>, k: usize) -> Vec<Neighbor> {
        if probe.is_stationary() || k == 0 {
            return Vec::new();
        }
        let mut all: Vec<Scored> = (0..self.nodes.len() as u32)
            .map(|n| Scored {
                dist: self.distance_to(probe, self.nodes[n as usize]),
                node: n,
            })
            .collect();
        if all.len() > k {
            all.select_nth_unstable(k - 1);
            all.truncate(k);
        }
        all.sort_unstable();
        self.to_neighbors(all)
    }

    /// Exact distinct-parent k nearest windows: the nearest window of every
    /// parent, then the k nearest of those.
    pub fn exact_distinct_knn(
        &self,
        probe: Probe<'_>,
        k: usize,
        exclude_parent: Option<u32>,
    ) -> Vec<Neighbor> {
        if probe.is_stationary() || k == 0 {
            return Vec::new();
        }
        let mut best: BTreeMap<u32, Scored> = BTreeMap::new();
        for n in 0..self.nodes.len() as u32 {
            let w = self.nodes[n as usize];
            let parent = self.store.parent(w);
            if Some(parent) == exclude_parent {
                continue;
            }
            let s = Scored {
                dist: self.distance_to(probe, w),
                node: n,
            };
            best.entry(parent)
                .and_modify(|b| {
                    if s < *b {
                        *b = s
                    }
                })
                .or_insert(s);
        }
        let mut all: Vec<Scored> = best.into_values().collect();
        all.sort_unstable();
        all.truncate(k);
        self.to_neighbors(all)
    }
}
