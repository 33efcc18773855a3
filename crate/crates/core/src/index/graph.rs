//! Layered navigable small-world graph.
//!
//! The graph only knows node ordinals; distances come from a caller-supplied
//! closure, so the same code serves build-time insertion (node-to-node) and
//! query-time search (probe-to-node).

use std::cell::RefCell;
use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;

const MAX_LEVEL: usize = 16;

/// `(distance, node)`, ordered by distance then node ordinal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scored {
    pub dist: f64,
    pub node: u32,
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.node.cmp(&other.node))
    }
}

#[derive(Default)]
struct Visited {
    marks: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn reset(&mut self, n: usize) {
        if self.marks.len() < n {
            self.marks.resize(n, 0);
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// Returns true the first time `node` is seen since the last reset.
    fn insert(&mut self, node: u32) -> bool {
        let slot = &mut self.marks[node as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }
}

thread_local! {
    static VISITED: RefCell<Visited> = RefCell::new(Visited::default());
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Graph {
    /// `links[node][level]`; a node has `level + 1` lists.
    pub links: Vec<Vec<Vec<u32>>>,
    pub entry: Option<u32>,
    pub m: usize,
}

impl Graph {
    pub fn new(m: usize) -> Self {
        Graph {
            links: Vec::new(),
            entry: None,
            m,
        }
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn level_of(&self, node: u32) -> usize {
        self.links[node as usize].len() - 1
    }

    pub fn neighbors(&self, node: u32, level: usize) -> &[u32] {
        &self.links[node as usize][level]
    }

    fn max_degree(&self, level: usize) -> usize {
        if level == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    pub fn random_level<R: Rng>(m: usize, rng: &mut R) -> usize {
        let ml = 1.0 / (m as f64).ln();
        // 1 - u lies in (0, 1], so the log is finite
        let u: f64 = rng.random();
        ((-(1.0 - u).ln() * ml).floor() as usize).min(MAX_LEVEL)
    }

    /// Greedy walk at one level towards the probe.
    fn greedy<F: FnMut(u32) -> f64>(&self, mut cur: Scored, level: usize, dist: &mut F) -> Scored {
        loop {
            let mut improved = false;
            for &nb in self.neighbors(cur.node, level) {
                let cand = Scored {
                    dist: dist(nb),
                    node: nb,
                };
                if cand < cur {
                    cur = cand;
                    improved = true;
                }
            }
            if !improved {
                return cur;
            }
        }
    }

    /// Descend from the entry point to `stop_level`, returning the closest node found.
    fn descend<F: FnMut(u32) -> f64>(&self, stop_level: usize, dist: &mut F) -> Option<Scored> {
        let entry = self.entry?;
        let mut cur = Scored {
            dist: dist(entry),
            node: entry,
        };
        let top = self.level_of(entry);
        for level in (stop_level + 1..=top).rev() {
            cur = self.greedy(cur, level, dist);
        }
        Some(cur)
    }

    /// Beam search of width `ef` at one level. Result sorted ascending.
    fn search_layer<F: FnMut(u32) -> f64>(
        &self,
        entries: &[Scored],
        ef: usize,
        level: usize,
        dist: &mut F,
    ) -> Vec<Scored> {
        VISITED.with(|v| {
            let mut visited = v.borrow_mut();
            visited.reset(self.len());
            let mut candidates: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
            let mut results: BinaryHeap<Scored> = BinaryHeap::new();
            for &e in entries {
                if visited.insert(e.node) {
                    candidates.push(Reverse(e));
                    results.push(e);
                }
            }
            while results.len() > ef {
                results.pop();
            }
            while let Some(Reverse(c)) = candidates.pop() {
                if results.len() >= ef && c > *results.peek().unwrap() {
                    break;
                }
                for &nb in self.neighbors(c.node, level) {
                    if !visited.insert(nb) {
                        continue;
                    }
                    let s = Scored {
                        dist: dist(nb),
                        node: nb,
                    };
                    if results.len() < ef || s < *results.peek().unwrap() {
                        candidates.push(Reverse(s));
                        results.push(s);
                        if results.len() > ef {
                            results.pop();
                        }
                    }
                }
            }
            results.into_sorted_vec()
        })
    }

    /// Plain approximate k nearest neighbors.
    pub fn knn<F: FnMut(u32) -> f64>(&self, k: usize, ef: usize, mut dist: F) -> Vec<Scored> {
        let Some(start) = self.descend(0, &mut dist) else {
            return Vec::new();
        };
        let mut found = self.search_layer(&[start], ef.max(k), 0, &mut dist);
        found.truncate(k);
        found
    }

    /// Approximate k nearest neighbors, at most one per group.
    ///
    /// The level-0 beam keeps its usual width-`ef` frontier; in addition every
    /// evaluated node competes for its group's slot, and the search does not
    /// stop while fewer than `k` groups have been seen or while a candidate
    /// could still improve the current k-th group. Nodes whose group is
    /// `excluded` are traversed but never returned.
    pub fn distinct_knn<F, G>(
        &self,
        k: usize,
        ef: usize,
        excluded: Option<u32>,
        mut group: G,
        mut dist: F,
    ) -> Vec<Scored>
    where
        F: FnMut(u32) -> f64,
        G: FnMut(u32) -> u32,
    {
        let Some(start) = self.descend(0, &mut dist) else {
            return Vec::new();
        };
        let ef = ef.max(k);
        VISITED.with(|v| {
            let mut visited = v.borrow_mut();
            visited.reset(self.len());
            let mut best: HashMap<u32, Scored> = HashMap::new();
            // top-k of `best`, kept sorted
            let mut top: Vec<Scored> = Vec::with_capacity(k + 1);
            let mut admit = |s: Scored, best: &mut HashMap<u32, Scored>, top: &mut Vec<Scored>| {
                let g = group(s.node);
                if Some(g) == excluded {
                    return;
                }
                match best.get(&g) {
                    Some(old) if *old <= s => return,
                    Some(old) => {
                        let old = *old;
                        if let Ok(pos) = top.binary_search(&old) {
                            top.remove(pos);
                        }
                    }
                    None => {}
                }
                best.insert(g, s);
                let pos = top.binary_search(&s).unwrap_or_else(|p| p);
                top.insert(pos, s);
                if top.len() > k {
                    top.pop();
                }
            };

            let mut candidates: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
            let mut beam: BinaryHeap<Scored> = BinaryHeap::new();
            visited.insert(start.node);
            candidates.push(Reverse(start));
            beam.push(start);
            admit(start, &mut best, &mut top);

            let bound = |beam: &BinaryHeap<Scored>, top: &Vec<Scored>| -> Option<Scored> {
                if beam.len() < ef || top.len() < k {
                    return None;
                }
                Some((*beam.peek().unwrap()).max(*top.last().unwrap()))
            };

            while let Some(Reverse(c)) = candidates.pop() {
                if let Some(b) = bound(&beam, &top) {
                    if c > b {
                        break;
                    }
                }
                for &nb in self.neighbors(c.node, 0) {
                    if !visited.insert(nb) {
                        continue;
                    }
                    let s = Scored {
                        dist: dist(nb),
                        node: nb,
                    };
                    let keep = match bound(&beam, &top) {
                        None => true,
                        Some(b) => s < b,
                    };
                    if keep {
                        candidates.push(Reverse(s));
                        beam.push(s);
                        if beam.len() > ef {
                            beam.pop();
                        }
                        admit(s, &mut best, &mut top);
                    }
                }
            }
            top
        })
    }

    /// Insert `node` (which must equal `self.len()`) at `level`.
    ///
    /// `dist(a, b)` is the distance between two nodes.
    pub fn insert<F: FnMut(u32, u32) -> f64>(
        &mut self,
        node: u32,
        level: usize,
        ef_construction: usize,
        dist: &mut F,
    ) {
        debug_assert_eq!(node as usize, self.len());
        self.links.push(vec![Vec::new(); level + 1]);
        let Some(entry) = self.entry else {
            self.entry = Some(node);
            return;
        };
        let top = self.level_of(entry);
        let mut cur = Scored {
            dist: dist(node, entry),
            node: entry,
        };
        for l in (level + 1..=top).rev() {
            cur = self.greedy(cur, l, &mut |o| dist(node, o));
        }
        let mut entries = vec![cur];
        for l in (0..=level.min(top)).rev() {
            let found = self.search_layer(&entries, ef_construction, l, &mut |o| dist(node, o));
            let chosen = self.select_neighbors(&found, self.m, dist);
            self.links[node as usize][l] = chosen.iter().map(|s| s.node).collect();
            for s in &chosen {
                self.connect(s.node, node, s.dist, l, dist);
            }
            entries = found;
        }
        if level > top {
            self.entry = Some(node);
        }
    }

    /// Add the edge `from -> to`, pruning `from`'s list if it overflows.
    fn connect<F: FnMut(u32, u32) -> f64>(
        &mut self,
        from: u32,
        to: u32,
        d: f64,
        level: usize,
        dist: &mut F,
    ) {
        let max = self.max_degree(level);
        let list = &self.links[from as usize][level];
        if list.len() < max {
            self.links[from as usize][level].push(to);
            return;
        }
        let mut cands: Vec<Scored> = list
            .iter()
            .map(|&n| Scored {
                dist: dist(from, n),
                node: n,
            })
            .collect();
        cands.push(Scored { dist: d, node: to });
        cands.sort();
        let chosen = self.select_neighbors(&cands, max, dist);
        self.links[from as usize][level] = chosen.into_iter().map(|s| s.node).collect();
    }

    /// Diversity heuristic: keep a candidate only if it is closer to the base
    /// than to every neighbor already kept; top up with the pruned ones.
    /// `sorted` holds distances to the base node, ascending.
    fn select_neighbors<F: FnMut(u32, u32) -> f64>(
        &self,
        sorted: &[Scored],
        max: usize,
        dist: &mut F,
    ) -> Vec<Scored> {
        if sorted.len() <= max {
            return sorted.to_vec();
        }
        let mut kept: Vec<Scored> = Vec::with_capacity(max);
        let mut pruned: Vec<Scored> = Vec::new();
        for &c in sorted {
            if kept.len() >= max {
                break;
            }
            if kept.iter().all(|k| dist(c.node, k.node) > c.dist) {
                kept.push(c);
            } else {
                pruned.push(c);
            }
        }
        for c in pruned {
            if kept.len() >= max {
                break;
            }
            kept.push(c);
        }
        kept
    }
}
