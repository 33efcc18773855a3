//! Binary index files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic "SUBTRIDX" | version u32
//! kind u8 | k, m, ef_construction, ef_search, seed, window, step: u64
//! origin flag u8 [lat0 f64, lon0 f64]
//! trajectory count u64, each: id (u64 len + UTF-8), point count u64, (x f64, y f64)*
//! node count u64 | entry u64 (u64::MAX if none)
//! per node: level count u8, per level: degree u32, neighbors u32*
//! table flag u8 [exact u8, offsets (u64 count, u32*), entries (u64 count, (u32 window, f64 distance)*)]
//! ```
//!
//! Windows are not stored; they are re-derived by partitioning, which is
//! deterministic, so save -> load -> save reproduces the same bytes.

use std::fs;
use std::path::Path;
use std::sync::atomic::AtomicU64;

use super::graph::Graph;
use super::{CorpusIndex, CorpusKind, DistinctTable, IndexParams, Neighbor};
use crate::error::{Error, Result};
use crate::geo::Projection;
use crate::model::{GeoPoint, PartitionParams, SubTrajectoryStore, Trajectory, WindowId};

const MAGIC: &[u8; 8] = b"SUBTRIDX";
const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::IndexFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // every counted item occupies at least one byte
        if n > (self.buf.len() - self.pos) as u64 {
            return Err(Error::IndexFormat(format!("implausible count {n}")));
        }
        Ok(n as usize)
    }
}

impl CorpusIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u8(match self.kind {
            CorpusKind::Reference => 0,
            CorpusKind::Query => 1,
        });
        let p = &self.params;
        for v in [p.k, p.m, p.ef_construction, p.ef_search] {
            w.u64(v as u64);
        }
        w.u64(p.seed);
        let part = self.store.params();
        w.u64(part.window() as u64);
        w.u64(part.step() as u64);
        match self.origin {
            Some(o) => {
                w.u8(1);
                w.f64(o.lat0);
                w.f64(o.lon0);
            }
            None => w.u8(0),
        }
        w.u64(self.store.trajectories().len() as u64);
        for t in self.store.trajectories() {
            w.u64(t.id().len() as u64);
            w.0.extend_from_slice(t.id().as_bytes());
            w.u64(t.len() as u64);
            for pt in t.points() {
                w.f64(pt.x);
                w.f64(pt.y);
            }
        }
        w.u64(self.graph.len() as u64);
        w.u64(self.graph.entry.map_or(u64::MAX, u64::from));
        for levels in &self.graph.links {
            w.u8(levels.len() as u8);
            for list in levels {
                w.u32(list.len() as u32);
                for &n in list {
                    w.u32(n);
                }
            }
        }
        match &self.distinct {
            Some(t) => {
                w.u8(1);
                w.u8(t.exact as u8);
                w.u64(t.offsets.len() as u64);
                for &o in &t.offsets {
                    w.u32(o);
                }
                w.u64(t.entries.len() as u64);
                for n in &t.entries {
                    w.u32(n.window.0);
                    w.f64(n.distance);
                }
            }
            None => w.u8(0),
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::IndexFormat("not an index file".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let kind = match r.u8()? {
            0 => CorpusKind::Reference,
            1 => CorpusKind::Query,
            other => return Err(Error::IndexFormat(format!("bad corpus kind {other}"))),
        };
        let params = IndexParams {
            k: r.u64()? as usize,
            m: r.u64()? as usize,
            ef_construction: r.u64()? as usize,
            ef_search: r.u64()? as usize,
            seed: r.u64()?,
        };
        params
            .validate()
            .map_err(|e| Error::IndexFormat(e.to_string()))?;
        let window = r.u64()? as usize;
        let step = r.u64()? as usize;
        let partition =
            PartitionParams::new(window, step).map_err(|e| Error::IndexFormat(e.to_string()))?;
        let origin = match r.u8()? {
            0 => None,
            _ => Some(Projection::new(r.f64()?, r.f64()?)),
        };
        let count = r.len()?;
        let mut trajectories = Vec::with_capacity(count);
        for _ in 0..count {
            let n = r.len()?;
            let id = std::str::from_utf8(r.take(n)?)
                .map_err(|_| Error::IndexFormat("trajectory id is not UTF-8".into()))?
                .to_string();
            let n = r.len()?;
            let mut pts = Vec::with_capacity(n);
            for _ in 0..n {
                pts.push(GeoPoint::new(r.f64()?, r.f64()?));
            }
            trajectories
                .push(Trajectory::new(id, pts).map_err(|e| Error::IndexFormat(e.to_string()))?);
        }
        let store = SubTrajectoryStore::new(trajectories, partition);
        let nodes: Vec<WindowId> = store.ids().filter(|&id| !store.is_stationary(id)).collect();

        let node_count = r.len()?;
        if node_count != nodes.len() {
            return Err(Error::IndexFormat(format!(
                "graph has {node_count} nodes but the corpus has {} indexable windows",
                nodes.len()
            )));
        }
        let entry = match r.u64()? {
            u64::MAX => None,
            e if (e as usize) < node_count => Some(e as u32),
            e => return Err(Error::IndexFormat(format!("entry node {e} out of range"))),
        };
        let mut graph = Graph::new(params.m);
        graph.entry = entry;
        for _ in 0..node_count {
            let levels = r.u8()? as usize;
            if levels == 0 {
                return Err(Error::IndexFormat("node without levels".into()));
            }
            let mut node_links = Vec::with_capacity(levels);
            for _ in 0..levels {
                let deg = r.u32()? as usize;
                let mut list = Vec::with_capacity(deg.min(1024));
                for _ in 0..deg {
                    let n = r.u32()?;
                    if n as usize >= node_count {
                        return Err(Error::IndexFormat(format!("edge to missing node {n}")));
                    }
                    list.push(n);
                }
                node_links.push(list);
            }
            graph.links.push(node_links);
        }
        let distinct = match r.u8()? {
            0 => None,
            _ => {
                let exact = r.u8()? != 0;
                let n = r.len()?;
                let mut offsets = Vec::with_capacity(n);
                for _ in 0..n {
                    offsets.push(r.u32()?);
                }
                let n = r.len()?;
                let mut entries = Vec::with_capacity(n);
                for _ in 0..n {
                    let window = WindowId(r.u32()?);
                    if window.index() >= store.len() {
                        return Err(Error::IndexFormat(format!("table names missing window {}", window.0)));
                    }
                    entries.push(Neighbor {
                        window,
                        distance: r.f64()?,
                    });
                }
                let consistent = offsets.len() == store.len() + 1
                    && offsets.windows(2).all(|w| w[0] <= w[1])
                    && offsets.last().map(|&o| o as usize) == Some(entries.len());
                if !consistent {
                    return Err(Error::IndexFormat("neighbor table offsets are inconsistent".into()));
                }
                Some(DistinctTable {
                    exact,
                    offsets,
                    entries,
                })
            }
        };
        if r.pos != buf.len() {
            return Err(Error::IndexFormat("trailing bytes".into()));
        }
        let mut node_of = vec![u32::MAX; store.len()];
        for (n, w) in nodes.iter().enumerate() {
            node_of[w.index()] = n as u32;
        }
        Ok(CorpusIndex {
            store,
            kind,
            params,
            origin,
            graph,
            nodes,
            node_of,
            distinct,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{DistinctPrecompute, Probe};

    fn corpus() -> Vec<Trajectory> {
        (0..8)
            .map(|i| {
                let pts = (0..20)
                    .map(|j| GeoPoint::new(j as f64 * 10.0, i as f64 + (j as f64).cos()))
                    .collect();
                Trajectory::new(format!("t{i}"), pts).unwrap()
            })
            .collect()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let mut idx = CorpusIndex::build(
            corpus(),
            PartitionParams::default(),
            IndexParams::default(),
            CorpusKind::Reference,
            DistinctPrecompute::Graph,
        )
        .unwrap();
        idx.set_origin(Some(Projection::new(1.25, 103.8)));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ref.idx");
        idx.save(&path).unwrap();
        let loaded = CorpusIndex::load(&path).unwrap();
        assert_eq!(loaded.to_bytes(), std::fs::read(&path).unwrap());
        assert_eq!(loaded.origin(), idx.origin());
        let q = &corpus()[3];
        let probe = Probe::new(&q.points()[2..8]);
        assert_eq!(loaded.knn(probe, 5), idx.knn(probe, 5));
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(matches!(CorpusIndex::from_bytes(b"nope"), Err(Error::IndexFormat(_))));
        let idx = CorpusIndex::build(
            corpus(),
            PartitionParams::default(),
            IndexParams::default(),
            CorpusKind::Query,
            DistinctPrecompute::None,
        )
        .unwrap();
        let bytes = idx.to_bytes();
        assert!(CorpusIndex::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(CorpusIndex::from_bytes(&extra).is_err());
        assert_eq!(CorpusIndex::from_bytes(&bytes).unwrap().kind(), CorpusKind::Query);
    }
}
