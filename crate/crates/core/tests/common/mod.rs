#![allow(dead_code)]

use implicit_obstacles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random-walk tracks with varied speed and heading persistence.
pub fn random_walks(parents: usize, len: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..parents)
        .map(|p| {
            let mut x = rng.random_range(0.0..5000.0);
            let mut y = rng.random_range(0.0..5000.0);
            let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let speed = rng.random_range(20.0..80.0);
            let pts = (0..len)
                .map(|_| {
                    heading += rng.random_range(-0.6..0.6);
                    x += speed * heading.cos();
                    y += speed * heading.sin();
                    GeoPoint::new(x, y)
                })
                .collect();
            Trajectory::new(format!("{seed}-{p}"), pts).unwrap()
        })
        .collect()
}

pub fn build(trajs: Vec<Trajectory>, kind: CorpusKind, precompute: DistinctPrecompute) -> CorpusIndex {
    CorpusIndex::build(trajs, PartitionParams::default(), IndexParams::default(), kind, precompute).unwrap()
}

/// Run `f` `runs` times and keep the fastest wall time.
pub fn fastest<T>(runs: usize, mut f: impl FnMut() -> T) -> (std::time::Duration, T) {
    let mut best = None;
    let mut out = None;
    for _ in 0..runs {
        let t = std::time::Instant::now();
        let v = f();
        let e = t.elapsed();
        if best.is_none_or(|b| e < b) {
            best = Some(e);
        }
        out = Some(v);
    }
    (best.unwrap(), out.unwrap())
}
