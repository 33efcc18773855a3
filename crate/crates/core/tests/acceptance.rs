//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::{build, fastest, random_walks};
use implicit_obstacles::density::{density, kernel, succ_density};
use implicit_obstacles::geo::eval::evaluate;
use implicit_obstacles::geo::scenario::{generate_scenario, ScenarioParams};
use implicit_obstacles::similarity::{dtw, ndtw};
use implicit_obstacles::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TAUS: [f64; 5] = [1.282, 1.645, 1.960, 2.326, 2.576];
const DELTAS: [f64; 8] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

fn obstacles_bin(dir: &Path, args: &[&str]) -> (String, Duration) {
    let started = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_obstacles"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run obstacles");
    let elapsed = started.elapsed();
    assert!(
        out.status.success(),
        "obstacles {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    (String::from_utf8(out.stdout).unwrap(), elapsed)
}

fn field(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {stdout}"))
        .to_string()
}

fn planted_detection() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    obstacles_bin(d, &["synth", "--output", "."]);
    let (_, index_time) = obstacles_bin(
        d,
        &["--threads", "1", "index", "--input", "reference.csv", "--output", "ref.idx"],
    );
    let (detected, detect_time) = obstacles_bin(
        d,
        &[
            "--threads", "1", "detect", "--index", "ref.idx", "--query", "query.csv", "--output",
            "obstacles.geojson", "--z-mode", "pooled", "--tau", "1.645", "--delta", "1.0", "--sigma",
            "1.0", "--k", "8",
        ],
    );
    let (report, _) = obstacles_bin(
        d,
        &["eval", "--detections", "obstacles.geojson", "--truth", "truth.geojson", "--enlarge-m", "0"],
    );
    let n: usize = field(&detected, "obstacles").parse().unwrap();
    let (p, r) = (field(&report, "precision"), field(&report, "recall"));
    let runtime = index_time + detect_time;
    check(
        n >= 1 && p == "100.0" && r == "100.0" && runtime < Duration::from_secs(10),
        format!("{n} obstacle(s), P={p} R={r}, index+detect {:.2} s", runtime.as_secs_f64()),
        format!("{n} obstacle(s), P={p} R={r}, index+detect {:.2} s", runtime.as_secs_f64()),
    )
}

fn null_test() -> Outcome {
    let s = generate_scenario(&ScenarioParams::default()).unwrap();
    let copy: Vec<Trajectory> = s
        .reference
        .iter()
        .map(|t| Trajectory::new(format!("copy-{}", t.id()), t.points().to_vec()).unwrap())
        .collect();
    let reference = build(s.reference.clone(), CorpusKind::Reference, DistinctPrecompute::Graph);
    let query = build(copy, CorpusKind::Query, DistinctPrecompute::None);
    let mut counts = Vec::new();
    for tau in TAUS {
        let params = DetectParams { tau, ..DetectParams::default() };
        counts.push(detect(&reference, &query, &params).unwrap().obstacles.len());
    }
    check(
        counts.iter().all(|&c| c == 0),
        format!("0 obstacles for all {} tau values", TAUS.len()),
        format!("obstacle counts per tau {counts:?}"),
    )
}

fn optimizer_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut sizes = Vec::new();
    for i in 0..20 {
        let p = ScenarioParams {
            reference_count: rng.random_range(10..=20),
            query_count: rng.random_range(10..=20),
            lanes: rng.random_range(1..=3),
            corridor_length_m: rng.random_range(1500.0..2500.0),
            noise_m: rng.random_range(1.0..10.0),
            two_sided: rng.random_bool(0.3),
            seed: rng.random(),
            ..ScenarioParams::default()
        };
        let s = generate_scenario(&p).unwrap();
        let reference = build(s.reference, CorpusKind::Reference, DistinctPrecompute::Exact);
        let query = build(s.query, CorpusKind::Query, DistinctPrecompute::None);
        let on = DetectParams {
            exact_knn: true,
            epsilon: 0.0,
            optimizations: Optimizations::ALL,
            ..DetectParams::default()
        };
        let off = DetectParams { optimizations: Optimizations::NONE, ..on };
        let a = detect(&reference, &query, &on).unwrap().candidate_union();
        let b = detect(&reference, &query, &off).unwrap().candidate_union();
        if a != b {
            return Err(format!("scenario {i}: {} vs {} candidates", a.len(), b.len()));
        }
        sizes.push(a.len());
    }
    Ok(format!("20 scenarios, identical candidate unions (sizes {sizes:?})"))
}

fn speedup_direction() -> Outcome {
    let s = generate_scenario(&ScenarioParams::default()).unwrap();
    let truth = [s.truth.clone()];
    let reference = build(s.reference, CorpusKind::Reference, DistinctPrecompute::Graph);
    let query = build(s.query, CorpusKind::Query, DistinctPrecompute::None);
    let fast = DetectParams { epsilon: 0.05, ..DetectParams::default() };
    let slow = DetectParams { optimizations: Optimizations::NONE, ..fast };
    let (t_fast, r_fast) = fastest(3, || detect(&reference, &query, &fast).unwrap());
    let (t_slow, r_slow) = fastest(3, || detect(&reference, &query, &slow).unwrap());
    let f1_fast = evaluate(&r_fast, &truth).unwrap().f1;
    let f1_slow = evaluate(&r_slow, &truth).unwrap().f1;
    let (e_fast, e_slow) = (r_fast.stats.candidates_tested, r_slow.stats.candidates_tested);
    let msg = format!(
        "evaluations {e_fast} vs {e_slow}, time {:.3} s vs {:.3} s, F1 {f1_fast:.1} vs {f1_slow:.1}",
        t_fast.as_secs_f64(),
        t_slow.as_secs_f64()
    );
    check(e_fast < e_slow && t_fast < t_slow && (f1_fast - f1_slow).abs() <= 5.0, msg.clone(), msg)
}

/// Minimum cost over every monotone warping path, by plain recursion.
fn dtw_exhaustive(t: &[GeoPoint], q: &[GeoPoint]) -> f64 {
    fn walk(t: &[GeoPoint], q: &[GeoPoint], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + implicit_obstacles::similarity::euclidean(t[i], q[j]);
        if i + 1 == t.len() && j + 1 == q.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < t.len() {
            walk(t, q, i + 1, j, acc, best);
        }
        if j + 1 < q.len() {
            walk(t, q, i, j + 1, acc, best);
        }
        if i + 1 < t.len() && j + 1 < q.len() {
            walk(t, q, i + 1, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(t, q, 0, 0, 0.0, &mut best);
    best
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<GeoPoint> {
    (0..n)
        .map(|_| GeoPoint::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)))
        .collect()
}

fn distance_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let (a, b) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let (t, q) = (random_points(&mut rng, a), random_points(&mut rng, b));
        let (dp, brute) = (dtw(&t, &q), dtw_exhaustive(&t, &q));
        if dp != brute {
            return Err(format!("pair {i}: dp {dp} vs exhaustive {brute}"));
        }
    }
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (t, q) = (random_points(&mut rng, 6), random_points(&mut rng, 6));
        let base = ndtw(&t, &q);
        let (tx, ty) = (rng.random_range(-1e4..1e4), rng.random_range(-1e4..1e4));
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let scale = rng.random_range(0.1..10.0);
        let (c, s) = (theta.cos(), theta.sin());
        let tf = |p: &GeoPoint| GeoPoint::new(scale * (c * p.x - s * p.y) + tx, scale * (s * p.x + c * p.y) + ty);
        let moved = ndtw(&t.iter().map(tf).collect::<Vec<_>>(), &q.iter().map(tf).collect::<Vec<_>>());
        worst = worst.max((moved - base).abs() / base);
    }
    check(
        worst <= 1e-9,
        format!("1000 exact DP/exhaustive matches, invariance error {worst:.1e}"),
        format!("invariance error {worst:.1e}"),
    )
}

fn density_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let corpora: Vec<CorpusIndex> = (0..4)
        .map(|s| build(random_walks(60, 12, 100 + s), CorpusKind::Reference, DistinctPrecompute::None))
        .collect();
    let k = 8;
    let mut checked = 0;
    while checked < 10_000 {
        let c = &corpora[rng.random_range(0..corpora.len())];
        let other = &corpora[rng.random_range(0..corpora.len())];
        let t = WindowId(rng.random_range(0..c.store().len() as u32));
        let Some(succ) = c.store().succ(t) else { continue };
        let params = DensityParams {
            sigma: rng.random_range(0.05..5.0),
            mode: NormalizationMode::KernelSum,
        };
        let probe = Probe::from_store(c.store(), t);
        let list = other.exact_distinct_knn(probe, k, None);
        let f = density(&list, &params, other.trajectory_count());
        let fs = succ_density(Probe::from_store(c.store(), succ), &list, other, &params, other.trajectory_count());
        if !(fs <= f) || !(0.0..=k as f64).contains(&f) {
            return Err(format!("profile {checked}: density {f}, succeed density {fs}"));
        }
        checked += 1;
    }
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let sigma: f64 = rng.random_range(0.01..10.0);
        let d: f64 = rng.random_range(0.0..10.0 * sigma);
        let oracle = 1.0 / (d / sigma * (d / sigma) * 0.5).exp();
        let k = kernel(d, sigma);
        if oracle > 0.0 {
            worst = worst.max((k - oracle).abs() / oracle);
        }
    }
    check(
        worst <= 1e-12,
        format!("10000 profiles ordered and bounded, kernel error {worst:.1e}"),
        format!("kernel error {worst:.1e}"),
    )
}

fn index_quality() -> Outcome {
    let idx = build(random_walks(1000, 55, 7), CorpusKind::Reference, DistinctPrecompute::Graph);
    let n = idx.store().len();
    let probes = random_walks(300, 6, 8);
    let (mut plain, mut distinct) = (0.0, 0.0);
    for (i, p) in probes.iter().enumerate() {
        let probe = Probe::new(p.points());
        let set = |v: Vec<Neighbor>| v.into_iter().map(|n| n.window).collect::<BTreeSet<_>>();
        plain += set(idx.knn(probe, 8)).intersection(&set(idx.exact_knn(probe, 8))).count() as f64 / 8.0;
        let exclude = (i % 2 == 0).then_some(i as u32);
        let got = idx.distinct_knn(probe, 8, exclude);
        let parents: BTreeSet<u32> = got.iter().map(|n| idx.store().parent(n.window)).collect();
        if parents.len() != got.len() || exclude.is_some_and(|e| parents.contains(&e)) {
            return Err(format!("probe {i}: distinct-parent invariant broken"));
        }
        distinct += set(got).intersection(&set(idx.exact_distinct_knn(probe, 8, exclude))).count() as f64 / 8.0;
    }
    let (plain, distinct) = (plain / probes.len() as f64, distinct / probes.len() as f64);
    let bytes = idx.to_bytes();
    let again = CorpusIndex::from_bytes(&bytes).unwrap().to_bytes();
    let msg = format!(
        "{n} windows, recall@8 plain {plain:.3} distinct {distinct:.3}, save/load/save identical: {}",
        bytes == again
    );
    check(n == 50_000 && plain >= 0.9 && distinct >= 0.9 && bytes == again, msg.clone(), msg)
}

/// True when every measurement is within a factor 2 of the best single-constant fit.
fn within_band(points: &[(f64, f64)]) -> (bool, Vec<f64>) {
    let ratios: Vec<f64> = points.iter().map(|(model, t)| t / model).collect();
    let c = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    let rel: Vec<f64> = ratios.iter().map(|r| r / c).collect();
    (rel.iter().all(|&r| (0.5..=2.0).contains(&r)), rel)
}

fn scaling() -> Outcome {
    let mut build_points = Vec::new();
    let mut reference = None;
    for windows in [10_000usize, 20_000, 40_000] {
        let trajs = random_walks(windows / 50, 55, 11);
        let (t, idx) = fastest(3, || build(trajs.clone(), CorpusKind::Reference, DistinctPrecompute::Graph));
        assert_eq!(idx.store().len(), windows);
        let n = windows as f64;
        build_points.push((n * n.ln(), t.as_secs_f64()));
        if windows == 20_000 {
            reference = Some(idx);
        }
    }
    let reference = reference.unwrap();
    let n = reference.store().len() as f64;
    let mut query_points = Vec::new();
    for windows in [1_000usize, 2_000, 4_000] {
        let query = build(random_walks(windows / 50, 55, 12), CorpusKind::Query, DistinctPrecompute::None);
        let (t, _) = fastest(3, || detect(&reference, &query, &DetectParams::default()).unwrap());
        let m = windows as f64;
        query_points.push((m * m.ln() + m * n.ln(), t.as_secs_f64()));
    }
    let (build_ok, build_rel) = within_band(&build_points);
    let (query_ok, query_rel) = within_band(&query_points);
    let secs = |v: &[(f64, f64)]| v.iter().map(|p| format!("{:.3}", p.1)).collect::<Vec<_>>().join("/");
    let msg = format!(
        "build {} s (fit ratios {:.2?}), detect {} s (fit ratios {:.2?})",
        secs(&build_points),
        build_rel,
        secs(&query_points),
        query_rel
    );
    check(build_ok && query_ok, msg.clone(), msg)
}

fn threshold_monotonicity() -> Outcome {
    let s = generate_scenario(&ScenarioParams::default()).unwrap();
    let reference = build(s.reference, CorpusKind::Reference, DistinctPrecompute::Graph);
    let query = build(s.query, CorpusKind::Query, DistinctPrecompute::None);
    let size = |tau: f64, delta: f64| {
        let params = DetectParams { tau, delta, ..DetectParams::default() };
        detect(&reference, &query, &params).unwrap().candidate_union().len()
    };
    let by_tau: Vec<usize> = TAUS.iter().map(|&t| size(t, 1.0)).collect();
    let by_delta: Vec<usize> = DELTAS.iter().map(|&d| size(1.645, d)).collect();
    let ok = by_tau.windows(2).all(|w| w[0] >= w[1]) && by_delta.windows(2).all(|w| w[0] >= w[1]);
    let msg = format!("union sizes over tau {by_tau:?}, over delta {by_delta:?}");
    check(ok, msg.clone(), msg)
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("planted-scenario detection", planted_detection),
        ("null test", null_test),
        ("optimizer equivalence", optimizer_equivalence),
        ("speedup direction", speedup_direction),
        ("distance correctness", distance_correctness),
        ("density properties", density_properties),
        ("index quality", index_quality),
        ("scaling", scaling),
        ("threshold monotonicity", threshold_monotonicity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "[{tag}] criterion {}: {name}: {detail} ({:.1} s)",
            i + 1,
            started.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
