//! Command-line interface.
//!
//! Settings resolve as command-line flag, then `--config` TOML file, then
//! built-in default. Results go to standard output; timings go to standard
//! error so that repeated runs print identical standard output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::density::{DensityParams, NormalizationMode};
use crate::detector::{detect, DetectParams, DetectionResult, Optimizations, ZMode};
use crate::error::{Error, Result};
use crate::geo::eval::{evaluate_shapes, shapes_of, EvalReport};
use crate::geo::geojson::{
    all_positions, export_geojson, read_geojson, read_obstacles, read_truths, truths_to_geojson, write_geojson,
};
use crate::geo::scenario::{generate_scenario, ScenarioParams};
use crate::geo::tracks::{fit_projection, interpolate_tracks, load_tracks, write_tracks};
use crate::geo::Projection;
use crate::index::{CorpusIndex, CorpusKind, DistinctPrecompute, IndexParams};
use crate::model::{PartitionParams, Trajectory};

pub const TAU_GRID: [f64; 5] = [1.282, 1.645, 1.960, 2.326, 2.576];
pub const DELTA_GRID: [f64; 8] = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

#[derive(Debug, Parser)]
#[command(name = "obstacles", version, about = "Detect implicit obstacles from trajectories")]
pub struct Cli {
    /// TOML file with default settings (flags take precedence).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and save the reference index.
    Index(IndexArgs),
    /// Detect obstacles of a query corpus against a saved reference index.
    Detect(DetectArgs),
    /// Score detections against ground truth.
    Eval(EvalArgs),
    /// Write a synthetic planted-obstacle scenario.
    Synth(SynthArgs),
    /// Run detection over a grid of thresholds.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Default)]
pub struct TrackArgs {
    /// Resampling interval in seconds.
    #[arg(long)]
    pub interval_s: Option<f64>,
    /// Gaps longer than this split a track (default 10 intervals).
    #[arg(long)]
    pub max_gap_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Trajectory CSV (track_id,timestamp,lat,lon).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub ef_construction: Option<usize>,
    #[arg(long)]
    pub ef_search: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fill the distinct-neighbor table by exact scan instead of the graph.
    #[arg(long)]
    pub exact_knn: bool,
    #[command(flatten)]
    pub tracks: TrackArgs,
}

#[derive(Debug, Args, Default)]
pub struct DetectOptions {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum)]
    pub z_mode: Option<ZMode>,
    #[arg(long, value_enum)]
    pub density_mode: Option<NormalizationMode>,
    #[arg(long)]
    pub no_optimizations: bool,
    /// Exact linear-scan neighbor searches.
    #[arg(long)]
    pub exact_knn: bool,
    /// Seed for the query index.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Query trajectory CSV.
    #[arg(long)]
    pub query: PathBuf,
    /// Obstacle GeoJSON.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub options: DetectOptions,
    #[command(flatten)]
    pub tracks: TrackArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Obstacle GeoJSON written by `detect`.
    #[arg(long)]
    pub detections: PathBuf,
    /// Ground-truth polygons.
    #[arg(long)]
    pub truth: PathBuf,
    /// Override the buffer of every truth region, in meters.
    #[arg(long)]
    pub enlarge_m: Option<f64>,
    /// Largest angle between heading and truth direction that still matches.
    #[arg(long, default_value_t = 90.0)]
    pub max_angle_deg: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory for reference.csv, query.csv, truth.geojson and scenario.json.
    #[arg(long)]
    pub output: PathBuf,
    /// JSON scenario parameters; missing fields take defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reference_count: Option<usize>,
    #[arg(long)]
    pub query_count: Option<usize>,
    #[arg(long)]
    pub noise_m: Option<f64>,
    #[arg(long)]
    pub two_sided: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub query: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    /// Comma-separated delta values. With `--taus`, the full product is run;
    /// with neither, delta and tau are swept one at a time over the default grids.
    #[arg(long, value_delimiter = ',')]
    pub deltas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Vec<f64>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub enlarge_m: Option<f64>,
    #[command(flatten)]
    pub options: DetectOptions,
    #[command(flatten)]
    pub tracks: TrackArgs,
}

/// Settings that may come from the config file.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub window: Option<usize>,
    pub step: Option<usize>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    pub ef_construction: Option<usize>,
    pub ef_search: Option<usize>,
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub interval_s: Option<f64>,
    pub max_gap_s: Option<f64>,
    pub z_mode: Option<ZMode>,
    pub density_mode: Option<NormalizationMode>,
    pub no_optimizations: Option<bool>,
    pub exact_knn: Option<bool>,
    pub threads: Option<usize>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.span().map_or(0, |s| text[..s.start].lines().count().max(1) as u64),
            message: e.message().to_string(),
        })
    }
}

pub const DEFAULT_INTERVAL_S: f64 = 30.0;

fn load_corpus(path: &Path, tracks: &TrackArgs, cfg: &Config, projection: Option<Projection>) -> Result<(Vec<Trajectory>, Projection)> {
    let interval = tracks.interval_s.or(cfg.interval_s).unwrap_or(DEFAULT_INTERVAL_S);
    let max_gap = tracks.max_gap_s.or(cfg.max_gap_s).unwrap_or(10.0 * interval);
    let raw = load_tracks(path)?;
    let projection = match projection.or_else(|| fit_projection(&raw)) {
        Some(p) => p,
        None => return Err(Error::InvalidParameter(format!("{}: no samples", path.display()))),
    };
    Ok((interpolate_tracks(&raw, &projection, interval, max_gap)?, projection))
}

fn detect_params(opts: &DetectOptions, cfg: &Config, index: &CorpusIndex) -> Result<DetectParams> {
    let d = DetectParams::default();
    let no_opt = opts.no_optimizations || cfg.no_optimizations.unwrap_or(false);
    let params = DetectParams {
        tau: opts.tau.or(cfg.tau).unwrap_or(d.tau),
        delta: opts.delta.or(cfg.delta).unwrap_or(d.delta),
        k: opts.k.or(cfg.k).unwrap_or(index.params().k),
        epsilon: opts.epsilon.or(cfg.epsilon).unwrap_or(d.epsilon),
        z_mode: opts.z_mode.or(cfg.z_mode).unwrap_or(d.z_mode),
        density: DensityParams {
            sigma: opts.sigma.or(cfg.sigma).unwrap_or(d.density.sigma),
            mode: opts.density_mode.or(cfg.density_mode).unwrap_or(d.density.mode),
        },
        optimizations: if no_opt { Optimizations::NONE } else { Optimizations::ALL },
        exact_knn: opts.exact_knn || cfg.exact_knn.unwrap_or(false),
    };
    params.validate()?;
    Ok(params)
}

/// Load the reference index and build the query index over the same windows.
fn prepare_query(
    index_path: &Path,
    query_path: &Path,
    opts: &DetectOptions,
    tracks: &TrackArgs,
    cfg: &Config,
) -> Result<(CorpusIndex, CorpusIndex, Projection, DetectParams)> {
    let reference = CorpusIndex::load(index_path)?;
    let params = detect_params(opts, cfg, &reference)?;
    let (trajs, projection) = load_corpus(query_path, tracks, cfg, reference.origin())?;
    let mut qparams = *reference.params();
    qparams.k = params.k;
    if let Some(seed) = opts.seed.or(cfg.seed) {
        qparams.seed = seed;
    }
    let started = Instant::now();
    let query = CorpusIndex::build(trajs, reference.partition(), qparams, CorpusKind::Query, DistinctPrecompute::None)?;
    eprintln!("query indexing: {:.3} s", started.elapsed().as_secs_f64());
    Ok((reference, query, projection, params))
}

fn cmd_index(args: &IndexArgs, cfg: &Config) -> Result<()> {
    let partition = PartitionParams::new(
        args.window.or(cfg.window).unwrap_or(6),
        args.step.or(cfg.step).unwrap_or(1),
    )?;
    let d = IndexParams::default();
    let params = IndexParams {
        k: args.k.or(cfg.k).unwrap_or(d.k),
        m: args.m.or(cfg.m).unwrap_or(d.m),
        ef_construction: args.ef_construction.or(cfg.ef_construction).unwrap_or(d.ef_construction),
        ef_search: args.ef_search.or(cfg.ef_search).unwrap_or(d.ef_search),
        seed: args.seed.or(cfg.seed).unwrap_or(d.seed),
    };
    params.validate()?;
    let (trajs, projection) = load_corpus(&args.input, &args.tracks, cfg, None)?;
    let exact = args.exact_knn || cfg.exact_knn.unwrap_or(false);
    let precompute = if exact { DistinctPrecompute::Exact } else { DistinctPrecompute::Graph };
    let started = Instant::now();
    let mut index = CorpusIndex::build(trajs, partition, params, CorpusKind::Reference, precompute)?;
    eprintln!("build time: {:.3} s", started.elapsed().as_secs_f64());
    index.set_origin(Some(projection));
    index.save(&args.output)?;
    println!("trajectories: {}", index.trajectory_count());
    println!("windows: {}", index.store().len());
    println!("indexed windows: {}", index.indexed_len());
    println!("w={} s={} k={}", partition.window(), partition.step(), params.k);
    Ok(())
}

fn print_detection(result: &DetectionResult) {
    println!("obstacles: {}", result.obstacles.len());
    println!("candidates: {}", result.candidate_union().len());
    let s = &result.stats;
    println!("queries checked: {}", s.queries_checked);
    println!("candidates tested: {}", s.candidates_tested);
    println!("skips taken: {}", s.skips_taken);
    println!("distance evaluations: {}", s.distance_evaluations);
}

fn cmd_detect(args: &DetectArgs, cfg: &Config) -> Result<()> {
    let (reference, query, projection, params) =
        prepare_query(&args.index, &args.query, &args.options, &args.tracks, cfg)?;
    let result = detect(&reference, &query, &params)?;
    eprintln!("query time: {:.3} s", result.elapsed.as_secs_f64());
    export_geojson(&result, &projection, &args.output)?;
    print_detection(&result);
    Ok(())
}

fn load_truths(path: &Path, enlarge_m: Option<f64>, projection: &Projection) -> Result<Vec<crate::geo::eval::GroundTruthRegion>> {
    let mut truths = read_truths(&read_geojson(path)?, projection)?;
    if let Some(e) = enlarge_m {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!("enlarge_m must be non-negative, got {e}")));
        }
        truths.iter_mut().for_each(|t| t.enlarge_m = e);
    }
    if truths.is_empty() {
        return Err(Error::InvalidParameter(format!("{}: no ground truth regions", path.display())));
    }
    Ok(truths)
}

fn print_report(r: &EvalReport) {
    if r.precision_defined {
        println!("precision: {:.1}", r.precision);
    } else {
        println!("precision: {:.1} (no obstacles returned)", r.precision);
    }
    println!("recall: {:.1}", r.recall);
    println!("f1: {:.1}", r.f1);
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let detections = read_geojson(&args.detections)?;
    let truth_doc = read_geojson(&args.truth)?;
    let coords = all_positions(&truth_doc)?;
    let projection = Projection::fit(coords)
        .ok_or_else(|| Error::InvalidParameter(format!("{}: no ground truth regions", args.truth.display())))?;
    let truths = load_truths(&args.truth, args.enlarge_m, &projection)?;
    let obstacles = read_obstacles(&detections, &projection)?;
    let report = evaluate_shapes(&obstacles, &truths, args.max_angle_deg)?;
    print_report(&report);
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut params = match &args.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                line: e.line() as u64,
                message: e.to_string(),
            })?
        }
        None => ScenarioParams::default(),
    };
    if let Some(v) = args.seed {
        params.seed = v;
    }
    if let Some(v) = args.reference_count {
        params.reference_count = v;
    }
    if let Some(v) = args.query_count {
        params.query_count = v;
    }
    if let Some(v) = args.noise_m {
        params.noise_m = v;
    }
    params.two_sided |= args.two_sided;
    let scenario = generate_scenario(&params)?;
    std::fs::create_dir_all(&args.output).map_err(|e| Error::io(&args.output, e))?;
    let proj = params.projection();
    let dir = &args.output;
    write_tracks(dir.join("reference.csv"), &scenario.reference, &proj, params.start_timestamp, params.interval_s)?;
    write_tracks(dir.join("query.csv"), &scenario.query, &proj, params.start_timestamp, params.interval_s)?;
    write_geojson(&truths_to_geojson(std::slice::from_ref(&scenario.truth), &proj), dir.join("truth.geojson"))?;
    let doc = serde_json::json!({"generator": "planted_disk", "params": params, "seed": params.seed});
    let path = dir.join("scenario.json");
    std::fs::write(&path, crate::geo::geojson::to_canonical_string(&doc)).map_err(|e| Error::io(&path, e))?;
    println!("reference trajectories: {}", scenario.reference.len());
    println!("query trajectories: {}", scenario.query.len());
    println!("truth vertices: {}", scenario.truth.polygon.len());
    Ok(())
}

fn sweep_grid(deltas: &[f64], taus: &[f64], base: &DetectParams) -> Vec<(f64, f64)> {
    if deltas.is_empty() && taus.is_empty() {
        let by_delta = DELTA_GRID.iter().map(|&d| (d, 1.645));
        let by_tau = TAU_GRID.iter().map(|&t| (1.0, t));
        return by_delta.chain(by_tau).collect();
    }
    let deltas = if deltas.is_empty() { vec![base.delta] } else { deltas.to_vec() };
    let taus = if taus.is_empty() { vec![base.tau] } else { taus.to_vec() };
    deltas.iter().flat_map(|&d| taus.iter().map(move |&t| (d, t))).collect()
}

fn cmd_sweep(args: &SweepArgs, cfg: &Config) -> Result<()> {
    let (reference, query, projection, base) =
        prepare_query(&args.index, &args.query, &args.options, &args.tracks, cfg)?;
    let truths = load_truths(&args.truth, args.enlarge_m, &projection)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    let header = ["delta", "tau", "precision", "recall", "f1", "query_time_s", "obstacles", "candidates"];
    out.write_record(header).expect("in-memory csv");
    for (delta, tau) in sweep_grid(&args.deltas, &args.taus, &base) {
        let params = DetectParams { delta, tau, ..base };
        let result = detect(&reference, &query, &params)?;
        let r = evaluate_shapes(&shapes_of(&result), &truths, 90.0)?;
        out.write_record([
            delta.to_string(),
            tau.to_string(),
            format!("{:.1}", r.precision),
            format!("{:.1}", r.recall),
            format!("{:.1}", r.f1),
            format!("{:.6}", result.elapsed.as_secs_f64()),
            result.obstacles.len().to_string(),
            result.candidate_union().len().to_string(),
        ])
        .expect("in-memory csv");
    }
    let bytes = out.into_inner().expect("in-memory csv");
    match &args.output {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?,
        None => print!("{}", String::from_utf8(bytes).expect("csv is utf-8")),
    }
    Ok(())
}

/// Run a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        // fails only when a pool already exists, which is harmless here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Index(a) => cmd_index(a, &cfg),
        Command::Detect(a) => cmd_detect(a, &cfg),
        Command::Eval(a) => cmd_eval(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Sweep(a) => cmd_sweep(a, &cfg),
    }
}
