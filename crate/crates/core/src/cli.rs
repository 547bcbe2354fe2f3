//! Batch command-line front end. Every command writes its outputs plus a
//! `manifest.json` into an output directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::centrality::{HiIndexConfig, Measure, PageRankConfig};
use crate::diffusion::{edge_probabilities, estimate_spread, ProbabilityMode};
use crate::embedding_bridge::{load_scores, InfluenceScores};
use crate::error::{Error, Result};
use crate::glass_ceiling::{
    ccdf, compute_measure, glass_ceiling_summary, top_percentile_tests, write_test_details, write_test_table,
    GlassCeilingConfig, ANALYSIS_MEASURES,
};
use crate::graph::{self, generate_synthetic, InteractionGraph, InteractionType, LoadOptions, SyntheticGraphParams};
use crate::seeding::{
    agnostic_seeding, disparity_seed, diversity_seeding_baseline, im_balanced_baseline, uniform_grid, EvalResult,
    MarginKind, SeedSet, SeedingConfig,
};

pub const NODES_FILE: &str = "nodes.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "disparity", version, about = "Gender-aware centrality, glass-ceiling tests and target-ratio seeding")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Edge probability rule.
    #[arg(long, global = true, default_value = "literal")]
    pub mode: ProbabilityMode,
    #[arg(long, global = true, default_value = "relative")]
    pub margin_kind: MarginKind,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load interaction CSVs, drop inactive users and write a graph archive.
    Ingest(IngestArgs),
    /// Centrality distributions, top-percentile U-tests and glass-ceiling summary.
    Analyze(AnalyzeArgs),
    /// Disparity seeding for a target female ratio.
    Seed(SeedArgs),
    /// Comparison seeding strategies.
    Baselines(BaselineArgs),
    /// Generate a synthetic gendered interaction graph archive.
    Synth(SynthArgs),
    /// Estimate spread and influenced female ratio of a given seed set.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TypeArg {
    Like,
    Comment,
    Tag,
}

impl From<TypeArg> for InteractionType {
    fn from(t: TypeArg) -> Self {
        match t {
            TypeArg::Like => InteractionType::Like,
            TypeArg::Comment => InteractionType::Comment,
            TypeArg::Tag => InteractionType::Tag,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IngestArgs {
    #[arg(long)]
    pub nodes: PathBuf,
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long = "type", value_enum, default_value = "like")]
    pub itype: TypeArg,
    /// Users with fewer interactions (sent + received) are dropped.
    #[arg(long, default_value_t = 2)]
    pub min_total: u64,
    #[arg(long)]
    pub keep_self_loops: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Graph archive directory.
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_delimiter = ',', default_values = ["in-intensity", "out-intensity", "in-degree", "out-degree", "hi-index", "pagerank"])]
    pub measures: Vec<Measure>,
    #[arg(long, value_delimiter = ',', default_values = ["0.1", "0.01", "0.001"])]
    pub percentiles: Vec<f64>,
    /// Top band checked for male dominance.
    #[arg(long, default_value_t = 0.01)]
    pub band: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SeedArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Target female ratio among influenced users.
    #[arg(long)]
    pub zeta: f64,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_value = "target-hi-index")]
    pub measures: Vec<Measure>,
    #[arg(long, default_value_t = 0.2)]
    pub margin: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Probe seed group size used to learn the ratio map.
    #[arg(long, default_value_t = 20)]
    pub sample_k: usize,
    /// Number of evenly spaced seeding ratios probed in [0,1].
    #[arg(long, default_value_t = 11)]
    pub grid_points: usize,
    /// `node_id<TAB>score` file, required by the embedding index.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    Agnostic,
    Diversity,
    ImBalanced,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub zeta: f64,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "all")]
    pub which: Which,
    #[arg(long, default_value_t = 0.2)]
    pub margin: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Monte Carlo samples per greedy objective evaluation.
    #[arg(long, default_value_t = 1_000)]
    pub greedy_samples: usize,
    /// Only the top nodes by in-degree are greedy candidates.
    #[arg(long)]
    pub candidate_pool: Option<usize>,
    #[arg(long, default_value_t = 11)]
    pub grid_points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub female_fraction: f64,
    #[arg(long, default_value_t = 0.6)]
    pub homophily: f64,
    #[arg(long, default_value_t = 1.0)]
    pub attachment_exponent: f64,
    #[arg(long, default_value_t = 2.0)]
    pub mean_intensity: f64,
    #[arg(long, default_value_t = 4)]
    pub edges_per_node: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Seed node ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub seeds: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Also write `estimate.json` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub global: GlobalArgs,
    /// SHA-256 of every input file.
    pub inputs: BTreeMap<String, String>,
    pub master_seed: u64,
    pub threads: usize,
    pub version: String,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}

struct Run {
    command: &'static str,
    config: serde_json::Value,
    inputs: BTreeMap<String, String>,
    started: SystemTime,
    clock: Instant,
}

impl Run {
    fn new(command: &'static str, config: &impl Serialize) -> Result<Self> {
        Ok(Run {
            command,
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    fn finish(self, global: &GlobalArgs, out: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            config: self.config,
            global: global.clone(),
            inputs: self.inputs,
            master_seed: global.seed,
            threads: rayon::current_num_threads(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            elapsed_seconds: self.clock.elapsed().as_secs_f64(),
        };
        write_json(&out.join(MANIFEST_FILE), &manifest)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Interaction type of an archive, read from the first edge row.
fn archive_type(edges: &Path) -> Result<InteractionType> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(edges)
        .map_err(|e| Error::Malformed {
            path: edges.to_path_buf(),
            line: 1,
            column: "type".into(),
            message: e.to_string(),
        })?;
    match rdr.records().next() {
        Some(Ok(row)) => row
            .get(2)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Malformed {
                path: edges.to_path_buf(),
                line: 2,
                column: "type".into(),
                message: "missing or unknown interaction type".into(),
            }),
        _ => Ok(InteractionType::Like),
    }
}

/// Load a graph archive directory written by `ingest` or `synth`.
pub fn load_archive(dir: &Path) -> Result<InteractionGraph> {
    let nodes = dir.join(NODES_FILE);
    let edges = dir.join(EDGES_FILE);
    let itype = archive_type(&edges)?;
    graph::load_interactions(&nodes, &edges, itype, LoadOptions { keep_self_loops: true })
}

fn load_archive_tracked(dir: &Path, run: &mut Run) -> Result<InteractionGraph> {
    run.input(&dir.join(NODES_FILE))?;
    run.input(&dir.join(EDGES_FILE))?;
    load_archive(dir)
}

pub fn write_archive(g: &InteractionGraph, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    g.write_csv(&dir.join(NODES_FILE), &dir.join(EDGES_FILE))
}

pub fn cmd_ingest(global: &GlobalArgs, args: &IngestArgs) -> Result<InteractionGraph> {
    if args.min_total == 0 {
        return Err(Error::InvalidParameter("--min-total must be at least 1".into()));
    }
    let mut run = Run::new("ingest", args)?;
    run.input(&args.nodes)?;
    run.input(&args.edges)?;
    let opts = LoadOptions {
        keep_self_loops: args.keep_self_loops,
    };
    let raw = graph::load_interactions(&args.nodes, &args.edges, args.itype.into(), opts)?;
    let g = graph::filter_inactive(&raw, args.min_total);
    log::info!(
        "kept {} of {} users, {} of {} edges",
        g.node_count(),
        raw.node_count(),
        g.edge_count(),
        raw.edge_count()
    );
    write_archive(&g, &args.out)?;
    run.finish(global, &args.out)?;
    Ok(g)
}

pub fn cmd_analyze(global: &GlobalArgs, args: &AnalyzeArgs) -> Result<()> {
    let mut run = Run::new("analyze", args)?;
    let g = load_archive_tracked(&args.graph, &mut run)?;
    ensure_dir(&args.out)?;
    let cfg = GlassCeilingConfig {
        band: args.band,
        alpha: args.alpha,
        hi: HiIndexConfig::default(),
        pagerank: PageRankConfig::default(),
    };
    let mut tests = Vec::with_capacity(args.measures.len());
    for &measure in &args.measures {
        let table = compute_measure(&g, measure, cfg.hi, &cfg.pagerank)?;
        for gender in crate::graph::Gender::BOTH {
            let curve = match ccdf(&table, &g, gender) {
                Ok(c) => c,
                Err(Error::EmptyGenderGroup { .. }) => {
                    log::warn!("no {gender} users: skipping the {gender} distribution of {measure}");
                    continue;
                }
                Err(e) => return Err(e),
            };
            let path = args.out.join(format!("ccdf_{}_{}.csv", measure.name(), gender));
            write_with(&path, |w| curve.write_csv(w))?;
        }
        tests.push((measure, top_percentile_tests(&table, &g, &args.percentiles)?));
    }
    write_with(&args.out.join("utest.csv"), |w| write_test_table(w, &tests))?;
    write_with(&args.out.join("utest_details.csv"), |w| write_test_details(w, &tests))?;

    let report = glass_ceiling_summary(&g, &args.measures, &cfg)?;
    write_with(&args.out.join("glass_ceiling.csv"), |w| report.write_csv(w))?;
    for m in report.flagged() {
        println!("glass ceiling: {m}");
    }
    run.finish(global, &args.out)
}

/// Result record of a seeding run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedReport {
    pub measure: String,
    pub zeta: f64,
    /// Seeding ratio chosen by the strategy.
    pub r: f64,
    /// Female share of the seed set actually built.
    pub realized_r: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub female_seeds: usize,
    pub abs_error: f64,
    pub s: f64,
    pub spread: f64,
    pub within_margin: bool,
    pub margin_kind: MarginKind,
    pub mode: ProbabilityMode,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_of_range: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feasible: Option<bool>,
}

impl SeedReport {
    fn new(label: &str, seeds: &SeedSet, eval: &EvalResult, cfg: &SeedingConfig, global: &GlobalArgs) -> Self {
        SeedReport {
            measure: label.to_string(),
            zeta: cfg.zeta,
            r: seeds.requested_r,
            realized_r: seeds.r,
            k: seeds.len(),
            female_seeds: seeds.female_count,
            abs_error: eval.abs_error,
            s: eval.s,
            spread: eval.spread,
            within_margin: eval.within_margin,
            margin_kind: cfg.margin_kind,
            mode: global.mode,
            master_seed: global.seed,
            out_of_range: None,
            feasible: None,
        }
    }
}

fn seeding_config(global: &GlobalArgs, k: usize, zeta: f64, margin: f64, samples: usize) -> SeedingConfig {
    SeedingConfig {
        error_margin: margin,
        margin_kind: global.margin_kind,
        num_samples: samples,
        master_seed: global.seed,
        ..SeedingConfig::new(k, zeta)
    }
}

pub fn cmd_seed(global: &GlobalArgs, args: &SeedArgs) -> Result<SeedReport> {
    let mut run = Run::new("seed", args)?;
    let g = load_archive_tracked(&args.graph, &mut run)?;
    let scores: Option<InfluenceScores> = match &args.scores {
        Some(path) => {
            run.input(path)?;
            Some(load_scores(path, &g)?)
        }
        None => None,
    };
    let cfg = SeedingConfig {
        sample_k: args.sample_k,
        r_grid: uniform_grid(0.0, 1.0, args.grid_points),
        ..seeding_config(global, args.k, args.zeta, args.margin, args.samples)
    };
    let pg = edge_probabilities(&g, global.mode);
    let result = disparity_seed(&g, &pg, &cfg, &args.measures, scores.as_ref())?;

    ensure_dir(&args.out)?;
    for r in &result.runs {
        let path = args.out.join(format!("scaling_{}.csv", r.measure.name()));
        write_with(&path, |w| r.scaling.write_csv(w))?;
    }
    let best = result.best();
    write_with(&args.out.join("seeds.csv"), |w| best.seeds.write_csv(w, &g))?;
    let mut report = SeedReport::new(best.measure.name(), &best.seeds, &best.eval, &cfg, global);
    report.out_of_range = Some(best.inversion.out_of_range);
    write_json(&args.out.join("result.json"), &report)?;
    if result.runs.len() > 1 {
        let all: Vec<SeedReport> = result
            .runs
            .iter()
            .map(|r| {
                let mut rep = SeedReport::new(r.measure.name(), &r.seeds, &r.eval, &cfg, global);
                rep.out_of_range = Some(r.inversion.out_of_range);
                rep
            })
            .collect();
        write_json(&args.out.join("measures.json"), &all)?;
    }
    run.finish(global, &args.out)?;
    Ok(report)
}

pub fn cmd_baselines(global: &GlobalArgs, args: &BaselineArgs) -> Result<Vec<SeedReport>> {
    let mut run = Run::new("baselines", args)?;
    let g = load_archive_tracked(&args.graph, &mut run)?;
    let cfg = SeedingConfig {
        greedy_samples: args.greedy_samples,
        candidate_pool: args.candidate_pool,
        diversity_points: args.grid_points,
        ..seeding_config(global, args.k, args.zeta, args.margin, args.samples)
    };
    let pg = edge_probabilities(&g, global.mode);
    ensure_dir(&args.out)?;
    let wanted = |w: Which| args.which == w || args.which == Which::All;

    let mut reports = Vec::new();
    let mut emit = |name: &str, seeds: &SeedSet, report: SeedReport| -> Result<()> {
        write_with(&args.out.join(format!("{name}_seeds.csv")), |w| seeds.write_csv(w, &g))?;
        write_json(&args.out.join(format!("{name}.json")), &report)?;
        reports.push(report);
        Ok(())
    };
    if wanted(Which::Agnostic) {
        let res = agnostic_seeding(&g, &pg, &cfg)?;
        emit("agnostic", &res.seeds, SeedReport::new("agnostic", &res.seeds, &res.eval, &cfg, global))?;
    }
    if wanted(Which::Diversity) {
        let res = diversity_seeding_baseline(&g, &pg, &cfg)?;
        emit("diversity", &res.seeds, SeedReport::new("diversity", &res.seeds, &res.eval, &cfg, global))?;
    }
    if wanted(Which::ImBalanced) {
        let res = im_balanced_baseline(&g, &pg, &cfg)?;
        if !res.feasible {
            eprintln!(
                "warning: im-balanced could not reach {:.3} expected female influence (got a best effort seed set)",
                res.target_female
            );
        }
        let mut rep = SeedReport::new("im-balanced", &res.seeds, &res.eval, &cfg, global);
        rep.feasible = Some(res.feasible);
        emit("im-balanced", &res.seeds, rep)?;
    }
    run.finish(global, &args.out)?;
    Ok(reports)
}

pub fn cmd_synth(global: &GlobalArgs, args: &SynthArgs) -> Result<InteractionGraph> {
    let run = Run::new("synth", args)?;
    let params = SyntheticGraphParams {
        n: args.n,
        female_fraction: args.female_fraction,
        homophily: args.homophily,
        attachment_exponent: args.attachment_exponent,
        mean_intensity: args.mean_intensity,
        edges_per_node: args.edges_per_node,
        rng_seed: global.seed,
    };
    let g = generate_synthetic(&params)?;
    write_archive(&g, &args.out)?;
    run.finish(global, &args.out)?;
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub mean_spread: f64,
    pub female_ratio: f64,
    pub std_spread: f64,
    pub num_samples: usize,
    pub master_seed: u64,
    pub mode: ProbabilityMode,
}

pub fn cmd_simulate(global: &GlobalArgs, args: &SimulateArgs) -> Result<SimulateReport> {
    let mut run = Run::new("simulate", args)?;
    let g = load_archive_tracked(&args.graph, &mut run)?;
    let seeds = args.seeds.iter().map(|id| g.require(id)).collect::<Result<Vec<_>>>()?;
    let pg = edge_probabilities(&g, global.mode);
    let est = estimate_spread(&pg, &seeds, args.samples, global.seed)?;
    let report = SimulateReport {
        mean_spread: est.mean_spread,
        female_ratio: est.mean_female_ratio,
        std_spread: est.std_spread,
        num_samples: est.num_samples,
        master_seed: global.seed,
        mode: global.mode,
    };
    println!("{}", serde_json::to_string(&report)?);
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_json(&out.join("estimate.json"), &report)?;
        run.finish(global, out)?;
    }
    Ok(report)
}

/// Argument combinations clap cannot express on its own.
pub fn usage_problem(cli: &Cli) -> Option<String> {
    match &cli.command {
        Command::Seed(a) if a.measures.contains(&Measure::EmbeddingIndex) && a.scores.is_none() => {
            Some("the embedding-index measure needs --scores <FILE>".into())
        }
        Command::Analyze(a) => a
            .measures
            .iter()
            .find(|m| !ANALYSIS_MEASURES.contains(m))
            .map(|m| format!("{m} cannot be analysed without a target ratio; use one of the unparameterised measures")),
        _ => None,
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.global.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker threads: {e}")))?;
    let global = &cli.global;
    pool.install(|| match &cli.command {
        Command::Ingest(a) => cmd_ingest(global, a).map(drop),
        Command::Analyze(a) => cmd_analyze(global, a),
        Command::Seed(a) => cmd_seed(global, a).map(|r| {
            println!(
                "{}: r = {:.4}, s = {:.4}, |s - zeta| = {:.4}, spread = {:.2}, within margin: {}",
                r.measure, r.r, r.s, r.abs_error, r.spread, r.within_margin
            )
        }),
        Command::Baselines(a) => cmd_baselines(global, a).map(|reps| {
            for r in reps {
                println!(
                    "{}: r = {:.4}, s = {:.4}, |s - zeta| = {:.4}, spread = {:.2}, within margin: {}",
                    r.measure, r.r, r.s, r.abs_error, r.spread, r.within_margin
                );
            }
        }),
        Command::Synth(a) => cmd_synth(global, a).map(drop),
        Command::Simulate(a) => cmd_simulate(global, a).map(drop),
    })
}
