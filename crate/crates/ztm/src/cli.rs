//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use ztm_core::synthbench::{
    component_ladder, evaluate_variant_prepared, generate_world, joint_pair, pooling_variants, prior_pair, Variant,
    WorldSpec,
};
use ztm_core::{default_config, evaluate, AggregationSpec, EvalMode, EvalParams, Metric, Pooling, ScoringConfig};

use crate::cache::DescriptorCache;
use crate::error::{Error, Result};
use crate::inspect::{summarize_bank, summarize_proposals};
use crate::io::{bank, ground_truth, predictions, proposals, read_text, report, stages, world};
use crate::runner::{default_jobs, run_match};

#[derive(Debug, Parser)]
#[command(name = "ztm", version, about = "Training-free template matching of object proposals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replace raw patch tokens of a bank by GeM descriptors.
    Pool(PoolArgs),
    /// Score proposals against a bank and write predictions.
    Match(MatchArgs),
    /// COCO-style mAP of predictions against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic world and write it in the regular formats.
    Synth(SynthArgs),
    /// Run an ablation grid on a synthetic world and print a Markdown table.
    Ablate(AblateArgs),
    /// Print dimensions and storage footprint of a bank or proposal file.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    /// Raw bank directory.
    #[arg(long)]
    pub bank: PathBuf,
    /// GeM exponent.
    #[arg(long, default_value_t = default_config().e)]
    pub e: f64,
    /// Output bank directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Scoring overrides; each one wins over the config file.
#[derive(Debug, Default, Args)]
pub struct ScoringFlags {
    #[arg(long)]
    pub e: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Drop the objectness prior.
    #[arg(long, conflicts_with = "prior")]
    pub no_prior: bool,
    /// Apply the objectness prior even if the config file turns it off.
    #[arg(long)]
    pub prior: bool,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// `tanimoto` or `cosine`.
    #[arg(long)]
    pub metric: Option<Metric>,
    /// `gem`, `mean` or `max`.
    #[arg(long)]
    pub pooling: Option<Pooling>,
    /// Drop detections scoring below this value.
    #[arg(long)]
    pub score_floor: Option<f64>,
}

impl ScoringFlags {
    fn apply(&self, cfg: &mut ScoringConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(e, alpha, beta, tau, gamma, top_k, metric, pooling);
        if self.score_floor.is_some() {
            cfg.score_floor = self.score_floor;
        }
        if self.no_prior {
            cfg.prior = false;
        }
        if self.prior {
            cfg.prior = true;
        }
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long)]
    pub bank: PathBuf,
    #[arg(long)]
    pub proposals: PathBuf,
    /// JSON file with scoring fields; missing fields keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// View aggregation: `topk`, `topk:<K>`, `max` or `mean` (default: top-K with the configured K).
    #[arg(long)]
    pub agg: Option<AggregationSpec>,
    /// Predictions file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for abs/rel/joint/final score dumps.
    #[arg(long)]
    pub dump_stages: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, env = "ZTM_JOBS")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub scoring: ScoringFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Bbox,
    Mask,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Bbox)]
    pub mode: Mode,
    /// Keep only the N best detections per image and class.
    #[arg(long)]
    pub max_dets: Option<usize>,
    /// Write the full report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Plain world: objects only.
    Default,
    /// 30% of objects blended toward a wrong class.
    HardNegatives,
    /// 40% background proposals without ground truth.
    Clutter,
}

#[derive(Debug, Args)]
pub struct WorldArgs {
    /// JSON world spec; missing fields keep their defaults.
    #[arg(long, conflicts_with = "suite")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub suite: Option<Suite>,
    /// Overrides the seed of the spec or suite.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl WorldArgs {
    fn world_spec(&self) -> Result<WorldSpec> {
        let mut spec = match (&self.spec, self.suite) {
            (Some(path), _) => serde_json::from_str(&read_text(path)?)
                .map_err(|e| Error::parse(path, Some(e.line()), e.to_string()))?,
            (None, Some(Suite::HardNegatives)) => WorldSpec::hard_negative_suite(0),
            (None, Some(Suite::Clutter)) => WorldSpec::clutter_suite(0),
            (None, _) => WorldSpec::default(),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Grid {
    /// Cumulative component ladder ending at the default configuration.
    Ladder,
    /// Absolute-only against joint scoring.
    Joint,
    /// With and without the objectness prior.
    Prior,
    /// Class / patch / pooling variants.
    Pooling,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub world: WorldArgs,
    #[arg(long, value_enum, default_value_t = Grid::Ladder)]
    pub grid: Grid,
    /// Average over this many consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Worker threads (default: all cores).
    #[arg(long, env = "ZTM_JOBS")]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct InspectArgs {
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long)]
    pub proposals: Option<PathBuf>,
}

/// Built-in defaults, then the config file, then explicit flags.
pub fn effective_config(file: Option<&Path>, flags: &ScoringFlags) -> Result<ScoringConfig> {
    let mut cfg = match file {
        Some(path) => {
            serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, Some(e.line()), e.to_string()))?
        }
        None => default_config(),
    };
    flags.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pool(a) => cmd_pool(&a),
        Command::Match(a) => cmd_match(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::Inspect(a) => cmd_inspect(&a),
    }
}

fn cmd_pool(a: &PoolArgs) -> Result<()> {
    let report = bank::pool_bank_files(&a.bank, a.e, &a.out)?;
    println!("{report}");
    Ok(())
}

fn cmd_match(a: &MatchArgs) -> Result<()> {
    let mut cfg = effective_config(a.config.as_deref(), &a.scoring)?;
    let agg = a.agg.unwrap_or(AggregationSpec::TopKMean(cfg.top_k));
    if let AggregationSpec::TopKMean(k) = agg {
        cfg.top_k = k;
    }
    let jobs = a.jobs.unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(Error::Usage("--jobs must be >= 1".into()));
    }
    let bank = bank::load_bank(&a.bank)?;
    let proposals = proposals::load_proposals(&a.proposals, Some(bank.dim))?;
    let cache = DescriptorCache::new(&bank);
    let prepared = cache.get(cfg.pooling.with_exponent(cfg.e))?;
    let out = run_match(&proposals, &prepared, &cfg, agg, jobs)?;
    if let Some(dir) = &a.dump_stages {
        stages::dump_stages(&out.stages(), dir)?;
    }
    predictions::save_predictions(&out.detections, Some(predictions::Header::new(cfg, agg.to_string())), &a.out)?;
    eprintln!(
        "matched {} proposals x {} classes ({}, {}, {} jobs): {} detections -> {}",
        proposals.len(),
        prepared.n_classes(),
        cfg.metric.as_str(),
        agg,
        jobs,
        out.detections.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let detections = predictions::load_predictions(&a.pred)?;
    let gt = ground_truth::load_ground_truth(&a.gt)?;
    let mode = match a.mode {
        Mode::Bbox => EvalMode::BBox,
        Mode::Mask => EvalMode::Mask,
    };
    let r = evaluate(&detections, &gt, EvalParams { mode, max_dets: a.max_dets })?;
    println!("map {:.3}", r.map);
    println!("map50 {:.3}", r.map_at(0));
    println!("map75 {:.3}", r.map_at(5));
    for (i, id) in r.class_ids.iter().enumerate() {
        match r.ap_per_class[i] {
            Some(ap) => println!("  {id} {ap:.3} ({} gt)", r.gt_counts[i]),
            None => println!("  {id} - (no gt)"),
        }
    }
    if let Some(path) = &a.out {
        report::save_report(&r, path)?;
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = a.world.world_spec()?;
    let w = generate_world(&spec)?;
    world::export_world(&spec, &w, &a.out)?;
    eprintln!(
        "world seed {}: {} classes x {} views, {} images, {} proposals -> {}",
        spec.seed,
        spec.n_classes,
        spec.views_per_class,
        spec.n_images,
        spec.n_images * spec.proposals_per_image,
        a.out.display()
    );
    Ok(())
}

/// Mean mAP of every variant over `seeds` consecutive worlds.
pub fn ablation_maps(spec: &WorldSpec, variants: &[Variant], seeds: u64, jobs: usize) -> Result<Vec<f64>> {
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| Error::Internal(e.to_string()))?;
    let mut sums = vec![0.0; variants.len()];
    for s in 0..seeds.max(1) {
        let w = generate_world(&WorldSpec { seed: spec.seed + s, ..spec.clone() })?;
        let cache = DescriptorCache::new(&w.bank);
        let maps: Vec<f64> = pool.install(|| {
            variants
                .par_iter()
                .map(|v| {
                    let prepared = cache.get(v.config.pooling.with_exponent(v.config.e))?;
                    Ok(evaluate_variant_prepared(&w, &prepared, v)?)
                })
                .collect::<Result<_>>()
        })?;
        for (sum, m) in sums.iter_mut().zip(maps) {
            *sum += m;
        }
    }
    Ok(sums.into_iter().map(|s| s / seeds.max(1) as f64).collect())
}

/// Markdown table with the change against the previous row.
pub fn ablation_table(variants: &[Variant], maps: &[f64]) -> String {
    let mut out = String::from("| variant | mAP | Δ |\n| --- | ---: | --- |\n");
    for (i, (v, m)) in variants.iter().zip(maps).enumerate() {
        let delta = match i.checked_sub(1).map(|p| m - maps[p]) {
            None => String::new(),
            Some(d) if d > 0.0 => format!("↑ {d:.3}"),
            Some(d) if d < 0.0 => format!("↓ {:.3}", -d),
            Some(_) => "= 0.000".into(),
        };
        out.push_str(&format!("| {} | {m:.3} | {delta} |\n", v.name));
    }
    out
}

fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let spec = a.world.world_spec()?;
    let variants = match a.grid {
        Grid::Ladder => component_ladder(),
        Grid::Joint => joint_pair(),
        Grid::Prior => prior_pair(),
        Grid::Pooling => pooling_variants(),
    };
    let maps = ablation_maps(&spec, &variants, a.seeds, a.jobs.unwrap_or_else(default_jobs))?;
    eprintln!("world seed {} (+{} more), {} variants", spec.seed, a.seeds.max(1) - 1, variants.len());
    print!("{}", ablation_table(&variants, &maps));
    Ok(())
}

fn cmd_inspect(a: &InspectArgs) -> Result<()> {
    if let Some(path) = &a.bank {
        println!("{}", summarize_bank(&bank::load_bank(path)?));
    }
    if let Some(path) = &a.proposals {
        println!("{}", summarize_proposals(&proposals::load_proposals(path, None)?));
    }
    Ok(())
}
