//! `patch-hap`: command-line driver for the region-comparison pipeline.
//!
//! Each subcommand runs one stage against a run directory. `run` does all
//! of them in order. Failures exit with the stage's code and are appended
//! to `errors.jsonl` in the run directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use patch_core::par::with_workers;
use patch_core::pipeline::{self, AtStage, Manifest, RunConfig, Stage, StageError, SynthStudy};
use patch_core::rad::{max_pmf, threshold_from_model, DEFAULT_BOOTSTRAP_OFFSET, DEFAULT_P_REF};
use patch_core::synth::{load_profiles, preset_profiles};
use patch_core::Exec;

#[derive(Parser, Debug)]
#[command(name = "patch-hap", version, about = "Decide which surface regions share a practice")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores, 1 = sequential).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run directory.
    #[arg(long, global = true, env = "PATCH_HAP_OUT")]
    out: Option<PathBuf>,
    /// Input manifest.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate synthetic paintings and a manifest.
    Synth(SynthArgs),
    /// Load, detrend and cut regions into patches.
    Preprocess {
        /// Also export patches as 16-bit PNGs with an index.json.
        #[arg(long)]
        export_patches: bool,
    },
    /// Per-pair fold accuracies (skips pairs that already have a folds file).
    Compare,
    /// Same/Different verdicts.
    Decide,
    /// Build and prune the practice graph.
    Graph,
    /// Louvain communities on the pruned graph.
    Communities,
    /// Community degree metrics.
    Degrees,
    /// Roughness baseline verdicts.
    Baseline,
    /// Precision/recall/F1 against manifest groups.
    Metrics,
    /// SVG plots.
    Report,
    /// Chance distribution of the max-of-k accuracy and its threshold.
    Rad(RadArgs),
    /// Every stage in order.
    Run,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Profiles JSON; the built-in presets when absent.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Output directory for maps and manifest.json.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, default_value_t = 2)]
    paintings_per_profile: usize,
    #[arg(long, default_value_t = 12.0)]
    width_cm: f64,
    #[arg(long, default_value_t = 15.0)]
    height_cm: f64,
    #[arg(long, default_value_t = 100.0)]
    resolution_um: f64,
}

#[derive(Args, Debug)]
struct RadArgs {
    /// Test-set size.
    #[arg(long)]
    n: usize,
    /// Epochs per fold.
    #[arg(long, default_value_t = 25)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_P_REF)]
    p_ref: f64,
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_OFFSET)]
    offset: f64,
    /// Write the full pmf here as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<StageError>().map_or(1, |s| s.stage.exit_code());
            ExitCode::from(code as u8)
        }
    }
}

/// Config from `--config`, else from the run directory, else defaults;
/// explicit flags win.
fn resolve_config(g: &Global) -> std::result::Result<RunConfig, StageError> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p).at(Stage::Config)?,
        None => {
            let out = g.out.clone().unwrap_or_else(|| RunConfig::default().out_dir);
            let saved = out.join("config.json");
            if saved.exists() {
                RunConfig::load(&saved).at(Stage::Config)?
            } else {
                RunConfig::default()
            }
        }
    };
    if let Some(s) = g.seed {
        cfg.base_seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    if let Some(m) = &g.manifest {
        cfg.manifest = m.clone();
    }
    cfg.validate().at(Stage::Config)?;
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => synth(&cli.global, args),
        Command::Rad(args) => rad(args),
        Command::Run => {
            let cfg = resolve_config(&cli.global)?;
            let summary = pipeline::run_pipeline(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
        stage => {
            let mut cfg = resolve_config(&cli.global)?;
            if let Command::Preprocess { export_patches: true } = stage {
                cfg.export_patches = true;
            }
            let workers = cfg.workers;
            let out = with_workers(workers, || run_stage(&cfg, &stage));
            if let Err(e) = &out {
                pipeline::record_failure(&cfg.out_dir, e);
            }
            Ok(out?)
        }
    }
}

fn prepared(cfg: &RunConfig, stage: Stage) -> std::result::Result<pipeline::Prepared, StageError> {
    let manifest = Manifest::load(&cfg.manifest).at(stage)?;
    pipeline::prepare(cfg, &manifest).at(stage)
}

fn run_stage(cfg: &RunConfig, stage: &Command) -> std::result::Result<(), StageError> {
    match stage {
        Command::Preprocess { .. } => {
            let p = pipeline::stage_preprocess(cfg).at(Stage::Preprocess)?;
            println!("{} regions prepared", p.inventory.regions.len());
        }
        Command::Compare => {
            let p = prepared(cfg, Stage::Compare)?;
            let accs = pipeline::stage_compare(cfg, &p).at(Stage::Compare)?;
            println!("{} pairs compared", accs.len());
        }
        Command::Decide => {
            let inv = pipeline::load_inventory(cfg).at(Stage::Decide)?;
            let v = pipeline::stage_decide(cfg, &inv).at(Stage::Decide)?;
            let same = v
                .iter()
                .filter(|v| v.verdict == patch_core::decision::Verdict::Same)
                .count();
            println!("{same} of {} pairs Same", v.len());
        }
        Command::Graph => {
            let (pre, post) = pipeline::stage_graph(cfg).at(Stage::Graph)?;
            println!("{} edges, {} after pruning", pre.n_edges(), post.n_edges());
        }
        Command::Communities => {
            let p = pipeline::stage_communities(cfg).at(Stage::Communities)?;
            let q = p.modularity_q.map_or("undefined".to_string(), |q| format!("{q:.4}"));
            println!("{} communities, Q = {q}", p.n_communities());
        }
        Command::Degrees => {
            let r = pipeline::stage_degrees(cfg).at(Stage::Degrees)?;
            println!("{} communities measured", r.sizes.len());
        }
        Command::Baseline => {
            let p = prepared(cfg, Stage::Baseline)?;
            pipeline::stage_baseline(cfg, &p).at(Stage::Baseline)?;
            println!("roughness baseline written");
        }
        Command::Metrics => {
            let inv = pipeline::load_inventory(cfg).at(Stage::Metrics)?;
            for row in pipeline::stage_metrics(cfg, &inv).at(Stage::Metrics)? {
                let f1 = row.macro_avg.f1.map_or("undefined".to_string(), |f| format!("{f:.4}"));
                println!("{}: macro F1 = {f1}", row.method);
            }
        }
        Command::Report => {
            let inv = pipeline::load_inventory(cfg).at(Stage::Report)?;
            pipeline::stage_report(cfg, &inv).at(Stage::Report)?;
            println!("plots written to {}", cfg.out_dir.join("plots").display());
        }
        Command::Synth(_) | Command::Rad(_) | Command::Run => unreachable!("handled in dispatch"),
    }
    Ok(())
}

fn synth(g: &Global, args: SynthArgs) -> Result<()> {
    let profiles = match &args.profiles {
        Some(p) => load_profiles(p).at(Stage::Synth)?,
        None => preset_profiles(),
    };
    let study = SynthStudy {
        paintings_per_profile: args.paintings_per_profile,
        width_cm: args.width_cm,
        height_cm: args.height_cm,
        resolution_um: args.resolution_um,
        seed: g.seed.unwrap_or(0),
    };
    let workers = g.workers.unwrap_or(0);
    let exec = if workers == 1 { Exec::Sequential } else { Exec::Parallel };
    let manifest = with_workers(workers, || {
        pipeline::write_synth_study(&profiles, &study, &args.dir, exec)
    })
    .at(Stage::Synth)?;
    println!("{}", manifest.display());
    Ok(())
}

fn rad(args: RadArgs) -> Result<()> {
    let model = max_pmf(args.n, args.k).at(Stage::Rad)?;
    let thr = threshold_from_model(&model, args.p_ref, args.offset).at(Stage::Rad)?;
    if let Some(path) = &args.csv {
        write_pmf(&model, path)?;
    }
    println!("{}", serde_json::to_string_pretty(&thr)?);
    Ok(())
}

fn write_pmf(model: &patch_core::rad::RadModel, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    model
        .write_csv(std::io::BufWriter::new(f))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
