//! Staged, resumable run directory.
//!
//! Each stage reads what earlier stages wrote, so the CLI can run them one
//! at a time or all together. Every artifact is a pure function of the
//! configuration and the inputs; the worker count only changes how fast
//! they appear.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.json              effective configuration
//! inventory.json           regions with patch counts and ground-truth groups
//! patches/<region>/        16-bit PNG exports and index.json (optional)
//! folds/<pair>.folds.json  per-pair fold accuracies (resumable)
//! rad/n<N>.csv             max-of-k pmf for each test size
//! thresholds.json          right-edge thresholds per test size
//! verdicts.csv             Same/Different per pair
//! graph_pre.*, graph_post.*  graphs before and after pruning
//! pruning.json             removed edges and any tie warning
//! partition.csv/.json      communities and Q
//! degrees.json             community degree metrics
//! baseline_roughness.csv   roughness baseline verdicts
//! metrics.csv              precision/recall/F1 against ground truth
//! plots/*.svg              summary plots
//! errors.jsonl             machine-readable failures
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use crate::baselines::{
    classification_metrics, read_roughness_verdicts, roughness_profile, roughness_verdicts, write_metrics,
    write_roughness_verdicts, MetricsRow,
};
use crate::decision::{classify_pair_with, read_verdicts, write_verdicts, PairVerdict, Verdict};
use crate::discriminator::{
    load_fold_accuracies, pair_id, run_folds_with_banks, save_fold_accuracies, FeatureBank, FoldAccuracies, FoldConfig,
};
use crate::error::{Error, Result};
use crate::heightmap::{detrend_with, load_heightmap, load_regions, patchify_region_with, PatchSet, RegionSpec};
use crate::network::{
    build_graph, degree_report, louvain_partition, prune_edges, read_partition_csv, write_dot, write_graphml,
    write_partition_csv, write_partition_json, Partition, PracticeGraph,
};
use crate::par::{with_workers, Exec};
use crate::rad::{max_pmf, threshold_from_model, RadModel, ThresholdSpec};
use crate::synth::{gen_painting, ArtistProfile};

/// Everything a run needs besides the input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub folds: usize,
    pub epochs: usize,
    pub val_fraction: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub base_seed: u64,
    pub patch_size_cm: f64,
    pub detrend_radius_cm: f64,
    pub prune_fraction: f64,
    pub resolution: f64,
    pub z_threshold: f64,
    pub bootstrap_offset: f64,
    pub p_ref: f64,
    pub alpha: f64,
    /// Area bounds for regions of paintings that hold more than one region.
    pub region_area_min_cm2: f64,
    pub region_area_max_cm2: f64,
    /// Worker threads; 0 uses every core, 1 runs everything sequentially.
    #[serde(alias = "worker_count")]
    pub workers: usize,
    pub export_patches: bool,
    pub baseline: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let f = FoldConfig::default();
        RunConfig {
            manifest: PathBuf::from("manifest.json"),
            out_dir: PathBuf::from("run"),
            folds: f.folds,
            epochs: f.epochs,
            val_fraction: f.val_fraction,
            batch_size: f.batch_size,
            learning_rate: f.learning_rate,
            base_seed: f.base_seed,
            patch_size_cm: 1.0,
            detrend_radius_cm: 0.5,
            prune_fraction: crate::network::DEFAULT_PRUNE_FRACTION,
            resolution: crate::network::DEFAULT_RESOLUTION,
            z_threshold: crate::decision::DEFAULT_Z_THRESHOLD,
            bootstrap_offset: crate::rad::DEFAULT_BOOTSTRAP_OFFSET,
            p_ref: crate::rad::DEFAULT_P_REF,
            alpha: crate::baselines::DEFAULT_ALPHA,
            region_area_min_cm2: 180.0,
            region_area_max_cm2: 540.0,
            workers: 0,
            export_patches: false,
            baseline: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn fold_config(&self) -> FoldConfig {
        FoldConfig {
            folds: self.folds,
            epochs: self.epochs,
            val_fraction: self.val_fraction,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            base_seed: self.base_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fold_config().validate()?;
        let positive = [
            ("patch_size_cm", self.patch_size_cm),
            ("detrend_radius_cm", self.detrend_radius_cm),
            ("resolution", self.resolution),
            ("z_threshold", self.z_threshold),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::OutOfRange(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.prune_fraction) {
            return Err(Error::OutOfRange(format!(
                "prune_fraction {} not in [0, 1)",
                self.prune_fraction
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::OutOfRange(format!("alpha {} not in (0, 1)", self.alpha)));
        }
        if !(self.region_area_min_cm2 <= self.region_area_max_cm2) {
            return Err(Error::OutOfRange(
                "region_area_min_cm2 exceeds region_area_max_cm2".into(),
            ));
        }
        Ok(())
    }

    fn exec(&self) -> Exec {
        if self.workers == 1 {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Pipeline stages, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Synth,
    Preprocess,
    Compare,
    Decide,
    Graph,
    Communities,
    Degrees,
    Baseline,
    Metrics,
    Report,
    Rad,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Synth => 3,
            Stage::Preprocess => 4,
            Stage::Compare => 5,
            Stage::Decide => 6,
            Stage::Graph => 7,
            Stage::Communities => 8,
            Stage::Degrees => 9,
            Stage::Baseline => 10,
            Stage::Metrics => 11,
            Stage::Report => 12,
            Stage::Rad => 13,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Synth => "synth",
            Stage::Preprocess => "preprocess",
            Stage::Compare => "compare",
            Stage::Decide => "decide",
            Stage::Graph => "graph",
            Stage::Communities => "communities",
            Stage::Degrees => "degrees",
            Stage::Baseline => "baseline",
            Stage::Metrics => "metrics",
            Stage::Report => "report",
            Stage::Rad => "rad",
        }
    }
}

/// A failure attributed to the stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{} stage failed: {source}", .stage.name())]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Append one JSON line describing `err` to `errors.jsonl` in `out_dir`.
pub fn record_failure(out_dir: &Path, err: &StageError) {
    let line = serde_json::json!({
        "stage": err.stage.name(),
        "exit_code": err.stage.exit_code(),
        "message": err.source.to_string(),
    });
    let path = out_dir.join("errors.jsonl");
    let written = fs::create_dir_all(out_dir).and_then(|_| {
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&path)?;
        writeln!(f, "{line}")
    });
    if let Err(e) = written {
        log::error!("cannot write {}: {e}", path.display());
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaintingEntry {
    pub painting_id: String,
    pub image: PathBuf,
    pub metadata: PathBuf,
    /// Ground-truth label shared by regions of the same practice.
    #[serde(default)]
    pub group: Option<String>,
}

/// Input listing. Relative paths are resolved against the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub paintings: Vec<PaintingEntry>,
    /// Region spec file; paintings without regions become one full region
    /// named after the painting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<PathBuf>,
    /// Per-region ground-truth overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub region_groups: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut m.paintings {
            p.image = base.join(&p.image);
            p.metadata = base.join(&p.metadata);
        }
        if let Some(r) = &mut m.regions {
            *r = base.join(&*r);
        }
        if m.paintings.is_empty() {
            return Err(Error::Invalid(format!(
                "{}: manifest lists no paintings",
                path.display()
            )));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub region_id: String,
    pub painting_id: String,
    pub group: Option<String>,
    pub n_patches: usize,
    pub side_px: usize,
    pub area_cm2: f64,
    pub lateral_resolution_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inventory {
    pub regions: Vec<InventoryEntry>,
}

impl Inventory {
    /// Every unordered pair of regions, sorted by pair id.
    pub fn pairs(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for (i, a) in self.regions.iter().enumerate() {
            for b in &self.regions[i + 1..] {
                let id = pair_id(&a.region_id, &b.region_id);
                let (lo, hi) = if a.region_id <= b.region_id { (a, b) } else { (b, a) };
                out.push((id, lo.region_id.clone(), hi.region_id.clone()));
            }
        }
        out.sort();
        out
    }

    /// Ground truth for every pair, when every region has a group.
    pub fn truth(&self) -> Option<BTreeMap<String, Verdict>> {
        let groups: BTreeMap<&str, &str> = self
            .regions
            .iter()
            .map(|r| Some((r.region_id.as_str(), r.group.as_deref()?)))
            .collect::<Option<_>>()?;
        Some(
            self.pairs()
                .into_iter()
                .map(|(id, a, b)| {
                    let v = if groups[a.as_str()] == groups[b.as_str()] {
                        Verdict::Same
                    } else {
                        Verdict::Different
                    };
                    (id, v)
                })
                .collect(),
        )
    }
}

/// Patch sets of every region, in inventory order.
pub struct Prepared {
    pub inventory: Inventory,
    pub sets: Vec<PatchSet>,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Load, detrend and cut every region listed by the manifest.
pub fn prepare(cfg: &RunConfig, manifest: &Manifest) -> Result<Prepared> {
    let exec = cfg.exec();
    let specs = match &manifest.regions {
        Some(p) => load_regions(p)?,
        None => Vec::new(),
    };
    let mut entries = Vec::new();
    let mut sets = Vec::new();
    for painting in &manifest.paintings {
        let mut map = load_heightmap(&painting.image, &painting.metadata)?;
        map.source_id = painting.painting_id.clone();
        let map = detrend_with(&map, cfg.detrend_radius_cm, exec)?;
        let mut regions: Vec<RegionSpec> = specs
            .iter()
            .filter(|r| r.painting_id == painting.painting_id)
            .cloned()
            .collect();
        if regions.is_empty() {
            regions.push(RegionSpec::full(&painting.painting_id, &map));
        } else if regions.len() > 1 {
            for r in &regions {
                r.check_area(&map, cfg.region_area_min_cm2, cfg.region_area_max_cm2)?;
            }
        }
        for r in regions {
            let set = patchify_region_with(&map, &r, cfg.patch_size_cm, exec)?;
            let group = manifest
                .region_groups
                .get(&r.region_id)
                .cloned()
                .or_else(|| painting.group.clone());
            entries.push(InventoryEntry {
                region_id: r.region_id.clone(),
                painting_id: painting.painting_id.clone(),
                group,
                n_patches: set.len(),
                side_px: set.side_px,
                area_cm2: r.area_cm2(&map),
                lateral_resolution_um: map.lateral_resolution_um,
            });
            sets.push(set);
        }
    }
    let unmatched: Vec<&str> = specs
        .iter()
        .filter(|r| !manifest.paintings.iter().any(|p| p.painting_id == r.painting_id))
        .map(|r| r.region_id.as_str())
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::Invalid(format!(
            "regions reference unknown paintings: {}",
            unmatched.join(", ")
        )));
    }
    let mut ids: Vec<&str> = entries.iter().map(|e| e.region_id.as_str()).collect();
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Invalid(format!("duplicate region id {}", w[0])));
    }
    if entries.len() < 2 {
        return Err(Error::Invalid("at least two regions are needed to form a pair".into()));
    }
    Ok(Prepared {
        inventory: Inventory { regions: entries },
        sets,
    })
}

/// Raw value of a standardized pixel in exported patches.
pub const EXPORT_OFFSET: f64 = 32768.0;
/// Raw units per standard deviation in exported patches.
pub const EXPORT_SCALE: f64 = 4096.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchIndexEntry {
    pub file: String,
    pub index: usize,
    pub origin: [usize; 2],
}

/// `index.json` next to a region's exported patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchIndex {
    pub region_id: String,
    pub painting_id: String,
    pub side_px: usize,
    pub orientation: u8,
    /// `raw = offset + scale · standardized`, clamped to 16 bits; pixels
    /// outside the octagon are `offset`.
    pub offset: f64,
    pub scale: f64,
    pub patches: Vec<PatchIndexEntry>,
}

/// Write masked, standardized patches at orientation 0 as 16-bit PNGs.
pub fn export_patches(set: &PatchSet, painting_id: &str, dir: &Path) -> Result<PatchIndex> {
    ensure_dir(dir)?;
    let side = set.side_px as u32;
    let mut entries = Vec::with_capacity(set.len());
    for p in &set.patches {
        let raw: Vec<u16> = p
            .pixels
            .iter()
            .map(|v| (EXPORT_OFFSET + EXPORT_SCALE * v).round().clamp(0.0, 65535.0) as u16)
            .collect();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(side, side, raw).expect("buffer matches the patch side");
        let file = format!("{:05}.png", p.index);
        let path = dir.join(&file);
        img.save(&path).map_err(|e| Error::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        entries.push(PatchIndexEntry {
            file,
            index: p.index,
            origin: [p.origin.0, p.origin.1],
        });
    }
    let index = PatchIndex {
        region_id: set.region_id.clone(),
        painting_id: painting_id.to_string(),
        side_px: set.side_px,
        orientation: 0,
        offset: EXPORT_OFFSET,
        scale: EXPORT_SCALE,
        patches: entries,
    };
    write_json(&dir.join("index.json"), &index)?;
    Ok(index)
}

pub fn stage_preprocess(cfg: &RunConfig) -> Result<Prepared> {
    cfg.validate()?;
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.path("config.json"), cfg)?;
    let manifest = Manifest::load(&cfg.manifest)?;
    let prepared = prepare(cfg, &manifest)?;
    write_json(&cfg.path("inventory.json"), &prepared.inventory)?;
    if cfg.export_patches {
        for (set, entry) in prepared.sets.iter().zip(&prepared.inventory.regions) {
            export_patches(set, &entry.painting_id, &cfg.path("patches").join(&set.region_id))?;
        }
    }
    log::info!(
        "preprocess: {} regions, {} patches",
        prepared.sets.len(),
        prepared.sets.iter().map(PatchSet::len).sum::<usize>()
    );
    Ok(prepared)
}

pub fn load_inventory(cfg: &RunConfig) -> Result<Inventory> {
    read_json(&cfg.path("inventory.json"))
}

fn folds_path(cfg: &RunConfig, pair: &str) -> PathBuf {
    cfg.path("folds").join(format!("{pair}.folds.json"))
}

/// Fold accuracies for every pair. Pairs whose exchange file already exists
/// are loaded instead of recomputed, which makes the stage resumable and
/// lets externally trained models supply some or all pairs.
pub fn stage_compare(cfg: &RunConfig, prepared: &Prepared) -> Result<Vec<FoldAccuracies>> {
    let exec = cfg.exec();
    let fold_cfg = cfg.fold_config();
    fold_cfg.validate()?;
    ensure_dir(&cfg.path("folds"))?;
    let pairs = prepared.inventory.pairs();
    let todo: Vec<bool> = pairs.iter().map(|(id, _, _)| !folds_path(cfg, id).exists()).collect();
    let needed: Vec<bool> = prepared
        .sets
        .iter()
        .map(|s| {
            pairs
                .iter()
                .zip(&todo)
                .any(|((_, a, b), t)| *t && (*a == s.region_id || *b == s.region_id))
        })
        .collect();
    log::info!(
        "compare: {} pairs, {} to compute",
        pairs.len(),
        todo.iter().filter(|t| **t).count()
    );

    let mut banks: BTreeMap<String, FeatureBank> = BTreeMap::new();
    for (set, need) in prepared.sets.iter().zip(&needed) {
        if *need {
            banks.insert(set.region_id.clone(), FeatureBank::build(set, exec)?);
        }
    }
    let results = exec.map(&pairs, |(id, a, b)| -> Result<FoldAccuracies> {
        let path = folds_path(cfg, id);
        if path.exists() {
            return load_fold_accuracies(&path, Some(fold_cfg.folds));
        }
        let acc = run_folds_with_banks(&banks[a], &banks[b], &fold_cfg)?;
        save_fold_accuracies(&acc, &path)?;
        Ok(acc)
    });
    // keep every finished pair on disk, then report the first failure
    results.into_iter().collect()
}

/// RAD model and threshold for each test size that occurs.
fn models_for(cfg: &RunConfig, accs: &[FoldAccuracies]) -> Result<BTreeMap<usize, (RadModel, ThresholdSpec)>> {
    let mut out = BTreeMap::new();
    for n in accs.iter().map(|a| a.n_test) {
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry(n) {
            let model = max_pmf(n, cfg.epochs)?;
            let thr = threshold_from_model(&model, cfg.p_ref, cfg.bootstrap_offset)?;
            e.insert((model, thr));
        }
    }
    Ok(out)
}

pub fn load_all_folds(cfg: &RunConfig, inventory: &Inventory) -> Result<Vec<FoldAccuracies>> {
    inventory
        .pairs()
        .iter()
        .map(|(id, _, _)| load_fold_accuracies(&folds_path(cfg, id), Some(cfg.folds)))
        .collect()
}

pub fn stage_decide(cfg: &RunConfig, inventory: &Inventory) -> Result<Vec<PairVerdict>> {
    let accs = load_all_folds(cfg, inventory)?;
    let models = models_for(cfg, &accs)?;
    ensure_dir(&cfg.path("rad"))?;
    let mut thresholds = Vec::new();
    for (n, (model, thr)) in &models {
        let path = cfg.path("rad").join(format!("n{n}.csv"));
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        model
            .write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(&path, e))?;
        thresholds.push(thr.clone());
    }
    write_json(&cfg.path("thresholds.json"), &thresholds)?;
    let verdicts = accs
        .iter()
        .map(|a| {
            let (model, thr) = &models[&a.n_test];
            classify_pair_with(a, model, thr, cfg.z_threshold)
        })
        .collect::<Result<Vec<_>>>()?;
    write_verdicts(&verdicts, &cfg.path("verdicts.csv"))?;
    let same = verdicts.iter().filter(|v| v.verdict == Verdict::Same).count();
    log::info!("decide: {same} of {} pairs Same", verdicts.len());
    Ok(verdicts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningSummary {
    pub fraction: f64,
    pub edges_before: usize,
    pub edges_after: usize,
    pub cutoff: Option<f64>,
    pub removed: Vec<String>,
    pub warning: Option<String>,
}

pub fn stage_graph(cfg: &RunConfig) -> Result<(PracticeGraph, PracticeGraph)> {
    let verdicts = read_verdicts(&cfg.path("verdicts.csv"))?;
    let pre = build_graph(&verdicts)?;
    let pruned = prune_edges(&pre, cfg.prune_fraction)?;
    write_json(&cfg.path("graph_pre.json"), &pre)?;
    write_json(&cfg.path("graph_post.json"), &pruned.graph)?;
    for (g, stem) in [(&pre, "graph_pre"), (&pruned.graph, "graph_post")] {
        write_graphml(g, None, &cfg.path(&format!("{stem}.graphml")))?;
        write_dot(g, None, &cfg.path(&format!("{stem}.dot")))?;
    }
    write_json(
        &cfg.path("pruning.json"),
        &PruningSummary {
            fraction: cfg.prune_fraction,
            edges_before: pre.n_edges(),
            edges_after: pruned.graph.n_edges(),
            cutoff: pruned.cutoff,
            removed: pruned.removed.clone(),
            warning: pruned.warning.clone(),
        },
    )?;
    log::info!(
        "graph: {} edges, {} after pruning",
        pre.n_edges(),
        pruned.graph.n_edges()
    );
    Ok((pre, pruned.graph))
}

pub fn stage_communities(cfg: &RunConfig) -> Result<Partition> {
    let pre: PracticeGraph = read_json(&cfg.path("graph_pre.json"))?;
    let post: PracticeGraph = read_json(&cfg.path("graph_post.json"))?;
    let partition = if post.n_edges() == 0 {
        log::warn!("no edges left after pruning; every region is its own community and Q is undefined");
        Partition::singletons(post.n_nodes(), cfg.resolution)
    } else {
        louvain_partition(&post, cfg.resolution, cfg.base_seed)?
    };
    write_partition_csv(&post, &partition, &cfg.path("partition.csv"))?;
    write_partition_json(&post, &partition, &cfg.path("partition.json"))?;
    for (g, stem) in [(&pre, "graph_pre"), (&post, "graph_post")] {
        write_graphml(g, Some(&partition), &cfg.path(&format!("{stem}.graphml")))?;
        write_dot(g, Some(&partition), &cfg.path(&format!("{stem}.dot")))?;
    }
    log::info!(
        "communities: {} with Q = {}",
        partition.n_communities(),
        partition.modularity_q.map_or("undefined".into(), |q| format!("{q:.4}"))
    );
    Ok(partition)
}

pub fn stage_degrees(cfg: &RunConfig) -> Result<crate::network::DegreeReport> {
    let post: PracticeGraph = read_json(&cfg.path("graph_post.json"))?;
    let partition = read_partition_csv(&post, &cfg.path("partition.csv"))?;
    let report = degree_report(&post, &partition)?;
    write_json(&cfg.path("degrees.json"), &report)?;
    Ok(report)
}

pub fn stage_baseline(cfg: &RunConfig, prepared: &Prepared) -> Result<()> {
    let profiles: Vec<_> = prepared.sets.iter().map(roughness_profile).collect();
    let rows = roughness_verdicts(&profiles, cfg.alpha, cfg.exec())?;
    write_roughness_verdicts(&rows, &cfg.path("baseline_roughness.csv"))
}

/// Metrics for the pipeline and, when present, the roughness baseline.
pub fn stage_metrics(cfg: &RunConfig, inventory: &Inventory) -> Result<Vec<MetricsRow>> {
    let truth = inventory
        .truth()
        .ok_or_else(|| Error::Invalid("metrics need a ground-truth group for every region".into()))?;
    let align = |rows: Vec<(String, Verdict)>| -> Result<(Vec<Verdict>, Vec<Verdict>)> {
        let mut pred = Vec::new();
        let mut act = Vec::new();
        for (id, v) in rows {
            let t = truth
                .get(&id)
                .ok_or_else(|| Error::Invalid(format!("pair {id} is not in the inventory")))?;
            pred.push(v);
            act.push(*t);
        }
        if pred.len() != truth.len() {
            return Err(Error::Invalid(format!(
                "{} verdicts for {} pairs",
                pred.len(),
                truth.len()
            )));
        }
        Ok((pred, act))
    };
    let verdicts = read_verdicts(&cfg.path("verdicts.csv"))?;
    let (p, a) = align(verdicts.into_iter().map(|v| (v.pair_id, v.verdict)).collect())?;
    let mut rows = vec![classification_metrics("PATCH", &p, &a)?];
    let rough = cfg.path("baseline_roughness.csv");
    if rough.exists() {
        let r = read_roughness_verdicts(&rough)?;
        let (p, a) = align(r.into_iter().map(|v| (v.pair_id, v.verdict)).collect())?;
        rows.push(classification_metrics("Surface roughness", &p, &a)?);
    }
    write_metrics(&rows, &cfg.path("metrics.csv"))?;
    Ok(rows)
}

pub fn stage_report(cfg: &RunConfig, inventory: &Inventory) -> Result<()> {
    let accs = load_all_folds(cfg, inventory)?;
    let models = models_for(cfg, &accs)?;
    let post: PracticeGraph = read_json(&cfg.path("graph_post.json"))?;
    let partition = read_partition_csv(&post, &cfg.path("partition.csv"))?;
    let dir = cfg.path("plots");
    ensure_dir(&dir)?;
    // the most common test size gets the plot
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    accs.iter().for_each(|a| *counts.entry(a.n_test).or_default() += 1);
    if let Some((&n, _)) = counts.iter().max_by_key(|(n, c)| (**c, std::cmp::Reverse(**n))) {
        let (model, thr) = &models[&n];
        let same_n: Vec<FoldAccuracies> = accs.iter().filter(|a| a.n_test == n).cloned().collect();
        let svg = crate::report::accuracy_plot(&same_n, model, thr);
        let path = dir.join("accuracy_vs_rad.svg");
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("network.svg");
    fs::write(&path, crate::report::network_plot(&post, &partition)).map_err(|e| Error::io(&path, e))
}

/// Headline numbers of a full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub regions: usize,
    pub pairs: usize,
    pub same_pairs: usize,
    pub edges_after_pruning: usize,
    pub communities: usize,
    pub modularity_q: Option<f64>,
    pub metrics: Vec<MetricsRow>,
}

/// Run every stage in order. On failure the error is appended to
/// `errors.jsonl` and everything written so far stays in place.
pub fn run_pipeline(cfg: &RunConfig) -> std::result::Result<RunSummary, StageError> {
    let out = with_workers(cfg.workers, || run_stages(cfg));
    if let Err(e) = &out {
        record_failure(&cfg.out_dir, e);
    }
    out
}

fn run_stages(cfg: &RunConfig) -> std::result::Result<RunSummary, StageError> {
    cfg.validate().at(Stage::Config)?;
    let prepared = stage_preprocess(cfg).at(Stage::Preprocess)?;
    stage_compare(cfg, &prepared).at(Stage::Compare)?;
    let verdicts = stage_decide(cfg, &prepared.inventory).at(Stage::Decide)?;
    let (_, post) = stage_graph(cfg).at(Stage::Graph)?;
    let partition = stage_communities(cfg).at(Stage::Communities)?;
    stage_degrees(cfg).at(Stage::Degrees)?;
    if cfg.baseline {
        stage_baseline(cfg, &prepared).at(Stage::Baseline)?;
    }
    let metrics = if prepared.inventory.truth().is_some() {
        stage_metrics(cfg, &prepared.inventory).at(Stage::Metrics)?
    } else {
        log::info!("metrics skipped: no ground truth in the manifest");
        Vec::new()
    };
    stage_report(cfg, &prepared.inventory).at(Stage::Report)?;
    Ok(RunSummary {
        regions: prepared.inventory.regions.len(),
        pairs: verdicts.len(),
        same_pairs: verdicts.iter().filter(|v| v.verdict == Verdict::Same).count(),
        edges_after_pruning: post.n_edges(),
        communities: partition.n_communities(),
        modularity_q: partition.modularity_q,
        metrics,
    })
}

/// Layout of a generated study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStudy {
    pub paintings_per_profile: usize,
    pub width_cm: f64,
    pub height_cm: f64,
    pub resolution_um: f64,
    pub seed: u64,
}

impl Default for SynthStudy {
    fn default() -> Self {
        SynthStudy {
            paintings_per_profile: 2,
            width_cm: 12.0,
            height_cm: 15.0,
            resolution_um: 100.0,
            seed: 0,
        }
    }
}

/// Generate `paintings_per_profile` maps per profile under `dir`, with a
/// manifest whose groups are the profile ids. Returns the manifest path.
pub fn write_synth_study(profiles: &[ArtistProfile], study: &SynthStudy, dir: &Path, exec: Exec) -> Result<PathBuf> {
    if study.paintings_per_profile == 0 || profiles.is_empty() {
        return Err(Error::Invalid(
            "a study needs at least one profile and one painting each".into(),
        ));
    }
    ensure_dir(dir)?;
    let jobs: Vec<(usize, usize)> = (0..profiles.len())
        .flat_map(|p| (0..study.paintings_per_profile).map(move |k| (p, k)))
        .collect();
    let entries = exec.map(&jobs, |&(p, k)| -> Result<PaintingEntry> {
        let profile = &profiles[p];
        let id = format!("{}-p{}", profile.profile_id, k + 1);
        let map = gen_painting(
            profile,
            study.width_cm,
            study.height_cm,
            study.resolution_um,
            study.seed,
            &id,
        )?;
        let image = PathBuf::from(format!("{id}.png"));
        let metadata = PathBuf::from(format!("{id}.json"));
        crate::heightmap::save_heightmap(&map, &dir.join(&image), &dir.join(&metadata))?;
        Ok(PaintingEntry {
            painting_id: id,
            image,
            metadata,
            group: Some(profile.profile_id.clone()),
        })
    });
    let manifest = Manifest {
        paintings: entries.into_iter().collect::<Result<_>>()?,
        regions: None,
        region_groups: BTreeMap::new(),
    };
    crate::synth::save_profiles(profiles, &dir.join("profiles.json"))?;
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}
