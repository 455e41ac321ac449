//! The pipeline commands as library functions. The binary is a thin clap
//! layer over these.

use std::path::{Path, PathBuf};

use jointstream_core::features::{baseline_extract, join_streams, normalize_features, NormStats, DEFAULT_GRID};
use jointstream_core::frequency::{dft_stack, dwt_stack};
use jointstream_core::imaging::{extract_patches, rgb_to_ycbcr, PatchConfig};
use jointstream_core::metrics::{self, EvalReport};
use jointstream_core::training::{self, TrainOutcome};
use jointstream_core::{Domain, FeatureBag, HeadKind, Matrix, RasterImage, NUM_FACTORS};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::{Resolved, RunConfig};
use crate::error::{io, Error, Result};
use crate::fbag::{file_name, write_bag};
use crate::manifest::{Manifest, Record, Split};
use crate::synth::{self, SynthConfig};
use crate::{png_io, report};

pub const INDEX_HEADER: [&str; 4] = ["wsi_id", "x", "y", "file"];
pub const CHECKPOINT_FILE: &str = "model.mrlp";
pub const METADATA_FILE: &str = "run.toml";

/// A per-slide failure that did not stop the other slides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub wsi_id: String,
    pub message: String,
}

/// Runs `f` over `items` on all cores and returns results in input order.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items.chunks(chunk).map(|part| s.spawn(|| part.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io(dir))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

fn record_failure(wsi_id: &str, e: impl std::fmt::Display) -> Failure {
    Failure { wsi_id: wsi_id.into(), message: e.to_string() }
}

/// One row of the patch index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRow {
    pub wsi_id: String,
    pub x: usize,
    pub y: usize,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOutcome {
    pub index: Vec<IndexRow>,
    pub failures: Vec<Failure>,
}

pub fn patch_file_name(wsi_id: &str, x: usize, y: usize) -> String {
    format!("{wsi_id}_x{x}_y{y}.png")
}

fn extract_one(manifest: &Manifest, rec: &Record, out_dir: &Path, cfg: &PatchConfig) -> Result<Vec<IndexRow>> {
    if rec.image.is_empty() || rec.mask.is_empty() {
        return Err(Error::Record { wsi_id: rec.wsi_id.clone(), message: "manifest row has no image or mask".into() });
    }
    let wsi = png_io::load_rgb(&manifest.resolve(&rec.image))?;
    let mask = png_io::load_mask(&manifest.resolve(&rec.mask))?;
    let mut rows = Vec::new();
    for patch in extract_patches(&rec.wsi_id, &wsi, &mask, cfg)? {
        let (x, y) = patch.origin;
        let file = patch_file_name(&rec.wsi_id, x, y);
        png_io::save_rgb(&patch.image, &out_dir.join(&file))?;
        rows.push(IndexRow { wsi_id: rec.wsi_id.clone(), x, y, file });
    }
    Ok(rows)
}

/// Cuts patches for every slide, writing `<wsi_id>_x<x>_y<y>.png` files and
/// `index.csv` into `out_dir`.
pub fn cmd_extract(manifest_path: &Path, out_dir: &Path, cfg: &PatchConfig) -> Result<ExtractOutcome> {
    let manifest = Manifest::load(manifest_path)?;
    create_dir(out_dir)?;
    let results = par_map(&manifest.records, |rec| extract_one(&manifest, rec, out_dir, cfg));
    let mut index = Vec::new();
    let mut failures = Vec::new();
    for (rec, res) in manifest.records.iter().zip(results) {
        match res {
            Ok(rows) => index.extend(rows),
            Err(e) => failures.push(record_failure(&rec.wsi_id, e)),
        }
    }
    write_index(&out_dir.join("index.csv"), &index)?;
    Ok(ExtractOutcome { index, failures })
}

pub fn write_index(path: &Path, rows: &[IndexRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(INDEX_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([r.wsi_id.clone(), r.x.to_string(), r.y.to_string(), r.file.clone()]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

pub fn read_index(path: &Path) -> Result<Vec<IndexRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(INDEX_HEADER) {
        return Err(crate::error::format(path, format!("expected header {}", INDEX_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for row in r.records() {
        let row = row.map_err(csv_err(path))?;
        let num = |s: &str| s.parse::<usize>().map_err(|e| crate::error::format(path, format!("{s:?}: {e}")));
        rows.push(IndexRow { wsi_id: row[0].into(), x: num(&row[1])?, y: num(&row[2])?, file: row[3].into() });
    }
    Ok(rows)
}

/// Block grid used for a domain. The twelve-channel wavelet stack uses half
/// the grid so every domain yields the same dimension, `3 · grid² · 5`.
pub fn grid_for(domain: Domain, grid: usize) -> usize {
    match domain {
        Domain::Dwt => (grid / 2).max(1),
        Domain::Rgb | Domain::Dft => grid,
    }
}

/// Domain representation of an RGB patch followed by the baseline extractor.
pub fn patch_features(patch: &RasterImage, domain: Domain, grid: usize) -> Result<Vec<f64>> {
    let stack = match domain {
        Domain::Rgb => patch.clone(),
        Domain::Dft => dft_stack(&rgb_to_ycbcr(patch)?)?,
        Domain::Dwt => dwt_stack(&rgb_to_ycbcr(patch)?)?,
    };
    Ok(baseline_extract(&stack, grid_for(domain, grid))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeaturesOutcome {
    /// Written files, slide-major then in domain order.
    pub files: Vec<PathBuf>,
    pub failures: Vec<Failure>,
}

fn features_one(rec: &Record, rows: &[&IndexRow], index_dir: &Path, domains: &[Domain], grid: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::Record { wsi_id: rec.wsi_id.clone(), message: "no patches in index".into() });
    }
    let labels = rec.labels.to_binary();
    let mut per_domain: Vec<Vec<f64>> = vec![Vec::new(); domains.len()];
    let mut dims = vec![0usize; domains.len()];
    for row in rows {
        let patch = png_io::load_rgb(&index_dir.join(&row.file))?;
        for (i, &domain) in domains.iter().enumerate() {
            let v = patch_features(&patch, domain, grid)?;
            if dims[i] == 0 {
                dims[i] = v.len();
            } else if dims[i] != v.len() {
                return Err(Error::Record { wsi_id: rec.wsi_id.clone(), message: format!("{} patches differ in size", row.file) });
            }
            per_domain[i].extend(v.iter().map(|&x| x as f32 as f64));
        }
    }
    let mut files = Vec::new();
    for ((&domain, data), d) in domains.iter().zip(per_domain).zip(dims) {
        let bag = FeatureBag::single_domain(rec.wsi_id.clone(), Matrix::from_vec(rows.len(), d, data).expect("n×d"), domain, labels)?;
        let path = out_dir.join(file_name(&rec.wsi_id, domain));
        write_bag(&bag, &path)?;
        files.push(path);
    }
    Ok(files)
}

/// Builds one bag file per slide and domain from a patch index. Labels come
/// from the manifest.
pub fn cmd_features(index_path: &Path, manifest_path: &Path, domains: &[Domain], grid: usize, out_dir: &Path) -> Result<FeaturesOutcome> {
    let manifest = Manifest::load(manifest_path)?;
    let index = read_index(index_path)?;
    let index_dir = index_path.parent().unwrap_or(Path::new(""));
    create_dir(out_dir)?;
    let known: std::collections::BTreeSet<&str> = manifest.records.iter().map(|r| r.wsi_id.as_str()).collect();
    let mut failures: Vec<Failure> = index
        .iter()
        .filter(|r| !known.contains(r.wsi_id.as_str()))
        .map(|r| record_failure(&r.wsi_id, "not in manifest"))
        .collect();
    failures.dedup();
    let jobs: Vec<(&Record, Vec<&IndexRow>)> =
        manifest.records.iter().map(|rec| (rec, index.iter().filter(|r| r.wsi_id == rec.wsi_id).collect())).collect();
    let results = par_map(&jobs, |(rec, rows)| features_one(rec, rows, index_dir, domains, grid, out_dir));
    let mut files = Vec::new();
    for ((rec, _), res) in jobs.iter().zip(results) {
        match res {
            Ok(f) => files.extend(f),
            Err(e) => failures.push(record_failure(&rec.wsi_id, e)),
        }
    }
    Ok(FeaturesOutcome { files, failures })
}

/// Writes synthetic bags under `out_dir/features`, a manifest and a starter
/// config pointing at them.
pub fn cmd_synth(cfg: &SynthConfig, out_dir: &Path) -> Result<Manifest> {
    let features = out_dir.join("features");
    create_dir(&features)?;
    let slides = synth::generate(cfg);
    let mut records = Vec::with_capacity(slides.len());
    for s in &slides {
        for bag in &s.bags {
            write_bag(bag, &features.join(file_name(&s.wsi_id, bag.domains()[0])))?;
        }
        records.push(Record { wsi_id: s.wsi_id.clone(), image: String::new(), mask: String::new(), labels: s.labels, split: s.split });
    }
    let manifest = Manifest::new(out_dir, records);
    manifest.write(&out_dir.join("manifest.csv"))?;

    let mut run = RunConfig::default();
    run.train.seed = cfg.seed;
    if cfg.two_domain {
        run.data.domains = vec![Domain::Rgb.name().into(), Domain::Dft.name().into()];
    }
    let path = out_dir.join("config.toml");
    std::fs::write(&path, run.to_toml()).map_err(io(&path))?;
    Ok(manifest)
}

/// Bags of every split after joining domains and standardising with
/// training-split statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<FeatureBag>,
    pub val: Vec<FeatureBag>,
    pub test: Vec<FeatureBag>,
    /// `(file name, sha256)` of every bag file read, in read order.
    pub digests: Vec<(String, String)>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[FeatureBag] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

fn load_slide(cfg: &Resolved, rec: &Record) -> Result<(FeatureBag, Vec<(String, String)>)> {
    let mut parts = Vec::with_capacity(cfg.domains.len());
    let mut digests = Vec::new();
    for &domain in &cfg.domains {
        let name = file_name(&rec.wsi_id, domain);
        let path = cfg.features.join(&name);
        let bytes = std::fs::read(&path).map_err(io(&path))?;
        digests.push((name, hex::encode(Sha256::digest(&bytes))));
        let bag = crate::fbag::decode(&bytes).map_err(|e| crate::error::format(&path, e.to_string()))?;
        if bag.wsi_id() != rec.wsi_id {
            return Err(crate::error::format(&path, format!("holds slide {}", bag.wsi_id())));
        }
        if bag.labels() != rec.labels.to_binary() {
            return Err(crate::error::format(&path, "labels disagree with the manifest"));
        }
        if bag.domains().iter().any(|&d| d != domain) {
            return Err(crate::error::format(&path, format!("expected only {domain} instances")));
        }
        parts.push(bag);
    }
    Ok((join_streams(&parts, cfg.stream_mode)?, digests))
}

/// Reads, joins and standardises the bags named by the manifest.
pub fn load_dataset(cfg: &Resolved) -> Result<Dataset> {
    let manifest = Manifest::load(&cfg.manifest)?;
    let mut out = Dataset { train: Vec::new(), val: Vec::new(), test: Vec::new(), digests: Vec::new() };
    let mut failed = Vec::new();
    for rec in &manifest.records {
        match load_slide(cfg, rec) {
            Ok((bag, digests)) => {
                out.digests.extend(digests);
                match rec.split {
                    Split::Train => out.train.push(bag),
                    Split::Val => out.val.push(bag),
                    Split::Test => out.test.push(bag),
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", rec.wsi_id);
                failed.push(rec.wsi_id.clone());
            }
        }
    }
    if !failed.is_empty() {
        return Err(Error::Partial { ids: failed });
    }
    let stats = NormStats::fit(&out.train);
    out.train = normalize_features(&out.train, &stats)?;
    out.val = normalize_features(&out.val, &stats)?;
    out.test = normalize_features(&out.test, &stats)?;
    Ok(out)
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    head: String,
    feature_dim: usize,
    train_bags: usize,
    val_bags: usize,
    test_bags: usize,
    best_epoch: Option<usize>,
    best_val_map: Option<f64>,
}

#[derive(Serialize)]
struct FileDigest {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct EpochLine {
    epoch: usize,
    train_loss: f64,
    val_map: Option<f64>,
    val_auc: Option<f64>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    config: &'a RunConfig,
    run: RunSummary,
    data: Vec<FileDigest>,
    epochs: Vec<EpochLine>,
}

fn metadata_text(cfg: &Resolved, data: &Dataset, outcome: &TrainOutcome) -> String {
    let meta = Metadata {
        config: &cfg.raw,
        run: RunSummary {
            seed: cfg.train.seed,
            head: cfg.train.head.kind.name().into(),
            feature_dim: data.train.first().map_or(0, FeatureBag::dim),
            train_bags: data.train.len(),
            val_bags: data.val.len(),
            test_bags: data.test.len(),
            best_epoch: outcome.best_epoch,
            best_val_map: outcome.best_epoch.and_then(|e| outcome.history[e].val_map),
        },
        data: data.digests.iter().map(|(f, h)| FileDigest { file: f.clone(), sha256: h.clone() }).collect(),
        epochs: outcome
            .history
            .iter()
            .map(|r| EpochLine { epoch: r.epoch, train_loss: r.train_loss, val_map: r.val_map, val_auc: r.val_auc })
            .collect(),
    };
    toml::to_string(&meta).expect("metadata serialises")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub outcome: TrainOutcome,
    pub checkpoint: PathBuf,
    pub metadata: PathBuf,
}

/// Trains the configured head and writes `model.mrlp` and `run.toml` into
/// the output directory.
pub fn cmd_train(cfg: &Resolved) -> Result<TrainRun> {
    let data = load_dataset(cfg)?;
    let outcome = training::train(&data.train, &data.val, &cfg.train)?;
    create_dir(&cfg.output)?;
    let checkpoint = cfg.output.join(CHECKPOINT_FILE);
    write_checkpoint(cfg.train.head.kind, &outcome.best, &checkpoint)?;
    let metadata = cfg.output.join(METADATA_FILE);
    std::fs::write(&metadata, metadata_text(cfg, &data, &outcome)).map_err(io(&metadata))?;
    Ok(TrainRun { outcome, checkpoint, metadata })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRun {
    pub report: EvalReport,
    pub dir: PathBuf,
}

/// Scores one split with a checkpoint and writes the report files into
/// `<output>/eval_<split>`.
pub fn cmd_eval(cfg: &Resolved, checkpoint: &Path, split: Split) -> Result<EvalRun> {
    let (kind, params) = read_checkpoint(checkpoint)?;
    if kind != cfg.train.head.kind {
        return Err(crate::error::format(checkpoint, format!("holds a {} head, config asks for {}", kind.name(), cfg.train.head.kind.name())));
    }
    let data = load_dataset(cfg)?;
    let bags = data.split(split);
    if bags.is_empty() {
        return Err(Error::Record { wsi_id: split.name().into(), message: "split has no slides".into() });
    }
    let head = cfg.train.head;
    let probs = metrics::predict(&head, &params, bags)?;
    let labels: Vec<[bool; NUM_FACTORS]> = bags.iter().map(|b| b.labels().0.map(|v| v != 0)).collect();
    let report = EvalReport::from_probabilities(&probs, &labels, cfg.threshold)?;
    let dir = cfg.output.join(format!("eval_{}", split.name()));
    report::write_all(&dir, &report, &probs, &labels)?;
    Ok(EvalRun { report, dir })
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub head: Option<HeadKind>,
    pub stream_mode: Option<String>,
    pub domains: Option<Vec<Domain>>,
}

pub fn load_config(path: &Path, o: &Overrides) -> Result<Resolved> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    let bad = |message: String| Error::Config { path: path.to_path_buf(), message };
    let mut raw = RunConfig::parse(&text).map_err(bad)?;
    if let Some(seed) = o.seed {
        raw.train.seed = seed;
    }
    if let Some(head) = o.head {
        raw.model.head = head.name().into();
    }
    if let Some(mode) = &o.stream_mode {
        raw.data.stream_mode = mode.clone();
    }
    if let Some(domains) = &o.domains {
        raw.data.domains = domains.iter().map(|d| d.name().to_string()).collect();
    }
    raw.resolve(path.parent().unwrap_or(Path::new(""))).map_err(bad)
}

/// Default extractor grid.
pub const GRID: usize = DEFAULT_GRID;
