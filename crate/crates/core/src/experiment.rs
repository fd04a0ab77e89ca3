//! End-to-end drivers: experiment runs, report generation, synthetic corpora.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::data::{write_atomic, DatasetRecord, LabelMap, LabeledDataset};
use crate::encoders::{
    write_pending_manifest, EmbeddingStore, EmbeddingVector, Encoder, HashEncoder, StoreEncoder,
    SyntheticEncoder,
};
use crate::error::{Error, MissingText, Result};
use crate::harness::{
    aggregate, average_precision, macro_f1, read_shard, sample_step, shard_paths, write_shard,
    Metric, Regime, RunResult, STEPS,
};
use crate::pipeline::{Pipeline, PipelineConfig, Variant};
use crate::rng::SplitMix64;

pub const SEED_ENV: &str = "LAGONN_SEED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderSpec {
    Hash(usize),
    Store(PathBuf),
    /// A store holding original texts and label-name anchors; decorated
    /// texts are composed from them.
    Synthetic(PathBuf),
}

impl FromStr for EncoderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Config(format!(
                "bad encoder spec {s:?}; expected hash:<dim>, store:<path> or synthetic:<path>"
            ))
        };
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "hash" => arg.parse().map(EncoderSpec::Hash).map_err(|_| bad()),
            "store" if !arg.is_empty() => Ok(EncoderSpec::Store(arg.into())),
            "synthetic" if !arg.is_empty() => Ok(EncoderSpec::Synthetic(arg.into())),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for EncoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderSpec::Hash(dim) => write!(f, "hash:{dim}"),
            EncoderSpec::Store(p) => write!(f, "store:{}", p.display()),
            EncoderSpec::Synthetic(p) => write!(f, "synthetic:{}", p.display()),
        }
    }
}

impl EncoderSpec {
    pub fn build(&self, separator: &str) -> Result<Box<dyn Encoder>> {
        Ok(match self {
            EncoderSpec::Hash(dim) => Box::new(HashEncoder::new(*dim)?),
            EncoderSpec::Store(path) => {
                Box::new(StoreEncoder::new(Arc::new(EmbeddingStore::load(path)?)))
            }
            EncoderSpec::Synthetic(path) => Box::new(SyntheticEncoder::new(
                Arc::new(EmbeddingStore::load(path)?),
                separator,
            )),
        })
    }
}

/// Parses a comma-separated seed list such as `0,1,2`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad seed {part:?} in {s:?}")))
        })
        .collect()
}

/// Seeds from `LAGONN_SEED` when set, otherwise `configured`.
pub fn resolve_seeds(configured: Vec<u64>) -> Result<Vec<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(value) if !value.trim().is_empty() => parse_seed_list(&value),
        _ => Ok(configured),
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Training pool that regimes sample from.
    pub dataset: PathBuf,
    pub test: PathBuf,
    pub labels: PathBuf,
    pub encoder: EncoderSpec,
    pub variants: Vec<Variant>,
    pub regimes: Vec<Regime>,
    pub seeds: Vec<u64>,
    /// `adapter.seed` is ignored; each run seeds its adapter from the run seed.
    pub pipeline: PipelineConfig,
    pub out: PathBuf,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() || self.regimes.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "need at least one variant, regime and seed".into(),
            ));
        }
        let unique = |n: usize, m: usize, what: &str| {
            if n != m {
                Err(Error::Config(format!("duplicate {what}")))
            } else {
                Ok(())
            }
        };
        unique(
            self.variants.iter().collect::<BTreeSet<_>>().len(),
            self.variants.len(),
            "variant",
        )?;
        unique(
            self.regimes.iter().collect::<BTreeSet<_>>().len(),
            self.regimes.len(),
            "regime",
        )?;
        unique(
            self.seeds.iter().collect::<BTreeSet<_>>().len(),
            self.seeds.len(),
            "seed",
        )?;
        self.pipeline.decorator.validate()?;
        self.pipeline.adapter.validate()
    }
}

/// Counts from the self-exclusion check on training decorations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelfExclusion {
    pub decorations_checked: usize,
    pub self_citations: usize,
}

impl SelfExclusion {
    fn merge(&mut self, other: SelfExclusion) {
        self.decorations_checked += other.decorations_checked;
        self.self_citations += other.self_citations;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub variant: Variant,
    pub regime: Regime,
    pub seed: u64,
    pub results: Vec<RunResult>,
    pub self_exclusion: SelfExclusion,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub shards: Vec<PathBuf>,
    pub self_exclusion: SelfExclusion,
}

pub fn shard_path(out: &Path, variant: Variant, regime: Regime, seed: u64) -> PathBuf {
    out.join("shards")
        .join(format!("{variant}_{regime}_{seed}.csv"))
}

pub fn pending_path(out: &Path) -> PathBuf {
    out.join("pending.jsonl")
}

fn score(
    metric: Metric,
    scores: &[Vec<f64>],
    predicted: &[usize],
    gold: &[usize],
    num_labels: usize,
) -> Result<f64> {
    match metric {
        Metric::AveragePrecision => {
            let positive: Vec<f64> = scores.iter().map(|row| row[1]).collect();
            average_precision(&positive, gold)
        }
        Metric::MacroF1 => Ok(macro_f1(predicted, gold, num_labels)),
    }
}

/// Runs one variant for all steps of one (regime, seed) cell.
pub fn run_single(
    variant: Variant,
    regime: Regime,
    seed: u64,
    pool: &LabeledDataset,
    test: &LabeledDataset,
    encoder: &dyn Encoder,
    config: &PipelineConfig,
) -> Result<RunOutcome> {
    let mut config = config.clone();
    config.adapter.seed = seed;
    let mut pipeline = Pipeline::new(variant, encoder, config)?;
    let num_labels = pool.label_map().len();
    let metric = Metric::for_labels(num_labels);
    let gold = test.labels();
    let mut results = Vec::with_capacity(STEPS);
    let mut self_exclusion = SelfExclusion::default();
    for step in 1..=STEPS {
        let sample = sample_step(pool, regime, step, seed)?;
        let state = pipeline.run_step(step, &sample.dataset)?;
        for d in &state.decorations {
            self_exclusion.decorations_checked += 1;
            if d.cited.iter().any(|h| Some(h.id) == d.id) {
                self_exclusion.self_citations += 1;
            }
        }
        let prediction = pipeline.predict(&state, test)?;
        let value = score(
            metric,
            &prediction.scored.scores,
            &prediction.scored.labels,
            &gold,
            num_labels,
        )?;
        log::debug!(
            "{variant} {regime} seed {seed} step {step}: {} = {value:.4}",
            metric.name()
        );
        results.push(RunResult {
            variant: variant.name().into(),
            regime: regime.name().into(),
            seed,
            step,
            metric: metric.name().into(),
            value: value * 100.0,
        });
    }
    Ok(RunOutcome {
        variant,
        regime,
        seed,
        results,
        self_exclusion,
    })
}

fn merge_missing(errors: &[&Error]) -> Vec<MissingText> {
    let mut seen = BTreeSet::new();
    let mut merged = Vec::new();
    for e in errors {
        if let Error::MissingEmbedding(missing) = e {
            for m in missing {
                if seen.insert(m.key.clone()) {
                    merged.push(m.clone());
                }
            }
        }
    }
    merged
}

/// Runs every (variant, regime, seed) cell and writes one shard per cell.
///
/// Missing store embeddings from all cells are merged into
/// `out/pending.jsonl` and reported as a single `MissingEmbedding` error.
pub fn cmd_run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let label_map = LabelMap::load(&config.labels)?;
    let pool = crate::data::load_dataset(&config.dataset, label_map.clone())?;
    let test = crate::data::load_dataset(&config.test, label_map)?;
    let encoder = config.encoder.build(&config.pipeline.decorator.separator)?;

    let mut cells = Vec::new();
    for &variant in &config.variants {
        for &regime in &config.regimes {
            for &seed in &config.seeds {
                cells.push((variant, regime, seed));
            }
        }
    }
    fs::create_dir_all(config.out.join("shards")).map_err(|e| Error::io(&config.out, e))?;

    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<RunOutcome>> = threads.install(|| {
        cells
            .par_iter()
            .map(|&(variant, regime, seed)| {
                let outcome = run_single(
                    variant,
                    regime,
                    seed,
                    &pool,
                    &test,
                    encoder.as_ref(),
                    &config.pipeline,
                )?;
                write_shard(
                    shard_path(&config.out, variant, regime, seed),
                    &outcome.results,
                )?;
                Ok(outcome)
            })
            .collect()
    });

    let mut summary = RunSummary::default();
    let mut errors = Vec::new();
    for outcome in &outcomes {
        match outcome {
            Ok(o) => {
                summary
                    .shards
                    .push(shard_path(&config.out, o.variant, o.regime, o.seed));
                summary.self_exclusion.merge(o.self_exclusion);
            }
            Err(e) => errors.push(e),
        }
    }
    let missing = merge_missing(&errors);
    if !missing.is_empty() {
        write_pending_manifest(pending_path(&config.out), &missing)?;
        return Err(Error::MissingEmbedding(missing));
    }
    if let Some(Err(e)) = outcomes.into_iter().find(Result::is_err) {
        return Err(e);
    }
    if summary.self_exclusion.self_citations > 0 {
        return Err(Error::Config(format!(
            "{} training decorations cited their own example",
            summary.self_exclusion.self_citations
        )));
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub text: PathBuf,
}

/// Aggregates all shards in `shard_dir` into `out/report.csv` and `out/report.txt`.
pub fn cmd_report(shard_dir: &Path, out: &Path) -> Result<ReportPaths> {
    let paths = shard_paths(shard_dir)?;
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no shards in {}",
            shard_dir.display()
        )));
    }
    let mut results = Vec::new();
    for p in &paths {
        results.extend(read_shard(p)?);
    }
    let table = aggregate(&results)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let paths = ReportPaths {
        csv: out.join("report.csv"),
        text: out.join("report.txt"),
    };
    write_atomic(&paths.csv, &table.to_csv()?)?;
    write_atomic(&paths.text, table.to_text().as_bytes())?;
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_per_class: usize,
    pub test_per_class: usize,
    pub classes: usize,
    pub dim: usize,
    pub margin: f64,
    /// Upper bound on the norm of the noise added to each class direction.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_per_class: 1000,
            test_per_class: 100,
            classes: 2,
            dim: 32,
            margin: 3.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPaths {
    pub train: PathBuf,
    pub test: PathBuf,
    pub labels: PathBuf,
    pub store: PathBuf,
}

pub fn class_name(c: usize) -> String {
    format!("class{c}")
}

fn noise_vector(rng: &mut SplitMix64, dim: usize, bound: f64) -> Vec<f64> {
    let direction =
        EmbeddingVector::normalized((0..dim).map(|_| 2.0 * rng.next_f64() - 1.0).collect());
    let radius = bound * rng.next_f64();
    direction.as_slice().iter().map(|d| d * radius).collect()
}

/// Builds a labeled corpus whose store vectors are
/// `normalize(margin * e_c + noise)` with `|noise| <= noise bound`.
///
/// Each label name is stored as its class direction `e_c`, the anchor cited
/// by label-only decorations. Byte-identical for a fixed config.
pub fn make_synthetic(
    config: &SyntheticConfig,
) -> Result<(LabeledDataset, LabeledDataset, EmbeddingStore)> {
    if config.margin.is_nan() || config.margin <= 0.0 {
        return Err(Error::Config("margin must be positive".into()));
    }
    if config.noise.is_nan() || config.noise < 0.0 {
        return Err(Error::Config("noise bound must be non-negative".into()));
    }
    if config.classes < 2 || config.classes > config.dim {
        return Err(Error::Config(format!(
            "need 2 <= classes <= dim, got {} classes in dim {}",
            config.classes, config.dim
        )));
    }
    if config.n_per_class == 0 || config.test_per_class == 0 {
        return Err(Error::Config(
            "need at least one train and one test example per class".into(),
        ));
    }
    let label_map = LabelMap::new((0..config.classes).map(class_name))?;
    let mut store = EmbeddingStore::new(config.dim)?;
    for c in 0..config.classes {
        let mut anchor = vec![0.0f32; config.dim];
        anchor[c] = 1.0;
        store.insert(&class_name(c), &anchor)?;
    }
    let mut rng = SplitMix64::new(config.seed);
    let mut split =
        |name: &str, per_class: usize, store: &mut EmbeddingStore| -> Result<LabeledDataset> {
            let mut records = Vec::with_capacity(per_class * config.classes);
            for i in 0..per_class {
                for c in 0..config.classes {
                    let a = rng.index(50);
                    let b = rng.index(50);
                    let text = format!("topic{c} topic{c} topic{c} {name}{c}x{i} w{a} w{b}");
                    let mut v = noise_vector(&mut rng, config.dim, config.noise);
                    v[c] += config.margin;
                    let v = EmbeddingVector::normalized(v);
                    let v32: Vec<f32> = v.as_slice().iter().map(|&x| x as f32).collect();
                    store.insert(&text, &v32)?;
                    records.push(DatasetRecord {
                        text,
                        text_pair: None,
                        label: c,
                    });
                }
            }
            LabeledDataset::from_records(records, label_map.clone())
        };
    let train = split("train", config.n_per_class, &mut store)?;
    let test = split("test", config.test_per_class, &mut store)?;
    Ok((train, test, store))
}

/// Writes `train.jsonl`, `test.jsonl`, `labels.jsonl` and `store.bin` into `out_dir`.
pub fn cmd_make_synthetic(config: &SyntheticConfig, out_dir: &Path) -> Result<SyntheticPaths> {
    let (train, test, store) = make_synthetic(config)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths = SyntheticPaths {
        train: out_dir.join("train.jsonl"),
        test: out_dir.join("test.jsonl"),
        labels: out_dir.join("labels.jsonl"),
        store: out_dir.join("store.bin"),
    };
    train.save(&paths.train)?;
    test.save(&paths.test)?;
    train.label_map().save(&paths.labels)?;
    store.save(&paths.store)?;
    Ok(paths)
}
