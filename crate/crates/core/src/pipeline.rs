//! The system variants: when to decorate, when to retrain the adapter, and
//! which head to fit, across growing-data steps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::adapter::{train_adapter, AdapterConfig, AdapterState};
use crate::data::LabeledDataset;
use crate::decorator::{decorate_test_embedded, decorate_train, DecoratedExample, DecoratorConfig};
use crate::encoders::{check_dim, AdaptedEncoder, EmbeddingVector, Encoder};
use crate::error::{Error, Result};
use crate::heads::{fit_logreg, Head, KnnHeadModel, LogRegParams, Scored, KNN_HEAD_K};
use crate::neighbors::NeighborIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Probe,
    LagonnCheap,
    LogReg,
    Knn,
    Lagonn,
    SetFit,
    LagonnExp,
    SetFitLite,
    LagonnLite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdapterSchedule {
    Never,
    Step1Only,
    EveryStep,
    ThroughStep4,
}

impl AdapterSchedule {
    pub fn fires_at(self, step: usize) -> bool {
        match self {
            AdapterSchedule::Never => false,
            AdapterSchedule::Step1Only => step == 1,
            AdapterSchedule::EveryStep => true,
            AdapterSchedule::ThroughStep4 => step <= 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    LogReg,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantSpec {
    pub decorates: bool,
    pub schedule: AdapterSchedule,
    pub head: HeadKind,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Probe,
        Variant::LagonnCheap,
        Variant::LogReg,
        Variant::Knn,
        Variant::Lagonn,
        Variant::SetFit,
        Variant::LagonnExp,
        Variant::SetFitLite,
        Variant::LagonnLite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Probe => "PROBE",
            Variant::LagonnCheap => "LAGONN_CHEAP",
            Variant::LogReg => "LOGREG",
            Variant::Knn => "KNN",
            Variant::Lagonn => "LAGONN",
            Variant::SetFit => "SETFIT",
            Variant::LagonnExp => "LAGONN_EXP",
            Variant::SetFitLite => "SETFIT_LITE",
            Variant::LagonnLite => "LAGONN_LITE",
        }
    }

    pub fn spec(self) -> VariantSpec {
        use AdapterSchedule::*;
        let (decorates, schedule, head) = match self {
            Variant::Probe => (false, Never, HeadKind::LogReg),
            Variant::LagonnCheap => (true, Never, HeadKind::LogReg),
            Variant::LogReg => (false, Step1Only, HeadKind::LogReg),
            Variant::Knn => (false, Step1Only, HeadKind::Knn),
            Variant::Lagonn => (true, Step1Only, HeadKind::LogReg),
            Variant::SetFit => (false, EveryStep, HeadKind::LogReg),
            Variant::LagonnExp => (true, EveryStep, HeadKind::LogReg),
            Variant::SetFitLite => (false, ThroughStep4, HeadKind::LogReg),
            Variant::LagonnLite => (true, ThroughStep4, HeadKind::LogReg),
        };
        VariantSpec {
            decorates,
            schedule,
            head,
        }
    }

    /// Row block in the report table; comparable methods share a block.
    pub fn report_group(self) -> usize {
        match self {
            Variant::SetFit | Variant::LagonnExp => 0,
            Variant::SetFitLite | Variant::LagonnLite => 1,
            Variant::Knn | Variant::LogReg | Variant::Lagonn => 2,
            Variant::Probe | Variant::LagonnCheap => 3,
        }
    }

    pub fn report_position(self) -> usize {
        const ORDER: [Variant; 9] = [
            Variant::SetFit,
            Variant::LagonnExp,
            Variant::SetFitLite,
            Variant::LagonnLite,
            Variant::Knn,
            Variant::LogReg,
            Variant::Lagonn,
            Variant::Probe,
            Variant::LagonnCheap,
        ];
        ORDER.iter().position(|&v| v == self).expect("listed")
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let valid: Vec<&str> = Self::ALL.iter().map(|v| v.name()).collect();
                Error::Config(format!(
                    "unknown variant {s:?}; valid variants: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub decorator: DecoratorConfig,
    /// `seed` is the base seed; the adapter trained at step `t` uses `seed ^ t`.
    pub adapter: AdapterConfig,
    pub logreg: LogRegParams,
    pub knn_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            decorator: DecoratorConfig::default(),
            adapter: AdapterConfig::default(),
            logreg: LogRegParams::default(),
            knn_k: KNN_HEAD_K,
        }
    }
}

/// Everything fitted at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineState {
    pub step: usize,
    pub train: LabeledDataset,
    /// Identity until an adapter has been trained.
    pub adapter: AdapterState,
    /// Whether the adapter was retrained at this step.
    pub adapter_trained: bool,
    /// Current-encoder embeddings of the raw rendered training texts.
    pub index: NeighborIndex,
    /// Texts the head was fit on (decorated for decorating variants).
    pub inputs: Vec<String>,
    /// Training decorations, empty for non-decorating variants.
    pub decorations: Vec<DecoratedExample>,
    pub head: Head,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub scored: Scored,
    /// Texts fed to the encoder (decorated for decorating variants).
    pub inputs: Vec<String>,
    pub decorations: Vec<DecoratedExample>,
}

/// One variant's run over successive cumulative training sets.
pub struct Pipeline<'a> {
    variant: Variant,
    spec: VariantSpec,
    base: &'a dyn Encoder,
    config: PipelineConfig,
    adapter: AdapterState,
}

impl<'a> Pipeline<'a> {
    pub fn new(variant: Variant, base: &'a dyn Encoder, config: PipelineConfig) -> Result<Self> {
        config.decorator.validate()?;
        config.adapter.validate()?;
        if config.knn_k == 0 {
            return Err(Error::Config("knn_k must be positive".into()));
        }
        Ok(Self {
            variant,
            spec: variant.spec(),
            base,
            adapter: AdapterState::identity(base.dim()),
            config,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn adapter(&self) -> &AdapterState {
        &self.adapter
    }

    fn adapt_all(&self, base: &[EmbeddingVector]) -> Result<Vec<EmbeddingVector>> {
        let encoder = AdaptedEncoder::new(self.base, &self.adapter)?;
        base.iter().map(|v| encoder.adapt(v)).collect()
    }

    fn decorate_all(
        &self,
        index: &NeighborIndex,
        train: &LabeledDataset,
    ) -> Result<Vec<DecoratedExample>> {
        train
            .examples()
            .par_iter()
            .map(|e| decorate_train(e, index, train, &self.config.decorator))
            .collect()
    }

    /// Trains a fresh adapter, retrying with smaller learning rates on divergence.
    fn train(&self, x: &[EmbeddingVector], labels: &[usize], step: usize) -> Result<AdapterState> {
        let mut config = self.config.adapter;
        config.seed ^= step as u64;
        let mut last = None;
        for scale in [1.0, 0.1, 0.01] {
            config.learning_rate = self.config.adapter.learning_rate * scale;
            match train_adapter(x, labels, &config) {
                Err(Error::Divergence(msg)) => {
                    log::warn!(
                        "{} step {step}: adapter diverged at lr {}: {msg}",
                        self.variant,
                        config.learning_rate
                    );
                    last = Some(Error::Divergence(msg));
                }
                other => return other,
            }
        }
        Err(last.expect("at least one attempt"))
    }

    /// Fits this step's state on the cumulative training set `train`.
    pub fn run_step(&mut self, step: usize, train: &LabeledDataset) -> Result<PipelineState> {
        if train.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let sep = &self.config.decorator.separator;
        let labels = train.labels();
        let raw = train.rendered(sep);
        let base_raw = self.base.encode_batch(&raw)?;
        for v in &base_raw {
            check_dim(self.base.dim(), v.dim())?;
        }

        let adapter_trained = self.spec.schedule.fires_at(step);
        if adapter_trained {
            let x = if self.spec.decorates {
                let pre = NeighborIndex::new(self.adapt_all(&base_raw)?, labels.clone())?;
                let texts: Vec<String> = self
                    .decorate_all(&pre, train)?
                    .into_iter()
                    .map(|d| d.decorated_text)
                    .collect();
                self.base.encode_batch(&texts)?
            } else {
                base_raw.clone()
            };
            self.adapter = self.train(&x, &labels, step)?;
        }

        let index = NeighborIndex::new(self.adapt_all(&base_raw)?, labels.clone())?;
        let (inputs, decorations, head_x) = if self.spec.decorates {
            let decorations = self.decorate_all(&index, train)?;
            let inputs: Vec<String> = decorations
                .iter()
                .map(|d| d.decorated_text.clone())
                .collect();
            let head_x = self.adapt_all(&self.base.encode_batch(&inputs)?)?;
            (inputs, decorations, head_x)
        } else {
            let head_x = (0..index.len()).map(|i| index.vector(i).clone()).collect();
            (raw, Vec::new(), head_x)
        };

        let num_labels = train.label_map().len();
        let head = match self.spec.head {
            HeadKind::LogReg => Head::LogReg(fit_logreg(
                &head_x,
                &labels,
                num_labels,
                &self.config.logreg,
            )?),
            HeadKind::Knn => {
                let k = self.config.knn_k.min(head_x.len());
                Head::Knn(KnnHeadModel::new(
                    NeighborIndex::new(head_x, labels)?,
                    k,
                    num_labels,
                )?)
            }
        };

        Ok(PipelineState {
            step,
            train: train.clone(),
            adapter: self.adapter.clone(),
            adapter_trained,
            index,
            inputs,
            decorations,
            head,
        })
    }

    /// Scores `test` with a fitted state.
    pub fn predict(&self, state: &PipelineState, test: &LabeledDataset) -> Result<Prediction> {
        let sep = &self.config.decorator.separator;
        let raw = test.rendered(sep);
        let encoder = AdaptedEncoder::new(self.base, &state.adapter)?;
        let embedded = encoder.encode_batch(&raw)?;
        let (inputs, decorations, x) = if self.spec.decorates {
            let decorations: Vec<DecoratedExample> = raw
                .par_iter()
                .zip(embedded.par_iter())
                .map(|(text, v)| {
                    decorate_test_embedded(
                        text,
                        v,
                        &state.index,
                        &state.train,
                        &self.config.decorator,
                    )
                })
                .collect::<Result<_>>()?;
            let inputs: Vec<String> = decorations
                .iter()
                .map(|d| d.decorated_text.clone())
                .collect();
            let x = encoder.encode_batch(&inputs)?;
            (inputs, decorations, x)
        } else {
            (raw, Vec::new(), embedded)
        };
        Ok(Prediction {
            scored: state.head.score(&x)?,
            inputs,
            decorations,
        })
    }
}
