//! Nearest-neighbor decoration for sentence-embedding text classifiers.
//!
//! Each input is rewritten with its nearest training neighbor's label name,
//! distance and optionally text, then re-embedded and classified. The crate
//! also provides the growing-data, label-imbalance evaluation harness and
//! the baseline and decorated system variants it compares.

pub mod adapter;
pub mod data;
pub mod decorator;
pub mod encoders;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod heads;
pub mod neighbors;
pub mod pipeline;
pub mod rng;

pub use adapter::{AdapterConfig, AdapterState};
pub use data::{
    load_dataset, render_input, DatasetRecord, LabelMap, LabeledDataset, LabeledExample,
};
pub use decorator::{DecoratedExample, DecorationMode, DecoratorConfig};
pub use encoders::{EmbeddingVector, Encoder};
pub use error::{Error, Result};
pub use neighbors::{NeighborHit, NeighborIndex};
pub use pipeline::{Pipeline, PipelineConfig, PipelineState, Variant};
