//! The embedding function: text in, unit-normalized vector out.
//!
//! Providers implement [`Encoder`]. Every provider output has L2 norm 1, or is
//! exactly zero when the input carries no signal (e.g. a text with no tokens).
//! Because all vectors live on the unit sphere, Euclidean distances between
//! them fall in `[0, 2]`.

mod adapted;
mod hash;
mod store;
mod synthetic;

pub use adapted::AdaptedEncoder;
pub use hash::{hash_encode, HashEncoder};
pub use store::{
    read_pending_manifest, sha256_hex, write_pending_manifest, EmbeddingStore, StoreEncoder,
    STORE_MAGIC,
};
pub use synthetic::{SyntheticEncoder, CITED_WEIGHT, ORIGINAL_WEIGHT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Wraps raw components without normalizing them.
    pub fn from_raw(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// Scales `values` to unit L2 norm; an all-zero input stays zero.
    pub fn normalized(mut values: Vec<f64>) -> Self {
        let norm = l2_norm(&values);
        if norm > 0.0 {
            values.iter_mut().for_each(|v| *v /= norm);
        }
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

pub(crate) fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A deterministic text encoder with a fixed output dimension.
///
/// `encode_batch` reports every text it cannot embed at once (as
/// [`Error::MissingEmbedding`]), so callers can request all of them in a
/// single export pass.
pub trait Encoder: Send + Sync {
    fn dim(&self) -> usize;

    fn encode_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;

    fn encode(&self, text: &str) -> Result<EmbeddingVector> {
        let mut out = self.encode_batch(&[text.to_string()])?;
        Ok(out.pop().expect("one vector per text"))
    }
}

impl<E: Encoder + ?Sized> Encoder for &E {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn encode_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        (**self).encode_batch(texts)
    }
}

impl<E: Encoder + ?Sized> Encoder for Box<E> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn encode_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        (**self).encode_batch(texts)
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimMismatch { expected, actual })
    }
}
