use super::{check_dim, EmbeddingVector, Encoder};
use crate::adapter::AdapterState;
use crate::error::{Error, Result};

/// A base encoder followed by a trained adapter: `normalize(W f(text))`.
pub struct AdaptedEncoder<'a> {
    base: &'a dyn Encoder,
    adapter: &'a AdapterState,
}

impl<'a> AdaptedEncoder<'a> {
    pub fn new(base: &'a dyn Encoder, adapter: &'a AdapterState) -> Result<Self> {
        check_dim(base.dim(), adapter.dim())?;
        Ok(Self { base, adapter })
    }

    /// Applies the adapter to an already-computed base embedding.
    pub fn adapt(&self, base: &EmbeddingVector) -> Result<EmbeddingVector> {
        adapt(self.adapter, base)
    }
}

pub(crate) fn adapt(adapter: &AdapterState, base: &EmbeddingVector) -> Result<EmbeddingVector> {
    if base.is_zero() || adapter.is_identity() {
        return Ok(base.clone());
    }
    let projected = EmbeddingVector::normalized(adapter.apply(base.as_slice()));
    if !projected.is_finite() {
        return Err(Error::NonFiniteEmbedding);
    }
    Ok(projected)
}

impl Encoder for AdaptedEncoder<'_> {
    fn dim(&self) -> usize {
        self.adapter.dim()
    }

    fn encode_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        self.base
            .encode_batch(texts)?
            .iter()
            .map(|v| adapt(self.adapter, v))
            .collect()
    }
}
