use super::{EmbeddingVector, Encoder};
use crate::error::{Error, Result};
use crate::rng::fnv1a64;

/// Bag-of-words feature hashing into `dim` buckets, L2-normalized.
///
/// Tokens are maximal alphanumeric runs of the lowercased text; each token
/// adds 1 to bucket `fnv1a64(token) % dim`.
pub fn hash_encode(text: &str, dim: usize) -> EmbeddingVector {
    assert!(dim >= 1, "hash encoder needs dim >= 1");
    let lower = text.to_lowercase();
    let mut counts = vec![0.0; dim];
    for token in lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let bucket = (fnv1a64(token.as_bytes()) % dim as u64) as usize;
        counts[bucket] += 1.0;
    }
    EmbeddingVector::normalized(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEncoder {
    dim: usize,
}

impl HashEncoder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("hash encoder dim must be positive".into()));
        }
        Ok(Self { dim })
    }
}

impl Encoder for HashEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| hash_encode(t, self.dim)).collect())
    }
}
