//! Precomputed embedding store, keyed by SHA-256 of the exact UTF-8 text.
//!
//! File layout (little-endian):
//!
//! ```text
//! b"LGNEMB1"  dim:u32  { key:[u8; 32]  values:[f32; dim] }*
//! ```
//!
//! The record count is implied by the file length. Missing texts are
//! reported through a pending-texts manifest, one JSON object per line:
//! `{"sha256": "<hex>", "text": "<text>"}`.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EmbeddingVector, Encoder};
use crate::data::write_atomic;
use crate::error::{Error, MissingText, Result};

pub const STORE_MAGIC: &[u8; 7] = b"LGNEMB1";
const HEADER_LEN: usize = STORE_MAGIC.len() + 4;

pub type Key = [u8; 32];

pub fn sha256(text: &str) -> Key {
    Sha256::digest(text.as_bytes()).into()
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(sha256(text))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    index: HashMap<Key, usize>,
    keys: Vec<Key>,
    vectors: Vec<Vec<f32>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > u32::MAX as usize {
            return Err(Error::InvalidStore(format!("unsupported dim {dim}")));
        }
        Ok(Self {
            dim,
            index: HashMap::new(),
            keys: Vec::new(),
            vectors: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Adds the vector for `text`. Returns `false` (and keeps the existing
    /// record) when the key is already present.
    pub fn insert(&mut self, text: &str, values: &[f32]) -> Result<bool> {
        self.insert_key(sha256(text), values)
    }

    pub fn insert_key(&mut self, key: Key, values: &[f32]) -> Result<bool> {
        if values.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidStore("non-finite vector component".into()));
        }
        if self.index.contains_key(&key) {
            return Ok(false);
        }
        self.index.insert(key, self.keys.len());
        self.keys.push(key);
        self.vectors.push(values.to_vec());
        Ok(true)
    }

    pub fn get(&self, text: &str) -> Option<&[f32]> {
        self.get_key(&sha256(text))
    }

    pub fn get_key(&self, key: &Key) -> Option<&[f32]> {
        self.index.get(key).map(|&i| self.vectors[i].as_slice())
    }

    pub fn contains(&self, text: &str) -> bool {
        self.index.contains_key(&sha256(text))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.len() * (32 + 4 * self.dim));
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for (key, values) in self.keys.iter().zip(&self.vectors) {
            out.extend_from_slice(key);
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..STORE_MAGIC.len()] != STORE_MAGIC {
            return Err(Error::InvalidStore("bad magic".into()));
        }
        let dim = u32::from_le_bytes(bytes[7..11].try_into().expect("4 bytes")) as usize;
        let mut store = Self::new(dim)?;
        let record_len = 32 + 4 * dim;
        let body = &bytes[HEADER_LEN..];
        if !body.len().is_multiple_of(record_len) {
            return Err(Error::InvalidStore(format!(
                "body length {} is not a multiple of record size {record_len}",
                body.len()
            )));
        }
        for record in body.chunks_exact(record_len) {
            let key: Key = record[..32].try_into().expect("32 bytes");
            let values: Vec<f32> = record[32..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            if !store.insert_key(key, &values)? {
                return Err(Error::InvalidStore(format!(
                    "duplicate key {}",
                    hex::encode(key)
                )));
            }
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }
}

/// Looks up embeddings in an [`EmbeddingStore`]; vectors are normalized on the way out.
#[derive(Debug, Clone)]
pub struct StoreEncoder {
    store: Arc<EmbeddingStore>,
}

impl StoreEncoder {
    pub fn new(store: Arc<EmbeddingStore>) -> Self {
        Self { store }
    }

    pub fn store(&self) -> &EmbeddingStore {
        &self.store
    }

    pub(crate) fn lookup(&self, text: &str) -> Option<EmbeddingVector> {
        self.store.get(text).map(|values| {
            EmbeddingVector::normalized(values.iter().map(|&v| f64::from(v)).collect())
        })
    }
}

impl Encoder for StoreEncoder {
    fn dim(&self) -> usize {
        self.store.dim()
    }

    fn encode_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let mut out = Vec::with_capacity(texts.len());
        let mut missing = Vec::new();
        let mut seen = HashSet::new();
        for text in texts {
            match self.lookup(text) {
                Some(v) => out.push(v),
                None => {
                    if seen.insert(text.as_str()) {
                        missing.push(MissingText {
                            key: sha256_hex(text),
                            text: text.clone(),
                        });
                    }
                }
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::MissingEmbedding(missing))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PendingRecord {
    sha256: String,
    text: String,
}

/// Writes a pending-texts manifest, deduplicated by key, in first-seen order.
pub fn write_pending_manifest(path: impl AsRef<Path>, missing: &[MissingText]) -> Result<()> {
    let mut seen = HashSet::new();
    let mut out = String::new();
    for m in missing {
        if !seen.insert(m.key.as_str()) {
            continue;
        }
        let record = PendingRecord {
            sha256: m.key.clone(),
            text: m.text.clone(),
        };
        out.push_str(&serde_json::to_string(&record).expect("pending record serializes"));
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub fn read_pending_manifest(path: impl AsRef<Path>) -> Result<Vec<MissingText>> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let r: PendingRecord =
                serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            Ok(MissingText {
                key: r.sha256,
                text: r.text,
            })
        })
        .collect()
}
