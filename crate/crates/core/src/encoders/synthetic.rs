//! Store-backed encoder that also understands decorated texts.
//!
//! Synthetic corpora ship vectors only for their raw texts and label names.
//! A decorated text `original {sep} [name dist] neighbor...` that is not in
//! the store embeds as `0.7 * v(original) + 0.3 * v(cited)`, renormalized,
//! where `v(cited)` averages, over the appended segments, the neighbor text's
//! vector when the segment carries one, or the label-name anchor vector
//! otherwise.

use std::sync::Arc;

use super::{EmbeddingVector, Encoder, StoreEncoder};
use crate::error::{Error, MissingText, Result};

pub const ORIGINAL_WEIGHT: f64 = 0.7;
pub const CITED_WEIGHT: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct SyntheticEncoder {
    store: StoreEncoder,
    separator: String,
}

struct Segment<'a> {
    label_name: &'a str,
    neighbor: Option<&'a str>,
}

impl SyntheticEncoder {
    pub fn new(store: Arc<crate::encoders::EmbeddingStore>, separator: impl Into<String>) -> Self {
        Self {
            store: StoreEncoder::new(store),
            separator: separator.into(),
        }
    }

    /// Byte offset where a decoration segment begins, with the label name and
    /// the end of its bracket, if `text[at..]` starts one.
    fn segment_at<'a>(&self, text: &'a str, at: usize) -> Option<(&'a str, usize)> {
        let marker_len = self.separator.len() + 3;
        let open = at + marker_len;
        let close = open + text[open..].find(']')?;
        let (name, distance) = text[open..close].rsplit_once(' ')?;
        distance.parse::<f64>().ok()?;
        self.store
            .store()
            .contains(name)
            .then_some((name, close + 1))
    }

    fn parse<'a>(&self, text: &'a str) -> Option<(&'a str, Vec<Segment<'a>>)> {
        let marker = format!(" {} [", self.separator);
        let starts: Vec<(usize, &str, usize)> = text
            .match_indices(&marker)
            .filter_map(|(at, _)| self.segment_at(text, at).map(|(n, end)| (at, n, end)))
            .collect();
        let first = starts.first()?.0;
        let mut segments = Vec::with_capacity(starts.len());
        for (i, &(_, label_name, end)) in starts.iter().enumerate() {
            let body_end = starts.get(i + 1).map_or(text.len(), |next| next.0);
            if end > body_end {
                return None;
            }
            let body = &text[end..body_end];
            let neighbor = body.strip_prefix(' ').filter(|b| !b.is_empty());
            segments.push(Segment {
                label_name,
                neighbor,
            });
        }
        Some((&text[..first], segments))
    }

    fn compose(&self, text: &str) -> Option<EmbeddingVector> {
        let (original, segments) = self.parse(text)?;
        let base = self.store.lookup(original)?;
        let dim = base.dim();
        let mut cited = vec![0.0; dim];
        for segment in &segments {
            let v = segment
                .neighbor
                .and_then(|n| self.store.lookup(n))
                .or_else(|| self.store.lookup(segment.label_name))?;
            cited
                .iter_mut()
                .zip(v.as_slice())
                .for_each(|(c, x)| *c += x);
        }
        let k = segments.len() as f64;
        let mixed = base
            .as_slice()
            .iter()
            .zip(&cited)
            .map(|(o, c)| ORIGINAL_WEIGHT * o + CITED_WEIGHT * c / k)
            .collect();
        Some(EmbeddingVector::normalized(mixed))
    }
}

impl Encoder for SyntheticEncoder {
    fn dim(&self) -> usize {
        self.store.dim()
    }

    fn encode_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        let mut out = Vec::with_capacity(texts.len());
        let mut missing = Vec::new();
        for text in texts {
            match self.store.lookup(text).or_else(|| self.compose(text)) {
                Some(v) => out.push(v),
                None => missing.push(MissingText {
                    key: super::sha256_hex(text),
                    text: text.clone(),
                }),
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::MissingEmbedding(missing))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::EmbeddingStore;

    fn encoder() -> SyntheticEncoder {
        let mut store = EmbeddingStore::new(3).unwrap();
        store.insert("a", &[1.0, 0.0, 0.0]).unwrap();
        store.insert("b", &[0.0, 1.0, 0.0]).unwrap();
        store.insert("ctx [SEP] c", &[0.0, 0.0, 2.0]).unwrap();
        store.insert("pos", &[0.0, 1.0, 0.0]).unwrap();
        store.insert("neg", &[0.0, 0.0, 1.0]).unwrap();
        SyntheticEncoder::new(Arc::new(store), "[SEP]")
    }

    fn expected(o: [f64; 3], c: [f64; 3]) -> Vec<f64> {
        EmbeddingVector::normalized((0..3).map(|i| 0.7 * o[i] + 0.3 * c[i]).collect()).into_inner()
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn stored_texts_pass_through() {
        assert_eq!(
            encoder().encode("ctx [SEP] c").unwrap().as_slice(),
            &[0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn label_mode_uses_anchor() {
        let v = encoder().encode("a [SEP] [pos 0.5]").unwrap();
        assert!(close(
            v.as_slice(),
            &expected([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        ));
    }

    #[test]
    fn text_mode_uses_neighbor_vector() {
        let v = encoder().encode("a [SEP] [neg 0.5] b").unwrap();
        assert!(close(
            v.as_slice(),
            &expected([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        ));
    }

    #[test]
    fn paired_original_and_multiple_segments() {
        let v = encoder()
            .encode("ctx [SEP] c [SEP] [pos 0.1] a [SEP] [neg 1.9] b")
            .unwrap();
        assert!(close(
            v.as_slice(),
            &expected([0.0, 0.0, 1.0], [0.5, 0.5, 0.0])
        ));
    }

    #[test]
    fn unknown_original_is_missing() {
        let err = encoder().encode("zzz [SEP] [pos 0.5]").unwrap_err();
        assert!(
            matches!(err, Error::MissingEmbedding(ref m) if m[0].text == "zzz [SEP] [pos 0.5]")
        );
        assert!(encoder().encode("plain unknown").is_err());
    }
}
