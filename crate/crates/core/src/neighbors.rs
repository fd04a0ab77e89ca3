//! Exact Euclidean nearest-neighbor search over training embeddings.
//!
//! Results are ordered by ascending distance, ties by ascending row id.
//! Row `i` of an index is example `i` of the dataset it was built from.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::encoders::EmbeddingVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborHit {
    pub id: usize,
    pub distance: f64,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborIndex {
    dim: usize,
    vectors: Vec<EmbeddingVector>,
    labels: Vec<usize>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn by_distance_then_id(a: &NeighborHit, b: &NeighborHit) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.id.cmp(&b.id))
}

impl NeighborIndex {
    pub fn new(vectors: Vec<EmbeddingVector>, labels: Vec<usize>) -> Result<Self> {
        let dim = vectors
            .first()
            .map(EmbeddingVector::dim)
            .ok_or(Error::EmptyIndex)?;
        if vectors.len() != labels.len() {
            return Err(Error::Config(format!(
                "{} vectors but {} labels",
                vectors.len(),
                labels.len()
            )));
        }
        for v in &vectors {
            crate::encoders::check_dim(dim, v.dim())?;
        }
        Ok(Self {
            dim,
            vectors,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn vector(&self, id: usize) -> &EmbeddingVector {
        &self.vectors[id]
    }

    fn hits<'a>(
        &'a self,
        v: &'a EmbeddingVector,
        exclude: Option<usize>,
    ) -> impl Iterator<Item = NeighborHit> + 'a {
        self.vectors
            .iter()
            .zip(&self.labels)
            .enumerate()
            .filter(move |(id, _)| Some(*id) != exclude)
            .map(move |(id, (row, &label))| NeighborHit {
                id,
                distance: euclidean(row.as_slice(), v.as_slice()),
                label,
            })
    }

    /// The `k` nearest rows to `v`, optionally skipping row `exclude`.
    pub fn query(
        &self,
        v: &EmbeddingVector,
        k: usize,
        exclude: Option<usize>,
    ) -> Result<Vec<NeighborHit>> {
        crate::encoders::check_dim(self.dim, v.dim())?;
        let available = self.len() - usize::from(exclude.is_some_and(|e| e < self.len()));
        if k == 0 || k > available {
            return Err(Error::KTooLarge { k, available });
        }
        let mut hits: Vec<NeighborHit> = self.hits(v, exclude).collect();
        if k < hits.len() {
            hits.select_nth_unstable_by(k - 1, by_distance_then_id);
            hits.truncate(k);
        }
        hits.sort_by(by_distance_then_id);
        Ok(hits)
    }

    /// The single nearest row of every label that has an eligible row.
    pub fn nearest_per_label(
        &self,
        v: &EmbeddingVector,
        exclude: Option<usize>,
    ) -> Result<BTreeMap<usize, NeighborHit>> {
        crate::encoders::check_dim(self.dim, v.dim())?;
        let mut best: BTreeMap<usize, NeighborHit> = BTreeMap::new();
        for hit in self.hits(v, exclude) {
            best.entry(hit.label)
                .and_modify(|cur| {
                    if by_distance_then_id(&hit, cur) == Ordering::Less {
                        *cur = hit;
                    }
                })
                .or_insert(hit);
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::from_raw(v.to_vec())
    }

    fn two_rows() -> NeighborIndex {
        NeighborIndex::new(vec![raw(&[1.0, 0.0]), raw(&[0.0, 1.0])], vec![0, 1]).unwrap()
    }

    #[test]
    fn exact_match() {
        let hits = two_rows().query(&raw(&[1.0, 0.0]), 1, None).unwrap();
        assert_eq!(
            hits,
            vec![NeighborHit {
                id: 0,
                distance: 0.0,
                label: 0
            }]
        );
    }

    #[test]
    fn exclusion_skips_self() {
        let hits = two_rows().query(&raw(&[1.0, 0.0]), 1, Some(0)).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].id, 1);
        assert!((hits[0].distance - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ties_break_by_id() {
        let mut rows = vec![raw(&[5.0, 5.0]); 10];
        rows[3] = raw(&[0.5, 0.0]);
        rows[7] = raw(&[0.5, 0.0]);
        let index = NeighborIndex::new(rows, vec![0; 10]).unwrap();
        let hits = index.query(&raw(&[0.0, 0.0]), 2, None).unwrap();
        assert_eq!(hits.iter().map(|h| h.id).collect::<Vec<_>>(), [3, 7]);
    }

    #[test]
    fn errors() {
        let index = two_rows();
        assert!(matches!(
            index.query(&raw(&[1.0, 0.0]), 2, Some(0)),
            Err(Error::KTooLarge { k: 2, available: 1 })
        ));
        assert!(matches!(
            index.query(&raw(&[1.0, 0.0, 0.0]), 1, None),
            Err(Error::DimMismatch { .. })
        ));
        assert!(index.nearest_per_label(&raw(&[1.0]), None).is_err());
        assert!(NeighborIndex::new(vec![], vec![]).is_err());
    }

    #[test]
    fn per_label_minimum() {
        let index = NeighborIndex::new(
            vec![
                raw(&[0.0, 0.0]),
                raw(&[1.0, 0.0]),
                raw(&[0.0, 3.0]),
                raw(&[0.0, 2.0]),
            ],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let best = index.nearest_per_label(&raw(&[10.0, 10.0]), None).unwrap();
        assert_eq!(best.len(), 2);
        assert_eq!(best[&0].id, 1);
        assert_eq!(best[&1].id, 2);

        let best = index.nearest_per_label(&raw(&[0.0, 0.0]), None).unwrap();
        assert_eq!(best[&0].distance, 0.0);
    }

    #[test]
    fn exclusion_can_empty_a_class() {
        let index =
            NeighborIndex::new(vec![raw(&[0.0]), raw(&[1.0]), raw(&[2.0])], vec![0, 0, 1]).unwrap();
        let best = index.nearest_per_label(&raw(&[2.0]), Some(2)).unwrap();
        assert_eq!(best.keys().copied().collect::<Vec<_>>(), [0]);
    }
}
