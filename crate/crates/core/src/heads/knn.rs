use crate::encoders::EmbeddingVector;
use crate::error::{Error, Result};
use crate::neighbors::NeighborIndex;

/// Majority vote among the `k` nearest stored embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnHeadModel {
    index: NeighborIndex,
    k: usize,
    num_labels: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnPrediction {
    pub label: usize,
    /// Vote fraction per label id.
    pub scores: Vec<f64>,
}

impl KnnHeadModel {
    pub fn new(index: NeighborIndex, k: usize, num_labels: usize) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::EmptyModel);
        }
        if k == 0 || k > index.len() {
            return Err(Error::KTooLarge {
                k,
                available: index.len(),
            });
        }
        Ok(Self {
            index,
            k,
            num_labels,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// Predicts by vote; ties go to the smaller summed distance, then the smaller label.
pub fn knn_predict(model: &KnnHeadModel, v: &EmbeddingVector) -> Result<KnnPrediction> {
    let hits = model.index.query(v, model.k, None)?;
    let mut votes = vec![0usize; model.num_labels];
    let mut dist = vec![0.0; model.num_labels];
    for hit in &hits {
        votes[hit.label] += 1;
        dist[hit.label] += hit.distance;
    }
    let mut label = 0;
    for c in 1..model.num_labels {
        let better = votes[c] > votes[label] || (votes[c] == votes[label] && dist[c] < dist[label]);
        if better {
            label = c;
        }
    }
    let k = hits.len() as f64;
    Ok(KnnPrediction {
        label,
        scores: votes.iter().map(|&v| v as f64 / k).collect(),
    })
}
