//! Classification heads fit on (possibly decorated) embeddings.

mod knn;
mod logreg;

pub use knn::{knn_predict, KnnHeadModel, KnnPrediction};
pub use logreg::{argmax, fit_logreg, LogRegModel, LogRegObjective, LogRegParams};

use crate::encoders::EmbeddingVector;
use crate::error::Result;

/// Neighbors consulted by the kNN baseline head.
pub const KNN_HEAD_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    LogReg(LogRegModel),
    Knn(KnnHeadModel),
}

/// Per-row label scores plus the predicted label.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub scores: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl Head {
    pub fn score(&self, x: &[EmbeddingVector]) -> Result<Scored> {
        match self {
            Head::LogReg(model) => {
                let scores = model.predict_proba(x)?;
                let labels = scores.iter().map(|row| argmax(row)).collect();
                Ok(Scored { scores, labels })
            }
            Head::Knn(model) => {
                let mut scores = Vec::with_capacity(x.len());
                let mut labels = Vec::with_capacity(x.len());
                for v in x {
                    let p = knn_predict(model, v)?;
                    labels.push(p.label);
                    scores.push(p.scores);
                }
                Ok(Scored { scores, labels })
            }
        }
    }
}
