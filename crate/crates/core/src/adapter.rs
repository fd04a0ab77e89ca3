//! Contrastive adapter: a square linear map over frozen base embeddings,
//! trained so that same-label pairs have cosine similarity 1 and
//! different-label pairs cosine similarity 0.
//!
//! The loss is the mean over pairs of `(cos(W x_i, W x_j) - target)^2`,
//! minimized by full-batch gradient descent starting from the identity.
//! Summation always runs in ascending pair order, then ascending example
//! order, so a run is bitwise reproducible.

use std::fs;
use std::path::Path;

use crate::data::write_atomic;
use crate::encoders::EmbeddingVector;
use crate::error::{Error, Result};
use crate::rng::{mix64, SplitMix64};

pub const ADAPTER_MAGIC: &[u8; 7] = b"LGNADP1";

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState {
    dim: usize,
    /// Row-major `dim x dim`.
    weights: Vec<f64>,
}

impl AdapterState {
    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        Self { dim, weights }
    }

    pub fn from_row_major(dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != dim * dim {
            return Err(Error::DimMismatch {
                expected: dim * dim,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence("non-finite adapter weight".into()));
        }
        Ok(Self { dim, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_identity(&self) -> bool {
        let d = self.dim;
        self.weights
            .iter()
            .enumerate()
            .all(|(k, &w)| w == if k / d == k % d { 1.0 } else { 0.0 })
    }

    /// `W x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        self.weights
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(11 + 4 * self.weights.len());
        out.extend_from_slice(ADAPTER_MAGIC);
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&(*w as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 11 || &bytes[..7] != ADAPTER_MAGIC {
            return Err(Error::InvalidStore("bad adapter magic".into()));
        }
        let dim = u32::from_le_bytes(bytes[7..11].try_into().expect("4 bytes")) as usize;
        let body = &bytes[11..];
        if body.len() != 4 * dim * dim {
            return Err(Error::InvalidStore(format!(
                "adapter body has {} bytes, expected {}",
                body.len(),
                4 * dim * dim
            )));
        }
        let weights = body
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        Self::from_row_major(dim, weights)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingPair {
    pub i: usize,
    pub j: usize,
    /// 1.0 for a same-label pair, 0.0 otherwise.
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdapterConfig {
    /// Pairs drawn per example; half positive (when possible), half negative.
    pub pairs_per_example: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            pairs_per_example: 20,
            epochs: 10,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

impl AdapterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs_per_example == 0 || !self.pairs_per_example.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "pairs per example must be a positive even number, got {}",
                self.pairs_per_example
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Draws contrastive pairs for every example, in index order.
///
/// Each example gets `R/2` positives (partner drawn uniformly with
/// replacement from the other same-label examples; none if its label is a
/// singleton) followed by `R/2` negatives (drawn from all other-label examples).
pub fn generate_pairs(
    labels: &[usize],
    pairs_per_example: usize,
    rng: &mut SplitMix64,
) -> Result<Vec<TrainingPair>> {
    let Some(&first) = labels.first() else {
        return Err(Error::SingleLabelPairs);
    };
    if labels.iter().all(|&l| l == first) {
        return Err(Error::SingleLabelPairs);
    }
    let num_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_labels];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let others: Vec<Vec<usize>> = (0..num_labels)
        .map(|l| (0..labels.len()).filter(|&i| labels[i] != l).collect())
        .collect();

    let half = pairs_per_example / 2;
    let mut pairs = Vec::with_capacity(labels.len() * pairs_per_example);
    for (i, &label) in labels.iter().enumerate() {
        let same = &members[label];
        if same.len() > 1 {
            for _ in 0..half {
                // Skip over `i` itself: draw among the |same| - 1 partners.
                let mut k = rng.index(same.len() - 1);
                if same[k] >= i {
                    k += 1;
                }
                pairs.push(TrainingPair {
                    i,
                    j: same[k],
                    target: 1.0,
                });
            }
        }
        let negatives = &others[label];
        for _ in 0..half {
            pairs.push(TrainingPair {
                i,
                j: negatives[rng.index(negatives.len())],
                target: 0.0,
            });
        }
    }
    Ok(pairs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_all(weights: &AdapterState, x: &[EmbeddingVector]) -> Vec<Vec<f64>> {
    x.iter().map(|v| weights.apply(v.as_slice())).collect()
}

fn check_inputs(
    weights: &AdapterState,
    x: &[EmbeddingVector],
    pairs: &[TrainingPair],
) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Config("pair loss over an empty pair list".into()));
    }
    for v in x {
        crate::encoders::check_dim(weights.dim(), v.dim())?;
    }
    Ok(())
}

struct PairTerm {
    cos: f64,
    norm_i: f64,
    norm_j: f64,
}

fn pair_term(projected: &[Vec<f64>], pair: &TrainingPair) -> Result<PairTerm> {
    let a = &projected[pair.i];
    let b = &projected[pair.j];
    let norm_i = dot(a, a).sqrt();
    let norm_j = dot(b, b).sqrt();
    if norm_i == 0.0 {
        return Err(Error::DegenerateProjection { index: pair.i });
    }
    if norm_j == 0.0 {
        return Err(Error::DegenerateProjection { index: pair.j });
    }
    Ok(PairTerm {
        cos: dot(a, b) / (norm_i * norm_j),
        norm_i,
        norm_j,
    })
}

/// Mean over pairs of `(cos(W x_i, W x_j) - target)^2`; always in `[0, 4]`.
pub fn pair_loss(
    weights: &AdapterState,
    x: &[EmbeddingVector],
    pairs: &[TrainingPair],
) -> Result<f64> {
    check_inputs(weights, x, pairs)?;
    let projected = project_all(weights, x);
    let mut total = 0.0;
    for pair in pairs {
        let term = pair_term(&projected, pair)?;
        total += (term.cos - pair.target).powi(2);
    }
    Ok(total / pairs.len() as f64)
}

/// Pair loss and its gradient with respect to `W` (row-major).
pub fn pair_loss_gradient(
    weights: &AdapterState,
    x: &[EmbeddingVector],
    pairs: &[TrainingPair],
) -> Result<(f64, Vec<f64>)> {
    check_inputs(weights, x, pairs)?;
    let dim = weights.dim();
    let projected = project_all(weights, x);
    let scale = 1.0 / pairs.len() as f64;

    // Gradient with respect to each projected vector y_k = W x_k.
    let mut grad_y = vec![vec![0.0; dim]; x.len()];
    let mut total = 0.0;
    for pair in pairs {
        let PairTerm {
            cos,
            norm_i,
            norm_j,
        } = pair_term(&projected, pair)?;
        let residual = cos - pair.target;
        total += residual * residual;
        let d_cos = 2.0 * residual * scale;
        let a = &projected[pair.i];
        let b = &projected[pair.j];
        let inv_ab = 1.0 / (norm_i * norm_j);
        let ca = cos / (norm_i * norm_i);
        let cb = cos / (norm_j * norm_j);
        for d in 0..dim {
            let da = b[d] * inv_ab - ca * a[d];
            let db = a[d] * inv_ab - cb * b[d];
            grad_y[pair.i][d] += d_cos * da;
            grad_y[pair.j][d] += d_cos * db;
        }
    }

    // dL/dW = sum_k grad_y[k] x_k^T
    let mut grad = vec![0.0; dim * dim];
    for (gy, xk) in grad_y.iter().zip(x) {
        if gy.iter().all(|&g| g == 0.0) {
            continue;
        }
        for r in 0..dim {
            let g = gy[r];
            let row = &mut grad[r * dim..(r + 1) * dim];
            for (w, &xv) in row.iter_mut().zip(xk.as_slice()) {
                *w += g * xv;
            }
        }
    }
    Ok((total * scale, grad))
}

/// Full-batch gradient descent from the identity over a fixed pair list.
///
/// Returns the final weights together with the per-epoch loss trace (the
/// loss before each update, then the final loss). If the final loss ends
/// above the initial loss the lowest-loss weights seen are returned instead.
pub fn descend(
    x: &[EmbeddingVector],
    pairs: &[TrainingPair],
    epochs: usize,
    learning_rate: f64,
) -> Result<(AdapterState, Vec<f64>)> {
    let dim = x
        .first()
        .map(EmbeddingVector::dim)
        .ok_or(Error::EmptyDataset)?;
    let mut weights = AdapterState::identity(dim);
    let mut trace = Vec::with_capacity(epochs + 1);
    let mut best = (f64::INFINITY, weights.clone());
    for epoch in 0..epochs {
        let (loss, grad) = pair_loss_gradient(&weights, x, pairs)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite loss or gradient at epoch {epoch}"
            )));
        }
        trace.push(loss);
        if loss < best.0 {
            best = (loss, weights.clone());
        }
        for (w, g) in weights.weights.iter_mut().zip(&grad) {
            *w -= learning_rate * g;
        }
    }
    let final_loss = pair_loss(&weights, x, pairs)?;
    if !final_loss.is_finite() || weights.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Divergence(
            "non-finite loss after final update".into(),
        ));
    }
    trace.push(final_loss);
    if final_loss > trace[0] {
        log::debug!(
            "adapter loss rose from {} to {final_loss}; keeping best",
            trace[0]
        );
        return Ok((best.1, trace));
    }
    Ok((weights, trace))
}

/// Trains an adapter on base embeddings `x` with gold `labels`.
///
/// Rows whose base embedding is exactly zero carry no direction and are left
/// out of pair generation.
pub fn train_adapter(
    x: &[EmbeddingVector],
    labels: &[usize],
    config: &AdapterConfig,
) -> Result<AdapterState> {
    train_adapter_traced(x, labels, config).map(|(state, _)| state)
}

pub fn train_adapter_traced(
    x: &[EmbeddingVector],
    labels: &[usize],
    config: &AdapterConfig,
) -> Result<(AdapterState, Vec<f64>)> {
    config.validate()?;
    if x.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} embeddings for {} labels",
            x.len(),
            labels.len()
        )));
    }
    let usable: Vec<usize> = (0..x.len()).filter(|&i| !x[i].is_zero()).collect();
    let usable_labels: Vec<usize> = usable.iter().map(|&i| labels[i]).collect();
    let mut rng = SplitMix64::new(mix64(config.seed));
    let pairs: Vec<TrainingPair> =
        generate_pairs(&usable_labels, config.pairs_per_example, &mut rng)?
            .into_iter()
            .map(|p| TrainingPair {
                i: usable[p.i],
                j: usable[p.j],
                target: p.target,
            })
            .collect();
    if config.epochs == 0 {
        let dim = x[0].dim();
        return Ok((AdapterState::identity(dim), Vec::new()));
    }
    descend(x, &pairs, config.epochs, config.learning_rate)
}
