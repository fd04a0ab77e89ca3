//! Multinomial logistic regression fit by full-batch gradient descent.
//!
//! Minimizes mean softmax cross-entropy plus `(lambda / 2n) * ||W||^2`
//! (biases unpenalized). Each iteration takes a backtracking (Armijo) step
//! whose trial length doubles after every accepted step.

use crate::encoders::{check_dim, EmbeddingVector};
use crate::error::{Error, Result};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;
const MAX_STEP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRegParams {
    pub l2_strength: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            l2_strength: 1.0,
            max_iters: 1000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    num_labels: usize,
    dim: usize,
    /// Row-major `num_labels x dim`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    pub l2_strength: f64,
    pub iterations: usize,
    pub final_gradient_norm: f64,
}

/// The training objective over a flat parameter vector `[W (row-major), b]`.
pub struct LogRegObjective<'a> {
    x: &'a [EmbeddingVector],
    y: &'a [usize],
    num_labels: usize,
    dim: usize,
    l2_strength: f64,
}

fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        sum += *l;
    }
    logits.iter_mut().for_each(|l| *l /= sum);
}

/// Stable `log(sum(exp(logits)))`.
fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

impl<'a> LogRegObjective<'a> {
    pub fn new(
        x: &'a [EmbeddingVector],
        y: &'a [usize],
        num_labels: usize,
        l2_strength: f64,
    ) -> Result<Self> {
        let dim = x
            .first()
            .map(EmbeddingVector::dim)
            .ok_or(Error::EmptyDataset)?;
        if x.len() != y.len() {
            return Err(Error::Config(format!(
                "{} rows but {} labels",
                x.len(),
                y.len()
            )));
        }
        for v in x {
            check_dim(dim, v.dim())?;
        }
        if let Some(&bad) = y.iter().find(|&&l| l >= num_labels) {
            return Err(Error::UnknownLabel { label: bad });
        }
        if l2_strength < 0.0 || !l2_strength.is_finite() {
            return Err(Error::Config(format!("invalid l2 strength {l2_strength}")));
        }
        Ok(Self {
            x,
            y,
            num_labels,
            dim,
            l2_strength,
        })
    }

    pub fn num_params(&self) -> usize {
        self.num_labels * (self.dim + 1)
    }

    fn logits(&self, theta: &[f64], row: &[f64], out: &mut [f64]) {
        let (w, b) = theta.split_at(self.num_labels * self.dim);
        for (c, o) in out.iter_mut().enumerate() {
            let wc = &w[c * self.dim..(c + 1) * self.dim];
            *o = b[c] + wc.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
        }
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        let n = self.x.len() as f64;
        let w = &theta[..self.num_labels * self.dim];
        self.l2_strength / (2.0 * n) * w.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut logits = vec![0.0; self.num_labels];
        let mut total = 0.0;
        for (row, &label) in self.x.iter().zip(self.y) {
            self.logits(theta, row.as_slice(), &mut logits);
            total += log_sum_exp(&logits) - logits[label];
        }
        total / self.x.len() as f64 + self.penalty(theta)
    }

    pub fn value_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let n = self.x.len() as f64;
        let split = self.num_labels * self.dim;
        let mut grad = vec![0.0; theta.len()];
        let mut logits = vec![0.0; self.num_labels];
        let mut total = 0.0;
        for (row, &label) in self.x.iter().zip(self.y) {
            let row = row.as_slice();
            self.logits(theta, row, &mut logits);
            total += log_sum_exp(&logits) - logits[label];
            softmax_in_place(&mut logits);
            logits[label] -= 1.0;
            for (c, &residual) in logits.iter().enumerate() {
                let gw = &mut grad[c * self.dim..(c + 1) * self.dim];
                for (g, &v) in gw.iter_mut().zip(row) {
                    *g += residual * v;
                }
                grad[split + c] += residual;
            }
        }
        grad.iter_mut().for_each(|g| *g /= n);
        let reg = self.l2_strength / n;
        for (g, &w) in grad[..split].iter_mut().zip(&theta[..split]) {
            *g += reg * w;
        }
        (total / n + self.penalty(theta), grad)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn fit_logreg(
    x: &[EmbeddingVector],
    y: &[usize],
    num_labels: usize,
    params: &LogRegParams,
) -> Result<LogRegModel> {
    let objective = LogRegObjective::new(x, y, num_labels, params.l2_strength)?;
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::SingleClass);
    }
    let dim = objective.dim;
    let mut theta = vec![0.0; objective.num_params()];
    let (mut value, mut grad) = objective.value_and_gradient(&theta);
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < params.max_iters {
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss);
        }
        if inf_norm(&grad) < params.tol {
            break;
        }
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = None;
        let mut t = step;
        while t >= MIN_STEP {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(p, g)| p - t * g).collect();
            let trial_value = objective.value(&trial);
            if trial_value <= value - ARMIJO * t * grad_sq {
                accepted = Some((trial, trial_value));
                break;
            }
            t *= 0.5;
        }
        let Some((next, _)) = accepted else {
            // No representable step improves the objective: numerically converged.
            break;
        };
        theta = next;
        (value, grad) = objective.value_and_gradient(&theta);
        step = (t * 2.0).min(MAX_STEP);
        iterations += 1;
    }
    if !value.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    let biases = theta.split_off(num_labels * dim);
    Ok(LogRegModel {
        num_labels,
        dim,
        weights: theta,
        biases,
        l2_strength: params.l2_strength,
        iterations,
        final_gradient_norm: inf_norm(&grad),
    })
}

impl LogRegModel {
    pub fn zeros(num_labels: usize, dim: usize) -> Self {
        Self {
            num_labels,
            dim,
            weights: vec![0.0; num_labels * dim],
            biases: vec![0.0; num_labels],
            l2_strength: 0.0,
            iterations: 0,
            final_gradient_norm: 0.0,
        }
    }

    pub fn from_parts(
        num_labels: usize,
        dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != num_labels * dim || biases.len() != num_labels {
            return Err(Error::DimMismatch {
                expected: num_labels * (dim + 1),
                actual: weights.len() + biases.len(),
            });
        }
        Ok(Self {
            weights,
            biases,
            ..Self::zeros(num_labels, dim)
        })
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn logits(&self, v: &EmbeddingVector) -> Result<Vec<f64>> {
        check_dim(self.dim, v.dim())?;
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .zip(&self.biases)
            .map(|(w, b)| b + w.iter().zip(v.as_slice()).map(|(a, x)| a * x).sum::<f64>())
            .collect())
    }

    /// Softmax class probabilities, one row per input.
    pub fn predict_proba(&self, x: &[EmbeddingVector]) -> Result<Vec<Vec<f64>>> {
        x.iter()
            .map(|v| {
                let mut row = self.logits(v)?;
                softmax_in_place(&mut row);
                Ok(row)
            })
            .collect()
    }

    /// Mean cross-entropy plus penalty for this model on `(x, y)`.
    pub fn objective(&self, x: &[EmbeddingVector], y: &[usize]) -> Result<f64> {
        let objective = LogRegObjective::new(x, y, self.num_labels, self.l2_strength)?;
        let theta: Vec<f64> = self.weights.iter().chain(&self.biases).copied().collect();
        Ok(objective.value(&theta))
    }
}

/// Index of the largest score; ties go to the smaller label.
pub fn argmax(scores: &[f64]) -> usize {
    scores
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bs), (i, &s)| {
            if s > bs {
                (i, s)
            } else {
                (bi, bs)
            }
        })
        .0
}
