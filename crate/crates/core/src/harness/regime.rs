//! Label-proportion regimes and cumulative per-step sampling.

use std::fmt;
use std::str::FromStr;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng::{fnv1a64, mix64, SplitMix64};

pub const STEPS: usize = 10;
pub const EXAMPLES_PER_STEP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    Extreme,
    Imbalanced,
    Moderate,
    Balanced,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::Extreme,
        Regime::Imbalanced,
        Regime::Moderate,
        Regime::Balanced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Extreme => "EXTREME",
            Regime::Imbalanced => "IMBALANCED",
            Regime::Moderate => "MODERATE",
            Regime::Balanced => "BALANCED",
        }
    }

    /// Examples per label in every block of 100.
    ///
    /// Ternary balanced is 34/33/33: the spare example goes to label 0.
    pub fn counts(self, num_labels: usize) -> Result<&'static [usize]> {
        let counts: &'static [usize] = match (num_labels, self) {
            (2, Regime::Extreme) => &[98, 2],
            (2, Regime::Imbalanced) => &[90, 10],
            (2, Regime::Moderate) => &[75, 25],
            (2, Regime::Balanced) => &[50, 50],
            (3, Regime::Extreme) => &[95, 2, 3],
            (3, Regime::Imbalanced) => &[80, 5, 15],
            (3, Regime::Moderate) => &[65, 10, 25],
            (3, Regime::Balanced) => &[34, 33, 33],
            _ => {
                return Err(Error::Config(format!(
                    "regimes are defined for 2 or 3 labels, got {num_labels}"
                )))
            }
        };
        Ok(counts)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown regime {s:?}; valid regimes: EXTREME, IMBALANCED, MODERATE, BALANCED"
                ))
            })
    }
}

/// The cumulative training set for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Selected examples, re-indexed `0..n`. The step `t - 1` sample is a
    /// prefix of the step `t` sample.
    pub dataset: LabeledDataset,
    /// Pool id of each selected example.
    pub pool_ids: Vec<usize>,
}

/// Draws the cumulative training set for `step` (1-based) from `pool`.
///
/// Each label's pool rows (ascending id) are partially Fisher-Yates shuffled
/// far enough to cover all steps, with one SplitMix64 stream seeded by
/// `mix64(seed ^ fnv1a64(regime name))` consumed label by label. Step `t`
/// takes the first `count * t` shuffled rows of each label, so selections
/// only ever grow. Within the returned dataset, examples are ordered by the
/// step that added them, then label, then draw order.
pub fn sample_step(
    pool: &LabeledDataset,
    regime: Regime,
    step: usize,
    seed: u64,
) -> Result<Sample> {
    if step == 0 || step > STEPS {
        return Err(Error::Config(format!(
            "step must be in 1..={STEPS}, got {step}"
        )));
    }
    let counts = regime.counts(pool.label_map().len())?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    for example in pool.examples() {
        members[example.label].push(example.id);
    }

    let mut rng = SplitMix64::new(mix64(seed ^ fnv1a64(regime.name().as_bytes())));
    let mut drawn = Vec::with_capacity(counts.len());
    for (label, (rows, &count)) in members.iter_mut().zip(counts).enumerate() {
        let needed = count * step;
        if needed > rows.len() {
            return Err(Error::InsufficientPool {
                label,
                needed,
                available: rows.len(),
            });
        }
        let depth = rows.len().min(count * STEPS);
        for i in 0..depth {
            let j = i + rng.index(rows.len() - i);
            rows.swap(i, j);
        }
        drawn.push(&rows[..depth]);
    }

    let mut pool_ids = Vec::with_capacity(EXAMPLES_PER_STEP * step);
    for s in 0..step {
        for (rows, &count) in drawn.iter().zip(counts) {
            pool_ids.extend_from_slice(&rows[s * count..(s + 1) * count]);
        }
    }
    Ok(Sample {
        dataset: pool.subset(&pool_ids),
        pool_ids,
    })
}
