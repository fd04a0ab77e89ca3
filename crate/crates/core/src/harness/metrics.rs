use crate::error::{Error, Result};

/// Average precision of a binary ranking (positive class = 1).
///
/// Scores are ranked descending; equal scores keep their input order.
pub fn average_precision(scores: &[f64], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::NonBinaryLabel(bad));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// Unweighted mean of per-class F1 over classes `0..num_labels`.
///
/// A class that is neither predicted nor present contributes 0.
pub fn macro_f1(predictions: &[usize], gold: &[usize], num_labels: usize) -> f64 {
    assert_eq!(
        predictions.len(),
        gold.len(),
        "prediction/gold length mismatch"
    );
    let mut tp = vec![0usize; num_labels];
    let mut fp = vec![0usize; num_labels];
    let mut fn_ = vec![0usize; num_labels];
    for (&p, &g) in predictions.iter().zip(gold) {
        if p == g {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[g] += 1;
        }
    }
    let total: f64 = (0..num_labels)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    total / num_labels as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_ranking() {
        assert_eq!(
            average_precision(&[0.9, 0.8, 0.1, 0.0], &[1, 1, 0, 0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn single_positive_at_rank_two() {
        assert_eq!(average_precision(&[0.9, 0.8], &[0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn ties_keep_input_order() {
        assert_eq!(average_precision(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert_eq!(average_precision(&[0.5, 0.5], &[1, 0]).unwrap(), 1.0);
    }

    #[test]
    fn ap_errors() {
        assert!(matches!(
            average_precision(&[0.1], &[0]),
            Err(Error::NoPositives)
        ));
        assert!(matches!(
            average_precision(&[0.1], &[2]),
            Err(Error::NonBinaryLabel(2))
        ));
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2], 3), 1.0);
        // F1_0 = 2*2 / (2*2 + 2) = 2/3, F1_1 = 0.
        assert!((macro_f1(&[0, 0, 0, 0], &[0, 0, 1, 1], 2) - 1.0 / 3.0).abs() < 1e-15);
        // Absent, unpredicted class 2 counts as zero.
        assert!((macro_f1(&[0, 1], &[0, 1], 3) - 2.0 / 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn ap_invariant_under_monotone_transform(
            rows in proptest::collection::vec((0.0f64..1.0, 0usize..2), 1..60)
        ) {
            let scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let mut labels: Vec<usize> = rows.iter().map(|r| r.1).collect();
            labels[0] = 1;
            let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            let a = average_precision(&scores, &labels).unwrap();
            let b = average_precision(&transformed, &labels).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }
}
