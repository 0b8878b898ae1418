//! Ranking metrics over (score, label) lists: AUROC by the
//! Mann-Whitney formulation, AUPRC as average precision with tie
//! groups collapsed, AP@k with index-order tie-breaks, and thresholded
//! accuracy.

use log::warn;

use crate::error::{Error, Result};

fn check_scores(preds: &[(f64, bool)]) -> Result<()> {
    if preds.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::Numerical("non-finite score in predictions".into()));
    }
    Ok(())
}

fn class_counts(preds: &[(f64, bool)]) -> (usize, usize) {
    let pos = preds.iter().filter(|(_, l)| *l).count();
    (pos, preds.len() - pos)
}

/// (#concordant + 0.5 * #tied) / (#pos * #neg), computed via average
/// ranks in O(n log n).
pub fn auroc(preds: &[(f64, bool)]) -> Result<f64> {
    check_scores(preds)?;
    let (pos, neg) = class_counts(preds);
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].0.total_cmp(&preds[b].0));

    // Average ranks over tie groups, ranks starting at 1.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && preds[order[j]].0 == preds[order[i]].0 {
            j += 1;
        }
        let avg_rank = ((i + 1) + j) as f64 / 2.0;
        for &k in &order[i..j] {
            if preds[k].1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Average precision over a descending-score sweep. Equal scores form
/// one threshold group: every positive in a group receives the
/// group-level precision.
pub fn auprc(preds: &[(f64, bool)]) -> Result<f64> {
    check_scores(preds)?;
    let (pos, _) = class_counts(preds);
    if pos == 0 {
        return Err(Error::UndefinedMetric("AUPRC needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].0.total_cmp(&preds[a].0));

    let mut ap = 0.0f64;
    let mut tp = 0usize;
    let mut seen;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut group_tp = 0usize;
        while j < order.len() && preds[order[j]].0 == preds[order[i]].0 {
            group_tp += usize::from(preds[order[j]].1);
            j += 1;
        }
        tp += group_tp;
        seen = j;
        let precision = tp as f64 / seen as f64;
        ap += group_tp as f64 * precision;
        i = j;
    }
    Ok(ap / pos as f64)
}

/// Average precision over the top k ranks; ties broken by input index
/// so the ranking is deterministic. Returns 0 (with a warning) when
/// there are no positives.
pub fn ap_at_k(preds: &[(f64, bool)], k: usize) -> Result<f64> {
    check_scores(preds)?;
    if k == 0 {
        return Err(Error::Contract("ap_at_k requires k >= 1".into()));
    }
    let (pos, _) = class_counts(preds);
    if pos == 0 {
        warn!("AP@{k}: no positives; reporting 0");
        return Ok(0.0);
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].0.total_cmp(&preds[a].0).then(a.cmp(&b)));

    let mut ap = 0.0f64;
    let mut tp = 0usize;
    for (rank0, &idx) in order.iter().take(k).enumerate() {
        if preds[idx].1 {
            tp += 1;
            ap += tp as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(ap / pos.min(k) as f64)
}

/// Fraction of correct thresholded labels; a score exactly at the
/// threshold classifies positive.
pub fn accuracy(preds: &[(f64, bool)], threshold: f64) -> f64 {
    if preds.is_empty() {
        return 0.0;
    }
    let correct = preds
        .iter()
        .filter(|&&(s, l)| (s >= threshold) == l)
        .count();
    correct as f64 / preds.len() as f64
}

/// Unweighted mean over relations with a defined metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroSummary {
    pub mean: f64,
    pub included: usize,
    pub excluded: usize,
}

pub fn macro_average(values: &[Option<f64>]) -> Result<MacroSummary> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric(
            "macro average over zero defined relations".into(),
        ));
    }
    Ok(MacroSummary {
        mean: defined.iter().sum::<f64>() / defined.len() as f64,
        included: defined.len(),
        excluded: values.len() - defined.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_perfect_separation() {
        let preds = [(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(auroc(&preds).unwrap(), 1.0);
    }

    #[test]
    fn auroc_hand_example_three_quarters() {
        // Pairs: (0.9 vs 0.8) ok, (0.9 vs 0.2) ok, (0.3 vs 0.8) wrong,
        // (0.3 vs 0.2) ok -> 3/4.
        let preds = [(0.9, true), (0.8, false), (0.3, true), (0.2, false)];
        assert_eq!(auroc(&preds).unwrap(), 0.75);
    }

    #[test]
    fn auroc_all_tied_is_half() {
        let preds = [(0.5, true), (0.5, false), (0.5, true), (0.5, false)];
        assert_eq!(auroc(&preds).unwrap(), 0.5);
    }

    #[test]
    fn auroc_single_class_undefined() {
        assert!(matches!(
            auroc(&[(0.5, true)]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn auroc_label_flip_complements() {
        let preds = [(0.9, true), (0.7, false), (0.6, true), (0.2, false), (0.1, true)];
        let flipped: Vec<(f64, bool)> = preds.iter().map(|&(s, l)| (s, !l)).collect();
        let total = auroc(&preds).unwrap() + auroc(&flipped).unwrap();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auprc_perfect_ranking_is_one() {
        let preds = [(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(auprc(&preds).unwrap(), 1.0);
    }

    #[test]
    fn auprc_single_positive_second_of_four() {
        let preds = [(0.9, false), (0.8, true), (0.3, false), (0.2, false)];
        assert_eq!(auprc(&preds).unwrap(), 0.5);
    }

    #[test]
    fn auprc_all_positive_is_one() {
        let preds = [(0.9, true), (0.1, true)];
        assert_eq!(auprc(&preds).unwrap(), 1.0);
    }

    #[test]
    fn auprc_zero_positives_undefined() {
        assert!(matches!(
            auprc(&[(0.5, false)]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn ap_at_k_perfect_head() {
        let mut preds = vec![(0.9, true); 5];
        preds.extend(vec![(0.1, false); 5]);
        assert_eq!(ap_at_k(&preds, 3).unwrap(), 1.0);
    }

    #[test]
    fn ap_at_k_single_hit_at_rank_one() {
        let preds = [(0.9, true), (0.5, false), (0.4, false)];
        assert_eq!(ap_at_k(&preds, 50).unwrap(), 1.0);
    }

    #[test]
    fn ap_at_k_hand_example() {
        // Positives at ranks 1 and 3: (1/1 + 2/3) / 2.
        let preds = [(0.9, true), (0.8, false), (0.7, true), (0.1, false)];
        let expected = (1.0 + 2.0 / 3.0) / 2.0;
        assert!((ap_at_k(&preds, 50).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ap_at_k_no_positives_is_zero() {
        assert_eq!(ap_at_k(&[(0.5, false)], 50).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_boundary_classifies_positive() {
        assert_eq!(accuracy(&[(0.5, true)], 0.5), 1.0);
        assert_eq!(accuracy(&[(0.5, false)], 0.5), 0.0);
    }

    #[test]
    fn accuracy_both_wrong() {
        assert_eq!(accuracy(&[(0.4, true), (0.6, false)], 0.5), 0.0);
    }

    #[test]
    fn macro_average_rules() {
        let single = macro_average(&[Some(0.8)]).unwrap();
        assert_eq!(single.mean, 0.8);
        let two = macro_average(&[Some(0.8), Some(0.6)]).unwrap();
        assert!((two.mean - 0.7).abs() < 1e-15);
        let mixed = macro_average(&[Some(0.8), None]).unwrap();
        assert_eq!(mixed.mean, 0.8);
        assert_eq!(mixed.excluded, 1);
        assert!(macro_average(&[None, None]).is_err());
    }
}
