//! Sweep metric implementations against brute-force oracles.

use mmvgae::metrics::{ap_at_k, auprc, auroc};
use proptest::prelude::*;

/// O(n^2) pairwise concordance count.
fn auroc_bruteforce(preds: &[(f64, bool)]) -> f64 {
    let pos: Vec<f64> = preds.iter().filter(|(_, l)| *l).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = preds.iter().filter(|(_, l)| !*l).map(|(s, _)| *s).collect();
    let mut num = 0.0f64;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                num += 1.0;
            } else if p == n {
                num += 0.5;
            }
        }
    }
    num / (pos.len() as f64 * neg.len() as f64)
}

/// All-thresholds average precision: walk every distinct score as a
/// threshold, recompute TP/FP from scratch, accumulate precision *
/// delta-recall.
fn auprc_bruteforce(preds: &[(f64, bool)]) -> f64 {
    let total_pos = preds.iter().filter(|(_, l)| *l).count() as f64;
    let mut thresholds: Vec<f64> = preds.iter().map(|(s, _)| *s).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        let tp = preds.iter().filter(|&&(s, l)| l && s >= t).count() as f64;
        let predicted = preds.iter().filter(|&&(s, _)| s >= t).count() as f64;
        let precision = tp / predicted;
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// Rank-by-rank AP@k with index-order tie-breaks.
fn ap_at_k_bruteforce(preds: &[(f64, bool)], k: usize) -> f64 {
    let total_pos = preds.iter().filter(|(_, l)| *l).count();
    if total_pos == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].0.partial_cmp(&preds[a].0).unwrap().then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut ap = 0.0;
    for (rank0, &i) in order.iter().take(k).enumerate() {
        if preds[i].1 {
            hits += 1;
            ap += hits as f64 / (rank0 + 1) as f64;
        }
    }
    ap / total_pos.min(k) as f64
}

/// Scores drawn from a tiny value set to force heavy ties.
fn preds_strategy(max_len: usize) -> impl Strategy<Value = Vec<(f64, bool)>> {
    prop::collection::vec((0..8u8, any::<bool>()), 2..max_len)
        .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 7.0, l)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn auroc_matches_pair_counting(preds in preds_strategy(30)) {
        let has_pos = preds.iter().any(|(_, l)| *l);
        let has_neg = preds.iter().any(|(_, l)| !*l);
        prop_assume!(has_pos && has_neg);
        let fast = auroc(&preds).unwrap();
        let slow = auroc_bruteforce(&preds);
        // Concordance counting is exact; both routes produce the same
        // rational value up to representation noise.
        prop_assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
    }

    #[test]
    fn auprc_matches_all_thresholds_oracle(preds in preds_strategy(30)) {
        prop_assume!(preds.iter().any(|(_, l)| *l));
        let fast = auprc(&preds).unwrap();
        let slow = auprc_bruteforce(&preds);
        prop_assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
    }

    #[test]
    fn ap_at_k_matches_rank_walk(preds in preds_strategy(30), k in 1usize..40) {
        let fast = ap_at_k(&preds, k).unwrap();
        let slow = ap_at_k_bruteforce(&preds, k);
        prop_assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
    }

    #[test]
    fn auroc_is_invariant_under_monotone_transforms(preds in preds_strategy(25)) {
        let has_pos = preds.iter().any(|(_, l)| *l);
        let has_neg = preds.iter().any(|(_, l)| !*l);
        prop_assume!(has_pos && has_neg);
        let base = auroc(&preds).unwrap();
        let squashed: Vec<(f64, bool)> =
            preds.iter().map(|&(s, l)| ((3.0 * s + 1.0).tanh(), l)).collect();
        let transformed = auroc(&squashed).unwrap();
        prop_assert!((base - transformed).abs() < 1e-12);
    }
}
