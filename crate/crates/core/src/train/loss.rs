//! Loss assembly on the tape.
//!
//! The reconstruction term is standard binary cross-entropy computed
//! on logits (softplus form), one mean over positives plus one mean
//! over sampled negatives per relation. The KL term is added with
//! positive sign to the minimized objective.

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::tensor::{NodeId, Tape};

/// -mean(log p(pos)) - mean(log(1 - p(neg))) with p = sigmoid(logit),
/// computed as mean(softplus(-pos)) + mean(softplus(neg)).
pub fn link_loss<S: Scalar>(
    tape: &mut Tape<S>,
    pos_logits: NodeId,
    neg_logits: NodeId,
) -> Result<NodeId> {
    if tape.value(pos_logits).is_empty() || tape.value(neg_logits).is_empty() {
        return Err(Error::Contract("link_loss over an empty batch".into()));
    }
    let neg_pos = tape.scalar_mul(pos_logits, -S::one())?;
    let pos_term = tape.softplus(neg_pos)?;
    let pos_term = tape.mean(pos_term)?;
    let neg_term = tape.softplus(neg_logits)?;
    let neg_term = tape.mean(neg_term)?;
    tape.add(pos_term, neg_term)
}

/// Sum of squared residuals between predicted and true edge weights.
pub fn squared_error_sum<S: Scalar>(
    tape: &mut Tape<S>,
    pred: NodeId,
    truth: NodeId,
) -> Result<NodeId> {
    let diff = tape.sub(pred, truth)?;
    let sq = tape.square(diff)?;
    tape.sum(sq)
}

/// Sum of 1x1 loss terms; at least one term required.
pub fn sum_terms<S: Scalar>(tape: &mut Tape<S>, terms: &[NodeId]) -> Result<NodeId> {
    let mut iter = terms.iter();
    let Some(&first) = iter.next() else {
        return Err(Error::Contract("loss with no terms".into()));
    };
    let mut acc = first;
    for &t in iter {
        acc = tape.add(acc, t)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::kl_to_standard_normal;
    use crate::tensor::DenseMatrix;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DenseMatrix<f64> {
        DenseMatrix::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    fn loss_value(pos: &[f64], neg: &[f64]) -> f64 {
        let mut tape = Tape::new();
        let p = tape.constant(m(pos.len(), 1, pos));
        let n = tape.constant(m(neg.len(), 1, neg));
        let l = link_loss(&mut tape, p, n).unwrap();
        tape.value(l).get(0, 0)
    }

    #[test]
    fn saturated_logits_give_negligible_loss() {
        assert!(loss_value(&[40.0, 40.0], &[-40.0]) < 1e-12);
    }

    #[test]
    fn zero_logits_give_two_ln_two() {
        let loss = loss_value(&[0.0, 0.0], &[0.0]);
        assert!((loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn hand_example_p08_n04() {
        // p(pos) = 0.8, p(neg) = 0.4: loss = -ln 0.8 - ln 0.6.
        let pos_logit = (0.8f64 / 0.2).ln();
        let neg_logit = (0.4f64 / 0.6).ln();
        let expected = -(0.8f64.ln()) - (0.6f64.ln());
        assert!((loss_value(&[pos_logit], &[neg_logit]) - expected).abs() < 1e-12);
        assert!((expected - 0.7340).abs() < 1e-4);
    }

    #[test]
    fn empty_batch_is_a_contract_violation() {
        let mut tape = Tape::new();
        let p = tape.constant(DenseMatrix::<f64>::zeros(0, 1));
        let n = tape.constant(m(1, 1, &[0.0]));
        assert!(link_loss(&mut tape, p, n).is_err());
    }

    #[test]
    fn eq1_lambda_zero_is_pure_link_loss() {
        let mut tape = Tape::new();
        let p = tape.constant(m(1, 1, &[0.0]));
        let n = tape.constant(m(1, 1, &[0.0]));
        let link = link_loss(&mut tape, p, n).unwrap();
        let mu = tape.var(m(2, 2, &[1.0, -1.0, 0.5, 2.0]));
        let ls = tape.var(m(2, 2, &[0.1, -0.2, 0.0, 0.3]));
        let kl = kl_to_standard_normal(&mut tape, mu, ls).unwrap();
        let weighted = tape.scalar_mul(kl, 0.0).unwrap();
        let total = sum_terms(&mut tape, &[link, weighted]).unwrap();
        assert_eq!(tape.value(total).get(0, 0), tape.value(link).get(0, 0));
        // And the KL contributes exactly zero gradient.
        let grads = tape.backward(total).unwrap();
        assert!(grads.get(mu).unwrap().data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn eq1_weighted_kl_arithmetic() {
        // Zero link loss, KL = 2, lambda = 0.9 -> 1.8.
        let mut tape = Tape::<f64>::new();
        let zero = tape.constant(DenseMatrix::scalar(0.0));
        let kl = tape.constant(DenseMatrix::scalar(2.0));
        let weighted = tape.scalar_mul(kl, 0.9).unwrap();
        let total = sum_terms(&mut tape, &[zero, weighted]).unwrap();
        assert!((tape.value(total).get(0, 0) - 1.8).abs() < 1e-15);
    }

    #[test]
    fn increasing_kl_increases_total() {
        let totals: Vec<f64> = [1.0, 2.0, 3.0]
            .iter()
            .map(|&klv| {
                let mut tape = Tape::<f64>::new();
                let link = tape.constant(DenseMatrix::scalar(0.25));
                let kl = tape.constant(DenseMatrix::scalar(klv));
                let weighted = tape.scalar_mul(kl, 0.9).unwrap();
                let total = sum_terms(&mut tape, &[link, weighted]).unwrap();
                tape.value(total).get(0, 0)
            })
            .collect();
        assert!(totals[0] < totals[1] && totals[1] < totals[2]);
    }

    #[test]
    fn eq2_zero_residual_leaves_only_kl() {
        let mut tape = Tape::new();
        let pred = tape.constant(m(3, 1, &[1.0, 2.0, 3.0]));
        let truth = tape.constant(m(3, 1, &[1.0, 2.0, 3.0]));
        let sq = squared_error_sum(&mut tape, pred, truth).unwrap();
        assert_eq!(tape.value(sq).get(0, 0), 0.0);
    }

    #[test]
    fn eq2_single_edge_square() {
        let mut tape = Tape::new();
        let pred = tape.constant(m(1, 1, &[3.0]));
        let truth = tape.constant(m(1, 1, &[1.0]));
        let sq = squared_error_sum(&mut tape, pred, truth).unwrap();
        assert_eq!(tape.value(sq).get(0, 0), 4.0);
    }

    #[test]
    fn eq2_matches_straight_line_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::SeedFan::new(8).stream("eq2");
        let pred: Vec<f64> = (0..64).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let truth: Vec<f64> = (0..64).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let expected: f64 = pred.iter().zip(&truth).map(|(p, t)| (p - t) * (p - t)).sum();
        let mut tape = Tape::new();
        let p = tape.constant(m(64, 1, &pred));
        let t = tape.constant(m(64, 1, &truth));
        let sq = squared_error_sum(&mut tape, p, t).unwrap();
        assert!((tape.value(sq).get(0, 0) - expected).abs() < 1e-12);
    }
}
