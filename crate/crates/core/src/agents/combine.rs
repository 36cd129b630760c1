//! Magnitude-normalized combination of loss terms.

use super::AgentError;
use crate::nn::ParamTree;

/// One loss with its parameter gradient and a mixing weight.
pub struct LossTerm<'a> {
    pub value: f64,
    pub grads: &'a ParamTree,
    pub weight: f64,
}

/// Combines losses as `sum_i w_i * L_i / |detach(L_i)|`.
///
/// Each term is divided by its own magnitude treated as a constant, so every
/// summand contributes gradients of comparable scale no matter how the raw
/// losses differ; scaling any single term by a positive constant leaves the
/// combination unchanged. Terms with `|L| < 1e-12` pass through unnormalized
/// rather than dividing by zero. All gradient trees must share one leaf set.
pub fn normalize_and_combine(terms: &[LossTerm<'_>]) -> Result<(f64, ParamTree), AgentError> {
    let first = terms
        .first()
        .ok_or_else(|| AgentError::BadConfig("no loss terms to combine".into()))?;
    let mut grads = first.grads.zeros_like();
    let mut value = 0.0;
    for term in terms {
        let scale = if term.value.abs() < 1e-12 { 1.0 } else { term.value.abs().recip() };
        value += term.weight * term.value * scale;
        grads.add_scaled(term.grads, term.weight * scale)?;
    }
    Ok((value, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mat;

    fn tree(vals: &[f64]) -> ParamTree {
        let mut t = ParamTree::new();
        t.insert("w", Mat::row_vector(vals.to_vec()));
        t
    }

    #[test]
    fn positive_losses_combine_to_the_weight_sum() {
        let ga = tree(&[1.0, 2.0]);
        let gb = tree(&[-4.0, 0.5]);
        let (value, grads) = normalize_and_combine(&[
            LossTerm { value: 3.7, grads: &ga, weight: 1.0 },
            LossTerm { value: 120.0, grads: &gb, weight: 0.25 },
        ])
        .unwrap();
        assert!((value - 1.25).abs() < 1e-12);
        let w = grads.get("w").unwrap();
        assert!((w.at(0, 0) - (1.0 / 3.7 + 0.25 * -4.0 / 120.0)).abs() < 1e-12);
    }

    #[test]
    fn rescaling_a_term_does_not_move_the_combination() {
        let ga = tree(&[1.0, -2.0]);
        let ga_big = tree(&[1000.0, -2000.0]);
        let gb = tree(&[0.3, 0.3]);
        let (v1, g1) = normalize_and_combine(&[
            LossTerm { value: 0.5, grads: &ga, weight: 1.0 },
            LossTerm { value: 2.0, grads: &gb, weight: 2.0 },
        ])
        .unwrap();
        let (v2, g2) = normalize_and_combine(&[
            LossTerm { value: 500.0, grads: &ga_big, weight: 1.0 },
            LossTerm { value: 2.0, grads: &gb, weight: 2.0 },
        ])
        .unwrap();
        assert!((v1 - v2).abs() < 1e-12);
        let (a, b) = (g1.get("w").unwrap(), g2.get("w").unwrap());
        for c in 0..2 {
            assert!((a.at(0, c) - b.at(0, c)).abs() < 1e-12 * a.at(0, c).abs().max(1.0));
        }
    }

    #[test]
    fn negligible_losses_pass_through_raw() {
        let ga = tree(&[5.0]);
        let (value, grads) =
            normalize_and_combine(&[LossTerm { value: 1e-15, grads: &ga, weight: 2.0 }]).unwrap();
        assert!((value - 2e-15).abs() < 1e-20);
        assert!((grads.get("w").unwrap().at(0, 0) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_leaf_sets_are_rejected() {
        let ga = tree(&[1.0]);
        let mut gb = ParamTree::new();
        gb.insert("other", Mat::row_vector(vec![1.0]));
        let out = normalize_and_combine(&[
            LossTerm { value: 1.0, grads: &ga, weight: 1.0 },
            LossTerm { value: 1.0, grads: &gb, weight: 1.0 },
        ]);
        assert!(out.is_err());
    }
}
