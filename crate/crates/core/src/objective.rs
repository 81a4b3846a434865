//! Cross-entropy losses over hard and soft targets, their weighted
//! combination, and the analytic gradient at the logits.
//!
//! Probabilities are clamped below at [`LOG_CLAMP`] before any logarithm, so
//! losses stay finite and nonnegative even for degenerate predictions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::ROW_SUM_TOL;

/// Floor applied to probabilities before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// A combined loss split into its hard and soft components (all in nats).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_hard: f64,
    pub l_soft: f64,
    pub l_total: f64,
    pub alpha: f64,
}

fn check_class(p_len: usize, y: usize) -> Result<()> {
    if y >= p_len {
        return Err(Error::InvalidArgument(format!("class {y} out of range for {p_len} classes")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must be in [0,1], got {alpha}")));
    }
    Ok(())
}

#[inline]
fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_CLAMP).ln()
}

/// Cross-entropy against the one-hot target for class `y`: `-log p[y]`.
pub fn loss_hard(p: &[f64], y: usize) -> Result<f64> {
    check_class(p.len(), y)?;
    debug_assert!((p.iter().sum::<f64>() - 1.0).abs() < ROW_SUM_TOL);
    Ok(-clamped_ln(p[y]))
}

/// Cross-entropy against an arbitrary target distribution:
/// `-sum_k s_row[k] * log p[k]`.
pub fn loss_soft(p: &[f64], s_row: &[f64]) -> Result<f64> {
    if p.len() != s_row.len() {
        return Err(Error::Shape(format!(
            "probability length {} vs target length {}",
            p.len(),
            s_row.len()
        )));
    }
    debug_assert!((p.iter().sum::<f64>() - 1.0).abs() < ROW_SUM_TOL);
    let mut acc = 0.0;
    for (&pk, &sk) in p.iter().zip(s_row.iter()) {
        acc -= sk * clamped_ln(pk);
    }
    Ok(acc)
}

/// Weighted combination `alpha * hard + (1 - alpha) * soft`. By linearity it
/// equals the cross-entropy against the mixed target
/// `alpha * one_hot(y) + (1 - alpha) * s_row`.
pub fn loss_combined(p: &[f64], y: usize, s_row: &[f64], alpha: f64) -> Result<LossBreakdown> {
    check_alpha(alpha)?;
    let l_hard = loss_hard(p, y)?;
    let l_soft = loss_soft(p, s_row)?;
    Ok(LossBreakdown { l_hard, l_soft, l_total: alpha * l_hard + (1.0 - alpha) * l_soft, alpha })
}

/// Gradient of the combined loss with respect to the logits, given that `p`
/// is the softmax of those logits: `p - (alpha * one_hot(y) + (1-alpha) * s_row)`.
/// Entries always sum to zero (within rounding).
pub fn grad_logits(p: &[f64], y: usize, s_row: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_class(p.len(), y)?;
    if p.len() != s_row.len() {
        return Err(Error::Shape(format!(
            "probability length {} vs target length {}",
            p.len(),
            s_row.len()
        )));
    }
    let mut g: Vec<f64> =
        p.iter().zip(s_row.iter()).map(|(&pk, &sk)| pk - (1.0 - alpha) * sk).collect();
    g[y] -= alpha;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{effective_target, SoftLabelMatrix, TargetStrategy};
    use crate::ndkernel::{softmax_rows, Mat};
    use crate::rng::Rng;
    use proptest::prelude::*;

    const LN_4: f64 = 1.3862943611198906;

    #[test]
    fn loss_hard_perfect_prediction_is_zero() {
        assert_eq!(loss_hard(&[0.0, 1.0, 0.0], 1).unwrap(), -0.0f64.max(0.0));
        assert!(loss_hard(&[0.0, 1.0, 0.0], 1).unwrap().abs() < 1e-15);
    }

    #[test]
    fn loss_hard_uniform_is_ln_k() {
        for y in 0..4 {
            let l = loss_hard(&[0.25; 4], y).unwrap();
            assert!((l - LN_4).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_hard_calculator_example() {
        let l = loss_hard(&[0.1, 0.6, 0.3], 1).unwrap();
        let expected = -0.6f64.ln(); // 0.5108256237659907
        assert!((l - expected).abs() < 1e-15);
        assert!((l - 0.5108256237659907).abs() < 1e-15);
    }

    #[test]
    fn loss_hard_rejects_bad_class() {
        assert!(loss_hard(&[0.5, 0.5], 2).is_err());
    }

    #[test]
    fn loss_soft_one_hot_reduces_to_hard() {
        let p = [0.2, 0.5, 0.3];
        let s = [0.0, 1.0, 0.0];
        assert_eq!(loss_soft(&p, &s).unwrap(), loss_hard(&p, 1).unwrap());
    }

    #[test]
    fn loss_soft_at_match_is_entropy() {
        let p = [0.25; 4];
        let l = loss_soft(&p, &p).unwrap();
        assert!((l - LN_4).abs() < 1e-12);
    }

    #[test]
    fn loss_soft_calculator_example() {
        let l = loss_soft(&[0.1, 0.6, 0.3], &[0.2, 0.5, 0.3]).unwrap();
        let expected = -(0.2 * 0.1f64.ln() + 0.5 * 0.6f64.ln() + 0.3 * 0.3f64.ln());
        assert!((l - expected).abs() < 1e-15);
        assert!((l - 1.0771216717795853).abs() < 1e-12);
    }

    #[test]
    fn loss_soft_rejects_length_mismatch() {
        assert!(loss_soft(&[0.5, 0.5], &[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn loss_combined_degenerate_mixes() {
        let p = [0.1, 0.6, 0.3];
        let s = [0.2, 0.5, 0.3];
        let at_one = loss_combined(&p, 1, &s, 1.0).unwrap();
        assert_eq!(at_one.l_total, at_one.l_hard);
        let at_zero = loss_combined(&p, 1, &s, 0.0).unwrap();
        assert_eq!(at_zero.l_total, at_zero.l_soft);
    }

    #[test]
    fn loss_combined_arithmetic_example() {
        let b = loss_combined(&[0.1, 0.6, 0.3], 1, &[0.2, 0.5, 0.3], 0.5).unwrap();
        let expected = 0.5 * 0.5108256237659907 + 0.5 * 1.0771216717795853;
        assert!((b.l_total - expected).abs() < 1e-12);
        assert!((b.l_total - 0.793973647772788).abs() < 1e-12);
    }

    #[test]
    fn loss_combined_rejects_bad_alpha() {
        assert!(loss_combined(&[0.5, 0.5], 0, &[0.5, 0.5], 1.5).is_err());
        assert!(loss_combined(&[0.5, 0.5], 0, &[0.5, 0.5], -0.1).is_err());
    }

    #[test]
    fn grad_zero_at_stationary_point() {
        // p equals the mixed target -> gradient identically zero.
        let s = [0.1, 0.7, 0.2];
        let alpha = 0.4;
        let y = 1;
        let mut p: Vec<f64> = s.iter().map(|&sv| (1.0 - alpha) * sv).collect();
        p[y] += alpha;
        let g = grad_logits(&p, y, &s, alpha).unwrap();
        for v in g {
            assert!(v.abs() < 1e-15);
        }
    }

    fn random_distribution(rng: &mut Rng, k: usize) -> Vec<f64> {
        let mut p: Vec<f64> = (0..k).map(|_| rng.next_f64() + 1e-3).collect();
        let total: f64 = p.iter().sum();
        for v in p.iter_mut() {
            *v /= total;
        }
        p
    }

    #[test]
    fn grad_matches_finite_differences_on_logits() {
        let mut rng = Rng::seed_from(31);
        let h = 1e-6;
        for _ in 0..100 {
            let k = 3 + rng.next_below(5);
            let logits: Vec<f64> = (0..k).map(|_| rng.next_gaussian() * 2.0).collect();
            let s = random_distribution(&mut rng, k);
            let y = rng.next_below(k);
            let alpha = rng.next_f64();

            let probs = softmax_rows(&Mat::from_vec(1, k, logits.clone()).unwrap());
            let analytic = grad_logits(probs.row(0), y, &s, alpha).unwrap();

            for j in 0..k {
                let mut plus = logits.clone();
                plus[j] += h;
                let mut minus = logits.clone();
                minus[j] -= h;
                let lp = loss_combined(
                    softmax_rows(&Mat::from_vec(1, k, plus).unwrap()).row(0),
                    y,
                    &s,
                    alpha,
                )
                .unwrap()
                .l_total;
                let lm = loss_combined(
                    softmax_rows(&Mat::from_vec(1, k, minus).unwrap()).row(0),
                    y,
                    &s,
                    alpha,
                )
                .unwrap()
                .l_total;
                let fd = (lp - lm) / (2.0 * h);
                let denom = analytic[j].abs().max(1e-8);
                assert!(
                    (analytic[j] - fd).abs() / denom < 1e-6 || (analytic[j] - fd).abs() < 1e-9,
                    "coord {j}: analytic {} vs fd {fd}",
                    analytic[j]
                );
            }
        }
    }

    proptest! {
        #[test]
        fn linearity_identity(seed in 0..2000u64) {
            let mut rng = Rng::seed_from(seed);
            let k = 2 + rng.next_below(6);
            let p = random_distribution(&mut rng, k);
            let s = random_distribution(&mut rng, k);
            let y = rng.next_below(k);
            let alpha = rng.next_f64();

            let combined = loss_combined(&p, y, &s, alpha).unwrap().l_total;
            let mut mixed: Vec<f64> = s.iter().map(|&sv| (1.0 - alpha) * sv).collect();
            mixed[y] += alpha;
            let direct = loss_soft(&p, &mixed).unwrap();
            prop_assert!((combined - direct).abs() < 1e-12, "{} vs {}", combined, direct);
        }

        #[test]
        fn grad_sums_to_zero(seed in 0..2000u64) {
            let mut rng = Rng::seed_from(seed);
            let k = 2 + rng.next_below(6);
            let p = random_distribution(&mut rng, k);
            let s = random_distribution(&mut rng, k);
            let y = rng.next_below(k);
            let alpha = rng.next_f64();
            let g = grad_logits(&p, y, &s, alpha).unwrap();
            let sum: f64 = g.iter().sum();
            prop_assert!(sum.abs() < 1e-12, "gradient sum {}", sum);
        }

        #[test]
        fn losses_nonnegative(seed in 0..2000u64) {
            let mut rng = Rng::seed_from(seed);
            let k = 2 + rng.next_below(6);
            let p = random_distribution(&mut rng, k);
            let s = random_distribution(&mut rng, k);
            let y = rng.next_below(k);
            let alpha = rng.next_f64();
            let b = loss_combined(&p, y, &s, alpha).unwrap();
            prop_assert!(b.l_hard >= 0.0 && b.l_soft >= 0.0 && b.l_total >= 0.0);
            prop_assert!((b.l_total - (b.alpha * b.l_hard + (1.0 - b.alpha) * b.l_soft)).abs() < 1e-12);
        }
    }

    #[test]
    fn ols_target_loss_equals_combined_loss() {
        // The mixed target built by the labeling module gives the same loss
        // as the two-term combination.
        let s = SoftLabelMatrix::init_uniform(4).unwrap();
        let mut rng = Rng::seed_from(77);
        for _ in 0..50 {
            let p = random_distribution(&mut rng, 4);
            let y = rng.next_below(4);
            let alpha = rng.next_f64();
            let target =
                effective_target(TargetStrategy::ols(alpha).unwrap(), Some(&s), y, 4).unwrap();
            let via_target = loss_soft(&p, &target).unwrap();
            let via_combo = loss_combined(&p, y, s.row(y), alpha).unwrap().l_total;
            assert!((via_target - via_combo).abs() < 1e-12);
        }
    }
}
