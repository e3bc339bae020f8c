//! Error metrics over evaluation sets.

use crate::error::{check_dim, Result};

/// `sqrt(sum_i d_i (pred_i - truth_i)^2)` with `d` normalized to sum 1.
pub fn rmsve(pred: &[f64], truth: &[f64], weights: &[f64]) -> Result<f64> {
    check_dim(truth.len(), pred.len())?;
    check_dim(truth.len(), weights.len())?;
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let s: f64 = pred.iter().zip(truth).zip(weights).map(|((p, t), w)| w * (p - t) * (p - t)).sum();
    Ok((s / total).sqrt())
}

/// Sum over evaluations and GVFs of the RMSVE. `history[t][i]` is the error
/// of GVF `i` at evaluation `t`.
pub fn total_error(history: &[Vec<f64>]) -> f64 {
    history.iter().flatten().sum()
}

/// Total error restricted to the last `fraction` of evaluations (at least
/// one row when the history is nonempty).
pub fn tail_total_error(history: &[Vec<f64>], fraction: f64) -> f64 {
    total_error(&history[tail_start(history.len(), fraction)..])
}

/// First index of the last `fraction` of `n` rows.
pub fn tail_start(n: usize, fraction: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let k = ((n as f64 * fraction).round() as usize).clamp(1, n);
    n - k
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Standard error of a difference of two independent means.
pub fn pooled_se(a: &[f64], b: &[f64]) -> f64 {
    let (_, sa) = mean_se(a);
    let (_, sb) = mean_se(b);
    sa.hypot(sb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmsve_examples() {
        assert_eq!(rmsve(&[1.0, 2.0], &[1.0, 2.0], &[0.5, 0.5]).unwrap(), 0.0);
        let e = rmsve(&[3.0, 4.0], &[0.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((e - 12.5f64.sqrt()).abs() < 1e-12);
        assert!(rmsve(&[1.0], &[1.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn total_error_examples() {
        assert_eq!(total_error(&[vec![0.0, 0.0]]), 0.0);
        assert_eq!(total_error(&[vec![1.0, 2.0], vec![3.0, 4.0]]), 10.0);
        let h = vec![vec![1.0]; 100];
        assert_eq!(tail_total_error(&h, 0.1), 10.0);
    }

    #[test]
    fn standard_errors() {
        let (m, se) = mean_se(&[1.0, 1.0, 1.0]);
        assert_eq!((m, se), (1.0, 0.0));
        let (_, se) = mean_se(&[0.0, 2.0]);
        assert!((se - 1.0).abs() < 1e-12);
        assert!((pooled_se(&[0.0, 2.0], &[0.0, 2.0]) - 2f64.sqrt()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rmsve_is_homogeneous_and_nonnegative(
            errs in prop::collection::vec(-10.0f64..10.0, 1..20),
            c in -5.0f64..5.0,
        ) {
            let n = errs.len();
            let w = vec![1.0; n];
            let zero = vec![0.0; n];
            let scaled: Vec<f64> = errs.iter().map(|e| c * e).collect();
            let a = rmsve(&errs, &zero, &w).unwrap();
            let b = rmsve(&scaled, &zero, &w).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((b - c.abs() * a).abs() <= 1e-9 * (1.0 + a));
        }
    }
}
