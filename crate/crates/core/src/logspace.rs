//! Log-space primitives: log-sum-exp and categorical sampling from log weights.

use rand::Rng;

use crate::error::{Error, Result};

/// `log(sum_i exp(v_i))` with the max-shift trick. Entries at `-inf` are
/// skipped; an all-`-inf` (or empty) input yields `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| (v - max).exp())
        .sum();
    max + sum.ln()
}

/// Draws an index with probability proportional to `exp(logw[i])`.
///
/// Invariant under adding a constant to all entries. Fails with
/// [`Error::DegenerateSelection`] when every entry is `-inf`; callers treat
/// that as a rejected step.
pub fn categorical_from_log_weights<R: Rng + ?Sized>(logw: &[f64], rng: &mut R) -> Result<usize> {
    let norm = log_sum_exp(logw);
    if !norm.is_finite() {
        return Err(Error::DegenerateSelection);
    }
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_finite = None;
    for (i, &lw) in logw.iter().enumerate() {
        if lw == f64::NEG_INFINITY {
            continue;
        }
        cum += (lw - norm).exp();
        last_finite = Some(i);
        if u < cum {
            return Ok(i);
        }
    }
    // Rounding can leave cum marginally below 1; fall back to the last
    // finite-weight entry.
    Ok(last_finite.expect("at least one finite entry"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lse_matches_direct_sum() {
        let v = [0.5f64, -1.0, 2.0];
        let direct: f64 = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&v) - direct).abs() < 1e-14);
    }

    #[test]
    fn lse_all_neg_inf() {
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn neg_inf_entry_never_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let j = categorical_from_log_weights(&[f64::NEG_INFINITY, 0.0], &mut rng).unwrap();
            assert_eq!(j, 1);
        }
    }

    #[test]
    fn all_neg_inf_signals_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let res = categorical_from_log_weights(&[f64::NEG_INFINITY; 4], &mut rng);
        assert!(matches!(res, Err(Error::DegenerateSelection)));
    }

    /// Chi-square goodness of fit for equal weights over 1e5 draws.
    #[test]
    fn equal_weights_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000usize;
        let mut counts = [0usize; 2];
        for _ in 0..n {
            counts[categorical_from_log_weights(&[0.0, 0.0], &mut rng).unwrap()] += 1;
        }
        let expected = n as f64 / 2.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 1 dof; 10.83 is the 0.001 quantile.
        assert!(chi2 < 10.83, "chi2 = {chi2}");
    }

    /// Shifting all log weights by a constant leaves the law unchanged.
    #[test]
    fn shift_invariance() {
        let n = 100_000usize;
        let (a, b, c) = (0.3f64, 1.1, -742.0);
        let mut counts = [[0usize; 2]; 2];
        for (k, w) in [[a, b], [a + c, b + c]].iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..n {
                counts[k][categorical_from_log_weights(w, &mut rng).unwrap()] += 1;
            }
        }
        // Same seed, same sequence of uniforms, identical selection law implies
        // identical draws.
        assert_eq!(counts[0], counts[1]);
    }
}
