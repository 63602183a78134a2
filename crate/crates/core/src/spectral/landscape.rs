//! Exact acceptance probabilities on a synthetic two-tier posterior
//! landscape.
//!
//! Around every non-mode state, a few neighbors ("good", count `s0`) improve
//! the posterior by the large factor `p^t2` and the rest improve it by the
//! small factor `p^(t1/2)`. The landscape is a local caricature, not a
//! realizable global target; it exists to evaluate, in closed form, the
//! multiple-try acceptance probability of a move onto a good neighbor. With
//! unscaled weights this acceptance collapses as the trial count grows, while
//! balanced weights keep it bounded away from zero.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::logspace::log_sum_exp;
use crate::weights::WeightSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTierLandscape {
    /// Base of all ratios, the complexity parameter.
    pub base: f64,
    /// Small-improvement exponent; off-tier neighbors have ratio
    /// `base^(t1/2)`.
    pub t1: f64,
    /// Large-improvement exponent; good neighbors have ratio `base^t2`.
    pub t2: f64,
    /// Uniform neighborhood size.
    pub neighborhood: usize,
    /// Number of good neighbors per state.
    pub s0: usize,
}

impl TwoTierLandscape {
    pub fn validate(&self) -> Result<()> {
        if self.base < 2.0
            || !(self.t1 < self.t2)
            || self.s0 == 0
            || self.s0 >= self.neighborhood
        {
            return Err(Error::InvalidConfig(format!("bad landscape {self:?}")));
        }
        Ok(())
    }

    /// Log trial weight of a neighbor with log posterior ratio `r` relative
    /// to the conditioning state, whose own relative log posterior is
    /// `log_pi_base`. The proposal kernel is uniform and symmetric, so
    /// balanced weights depend on `r` alone.
    fn log_w(&self, weight: WeightSpec, log_pi_base: f64, r: f64) -> f64 {
        match weight {
            WeightSpec::Ordinary => log_pi_base + r,
            WeightSpec::Balanced { balancing } => balancing.log_eval(r),
        }
    }
}

fn ln_binom_pmf(n: usize, k: usize, q: f64) -> f64 {
    let (n, kf) = (n as f64, k as f64);
    ln_gamma(n + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(n - kf + 1.0)
        + kf * q.ln()
        + (n - kf) * (1.0 - q).ln()
}

/// Exact expected acceptance probability of a multiple-try move from a
/// non-mode state onto one of its good neighbors, marginalized over the
/// `N - 1` companion trials and `N - 1` reference draws (all uniform over the
/// respective neighborhoods, with replacement).
pub fn two_tier_acceptance(
    land: &TwoTierLandscape,
    num_trials: usize,
    weight: WeightSpec,
) -> Result<f64> {
    land.validate()?;
    if num_trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let ln_p = land.base.ln();
    let r_hi = land.t2 * ln_p;
    let r_lo = 0.5 * land.t1 * ln_p;
    // Log posteriors relative to the current state: the current state is 0,
    // the proposed good neighbor r_hi.
    let w_prop = land.log_w(weight, 0.0, r_hi);
    let w_trial_hi = w_prop;
    let w_trial_lo = land.log_w(weight, 0.0, r_lo);
    // Reference trials are neighbors of the proposed state; their ratios are
    // relative to it, their absolute log posterior is r_hi + ratio.
    let w_back = land.log_w(weight, r_hi, -r_hi);
    let w_ref_hi = land.log_w(weight, r_hi, r_hi);
    let w_ref_lo = land.log_w(weight, r_hi, r_lo);
    let m = num_trials - 1;
    let q = land.s0 as f64 / land.neighborhood as f64;
    // Sum of a fixed term plus k copies of `hi` and m-k copies of `lo`, in
    // log space.
    let side = |fixed: f64, hi: f64, lo: f64, k: usize| {
        let mut terms = vec![fixed];
        if k > 0 {
            terms.push(hi + (k as f64).ln());
        }
        if m - k > 0 {
            terms.push(lo + ((m - k) as f64).ln());
        }
        log_sum_exp(&terms)
    };
    let pmf: Vec<f64> = (0..=m).map(|k| ln_binom_pmf(m, k, q).exp()).collect();
    let mut acc = 0.0;
    for (k, &pk) in pmf.iter().enumerate() {
        let num = side(w_prop, w_trial_hi, w_trial_lo, k);
        for (l, &pl) in pmf.iter().enumerate() {
            let den = side(w_back, w_ref_hi, w_ref_lo, l);
            acc += pk * pl * (num - den).min(0.0).exp();
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn land() -> TwoTierLandscape {
        TwoTierLandscape { base: 100.0, t1: 1.0, t2: 2.0, neighborhood: 100, s0: 1 }
    }

    /// A single trial is plain Metropolis-Hastings onto a better state:
    /// acceptance 1 for every weight family.
    #[test]
    fn single_trial_always_accepts() {
        for w in WeightSpec::ALL {
            let a = two_tier_acceptance(&land(), 1, w).unwrap();
            assert!((a - 1.0).abs() < 1e-12, "{w}: {a}");
        }
    }

    /// With many trials the unscaled weight collapses below 2/p^(t1/2) while
    /// the square-root balanced weight stays above 1/2 on the same move.
    #[test]
    fn ordinary_collapses_sqrt_survives() {
        let l = land();
        let ord = two_tier_acceptance(&l, 1000, WeightSpec::Ordinary).unwrap();
        let sqrt = two_tier_acceptance(&l, 1000, WeightSpec::sqrt()).unwrap();
        assert!(ord <= 2.0 / l.base.powf(l.t1 / 2.0), "ordinary {ord}");
        assert!(sqrt > 0.5, "sqrt {sqrt}");
    }

    /// Monte Carlo oracle on a small configuration: sample companion and
    /// reference tiers binomially and average the acceptance ratio.
    #[test]
    fn matches_monte_carlo() {
        let l = TwoTierLandscape { base: 4.0, t1: 1.0, t2: 2.0, neighborhood: 5, s0: 2 };
        let n = 3usize;
        for w in [WeightSpec::Ordinary, WeightSpec::sqrt()] {
            let exact = two_tier_acceptance(&l, n, w).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(51);
            let reps = 200_000;
            let ln_p = l.base.ln();
            let (r_hi, r_lo) = (l.t2 * ln_p, 0.5 * l.t1 * ln_p);
            let q = l.s0 as f64 / l.neighborhood as f64;
            let mut total = 0.0;
            for _ in 0..reps {
                let mut num = l.log_w(w, 0.0, r_hi).exp();
                for _ in 0..n - 1 {
                    let r = if rng.random::<f64>() < q { r_hi } else { r_lo };
                    num += l.log_w(w, 0.0, r).exp();
                }
                let mut den = l.log_w(w, r_hi, -r_hi).exp();
                for _ in 0..n - 1 {
                    let r = if rng.random::<f64>() < q { r_hi } else { r_lo };
                    den += l.log_w(w, r_hi, r).exp();
                }
                total += (num / den).min(1.0);
            }
            let mc = total / reps as f64;
            assert!((exact - mc).abs() < 0.005, "{w}: exact {exact} vs mc {mc}");
        }
    }

    #[test]
    fn degenerate_landscapes_rejected() {
        let mut l = land();
        l.s0 = 100;
        assert!(two_tier_acceptance(&l, 2, WeightSpec::sqrt()).is_err());
        let mut l2 = land();
        l2.t2 = 0.5;
        assert!(two_tier_acceptance(&l2, 2, WeightSpec::sqrt()).is_err());
    }
}
