//! Exact and Monte Carlo transition matrices on enumerated spaces.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sampler::{mtm_step, MtmConfig};
use crate::weights::{Balancing, WeightSpec};

use super::EnumeratedSpace;

/// Largest trial count and neighborhood for which exact tuple enumeration is
/// attempted; the per-entry cost is |N(x)|^(N-1) * |N(y)|^(N-1).
pub const MAX_EXACT_TRIALS: usize = 3;
pub const MAX_EXACT_NEIGHBORS: usize = 8;

#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub mat: DMatrix<f64>,
    pub lazy: bool,
}

impl TransitionMatrix {
    fn from_offdiag(mut mat: DMatrix<f64>) -> Self {
        let n = mat.nrows();
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| mat[(i, j)]).sum();
            mat[(i, i)] = 1.0 - off;
        }
        TransitionMatrix { mat, lazy: false }
    }

    /// `(P + I) / 2`; all eigenvalues become non-negative.
    pub fn lazy(&self) -> TransitionMatrix {
        let n = self.mat.nrows();
        let mut mat = &self.mat * 0.5;
        for i in 0..n {
            mat[(i, i)] += 0.5;
        }
        TransitionMatrix { mat, lazy: true }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }

    pub fn len(&self) -> usize {
        self.mat.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.mat.nrows() == 0
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.mat.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

fn log_krw(space: &EnumeratedSpace, x: usize) -> f64 {
    -(space.neighbors_of(x).len() as f64).ln()
}

/// Trial weight w(y | x) on the enumerated space, in linear scale.
fn trial_weight(space: &EnumeratedSpace, weight: WeightSpec, x: usize, y: usize) -> f64 {
    weight
        .log_weight(space.log_pi(x), space.log_pi(y), log_krw(space, x), log_krw(space, y))
        .exp()
}

/// Exact random-walk Metropolis-Hastings matrix.
pub fn exact_mh_matrix(space: &EnumeratedSpace) -> TransitionMatrix {
    let n = space.len();
    let mut mat = DMatrix::zeros(n, n);
    for x in 0..n {
        let kx = (space.neighbors_of(x).len() as f64).recip();
        for &y in space.neighbors_of(x) {
            let ky = (space.neighbors_of(y).len() as f64).recip();
            let log_ratio =
                space.log_pi(y) + ky.ln() - space.log_pi(x) - kx.ln();
            mat[(x, y)] = kx * log_ratio.min(0.0).exp();
        }
    }
    TransitionMatrix::from_offdiag(mat)
}

/// Visits every length-`arity` tuple over `0..base`, passing it to `f`.
fn for_each_tuple(base: usize, arity: usize, f: &mut impl FnMut(&[usize])) {
    let mut idx = vec![0usize; arity];
    loop {
        f(&idx);
        let mut d = arity;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < base {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Exact multiple-try matrix by summation over all ordered trial and
/// reference tuples. Off-diagonal entry:
/// `N * sum (selection prob) * (acceptance) * (tuple probability)`.
pub fn exact_mtm_matrix(
    space: &EnumeratedSpace,
    num_trials: usize,
    weight: WeightSpec,
) -> Result<TransitionMatrix> {
    let max_nbrs = (0..space.len())
        .map(|x| space.neighbors_of(x).len())
        .max()
        .unwrap_or(0);
    if num_trials > MAX_EXACT_TRIALS || max_nbrs > MAX_EXACT_NEIGHBORS {
        return Err(Error::TupleGuard { num_trials, max_nbrs });
    }
    let n = space.len();
    let mut mat = DMatrix::zeros(n, n);
    for x in 0..n {
        let nx = space.neighbors_of(x);
        let kx = (nx.len() as f64).recip();
        let w_from_x: Vec<f64> =
            nx.iter().map(|&z| trial_weight(space, weight, x, z)).collect();
        for (yi, &y) in nx.iter().enumerate() {
            let ny = space.neighbors_of(y);
            let ky = (ny.len() as f64).recip();
            let w_from_y: Vec<f64> =
                ny.iter().map(|&z| trial_weight(space, weight, y, z)).collect();
            let w_prop = w_from_x[yi];
            let w_back = trial_weight(space, weight, y, x);
            // Reference-side sums are independent of the trial tuple, so
            // pre-aggregate the acceptance as a function of the numerator.
            let mut den_sums = Vec::new();
            for_each_tuple(ny.len(), num_trials - 1, &mut |tuple| {
                den_sums.push(w_back + tuple.iter().map(|&j| w_from_y[j]).sum::<f64>());
            });
            let tuple_prob =
                kx.powi(num_trials as i32) * ky.powi(num_trials as i32 - 1);
            let mut total = 0.0;
            for_each_tuple(nx.len(), num_trials - 1, &mut |tuple| {
                let num = w_prop + tuple.iter().map(|&j| w_from_x[j]).sum::<f64>();
                let select = w_prop / num;
                for &den in &den_sums {
                    total += select * (num / den).min(1.0) * tuple_prob;
                }
            });
            mat[(x, y)] = num_trials as f64 * total;
        }
    }
    Ok(TransitionMatrix::from_offdiag(mat))
}

/// Exact matrix of the pointwise informed sampler: proposals proportional to
/// `h(pi(y)/pi(x)) K_sym(x,y)`, accepted with `min(1, Z_h(x)/Z_h(y))`.
pub fn exact_lbmh_matrix(space: &EnumeratedSpace, balancing: Balancing) -> TransitionMatrix {
    let n = space.len();
    let z: Vec<f64> = (0..n)
        .map(|x| {
            let kx = (space.neighbors_of(x).len() as f64).recip();
            space
                .neighbors_of(x)
                .iter()
                .map(|&y| balancing.log_eval(space.log_pi(y) - space.log_pi(x)).exp() * kx)
                .sum()
        })
        .collect();
    let mut mat = DMatrix::zeros(n, n);
    for x in 0..n {
        let kx = (space.neighbors_of(x).len() as f64).recip();
        for &y in space.neighbors_of(x) {
            let q = balancing.log_eval(space.log_pi(y) - space.log_pi(x)).exp() * kx / z[x];
            mat[(x, y)] = q * (z[x] / z[y]).min(1.0);
        }
    }
    TransitionMatrix::from_offdiag(mat)
}

/// Empirical transition matrix with per-entry binomial standard errors.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub matrix: TransitionMatrix,
    pub std_err: DMatrix<f64>,
    pub samples_per_state: usize,
}

pub fn mc_mtm_matrix(
    space: &EnumeratedSpace,
    config: &MtmConfig,
    samples_per_state: usize,
) -> Result<McEstimate> {
    if samples_per_state < 10_000 {
        return Err(Error::InvalidConfig(format!(
            "need at least 1e4 samples per state, got {samples_per_state}"
        )));
    }
    let n = space.len();
    let mut mat = DMatrix::zeros(n, n);
    let mut std_err = DMatrix::zeros(n, n);
    for x in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (0x9E37_79B9_7F4A_7C15u64
            .wrapping_mul(x as u64 + 1)));
        for _ in 0..samples_per_state {
            let (y, _) = mtm_step(space, &x, config, &mut rng);
            mat[(x, y)] += 1.0;
        }
        for y in 0..n {
            let p_hat: f64 = mat[(x, y)] / samples_per_state as f64;
            mat[(x, y)] = p_hat;
            let var: f64 = p_hat * (1.0 - p_hat) / samples_per_state as f64;
            std_err[(x, y)] = var.sqrt();
        }
    }
    Ok(McEstimate {
        matrix: TransitionMatrix { mat, lazy: false },
        std_err,
        samples_per_state,
    })
}

/// `max_(u,v) |pi(u) P(u,v) - pi(v) P(v,u)|`.
pub fn detailed_balance_residual(p: &TransitionMatrix, space: &EnumeratedSpace) -> f64 {
    let n = space.len();
    let mut worst: f64 = 0.0;
    for u in 0..n {
        for v in u + 1..n {
            worst = worst
                .max((space.pi(u) * p.entry(u, v) - space.pi(v) * p.entry(v, u)).abs());
        }
    }
    worst
}

/// `max_v |(pi' P)_v - pi_v|`.
pub fn stationarity_residual(p: &TransitionMatrix, space: &EnumeratedSpace) -> f64 {
    let n = space.len();
    (0..n)
        .map(|v| {
            let flow: f64 = (0..n).map(|u| space.pi(u) * p.entry(u, v)).sum();
            (flow - space.pi(v)).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightSpec;

    #[test]
    fn mh_rows_sum_to_one_and_balance() {
        let s = EnumeratedSpace::hypercube(3, 0b110).unwrap();
        let p = exact_mh_matrix(&s);
        assert!(p.max_row_sum_error() < 1e-12);
        assert!(detailed_balance_residual(&p, &s) < 1e-14);
        assert!(stationarity_residual(&p, &s) < 1e-14);
    }

    #[test]
    fn single_trial_reduces_to_mh() {
        let s = EnumeratedSpace::hypercube(3, 0b110).unwrap();
        let mh = exact_mh_matrix(&s);
        for w in WeightSpec::ALL {
            let p = exact_mtm_matrix(&s, 1, w).unwrap();
            for i in 0..8 {
                for j in 0..8 {
                    assert!(
                        (p.entry(i, j) - mh.entry(i, j)).abs() < 1e-12,
                        "{w} at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn mtm_rows_sum_to_one() {
        let s = EnumeratedSpace::cycle(&[1.0, 2.0, 4.0]).unwrap();
        for n in 1..=3 {
            let p = exact_mtm_matrix(&s, n, WeightSpec::sqrt()).unwrap();
            assert!(p.max_row_sum_error() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn tuple_guard_enforced() {
        let s = EnumeratedSpace::hypercube(3, 0).unwrap();
        assert!(matches!(
            exact_mtm_matrix(&s, 4, WeightSpec::sqrt()),
            Err(Error::TupleGuard { .. })
        ));
        let big = EnumeratedSpace::hypercube(9, 0).unwrap();
        assert!(matches!(
            exact_mtm_matrix(&big, 2, WeightSpec::sqrt()),
            Err(Error::TupleGuard { .. })
        ));
    }

    #[test]
    fn lbmh_preserves_stationarity() {
        let s = EnumeratedSpace::hypercube(4, 0b1010).unwrap();
        for b in Balancing::ALL {
            let p = exact_lbmh_matrix(&s, b);
            assert!(p.max_row_sum_error() < 1e-12);
            assert!(detailed_balance_residual(&p, &s) < 1e-13, "{b}");
        }
    }

    #[test]
    fn perturbed_matrix_breaks_balance() {
        let s = EnumeratedSpace::hypercube(3, 0b110).unwrap();
        let mut p = exact_mh_matrix(&s);
        let m = s.mode();
        let j = s.neighbors_of(m)[0];
        p.mat[(m, j)] += 1e-3;
        assert!(detailed_balance_residual(&p, &s) >= 1e-4);
    }

    /// Exact entries sit inside 3 standard errors of a Monte Carlo estimate
    /// on the 3-cycle with two trials.
    #[test]
    fn exact_matches_monte_carlo() {
        let s = EnumeratedSpace::cycle(&[1.0, 2.0, 4.0]).unwrap();
        let exact = exact_mtm_matrix(&s, 2, WeightSpec::sqrt()).unwrap();
        let config = MtmConfig::new(2, WeightSpec::sqrt(), 77);
        let mc = mc_mtm_matrix(&s, &config, 200_000).unwrap();
        assert!(mc.matrix.max_row_sum_error() < 1e-12);
        for i in 0..3 {
            for j in 0..3 {
                let tol = 3.0 * mc.std_err[(i, j)] + 1e-9;
                assert!(
                    (exact.entry(i, j) - mc.matrix.entry(i, j)).abs() < tol,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn lazy_transform_halves_off_diagonals() {
        let s = EnumeratedSpace::cycle(&[1.0, 1.0, 1.0]).unwrap();
        let p = exact_mh_matrix(&s);
        let lazy = p.lazy();
        assert!(lazy.lazy);
        assert!((lazy.entry(0, 1) - p.entry(0, 1) / 2.0).abs() < 1e-15);
        assert!(lazy.max_row_sum_error() < 1e-12);
    }
}
