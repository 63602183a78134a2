//! Exact verification engine on small enumerable state spaces.
//!
//! Everything here trades scale for exactness: full transition matrices for
//! the samplers, detailed-balance and stationarity residuals, spectral gaps
//! and total-variation mixing times of the lazy chains, greedy path ensembles
//! with their congestion parameter, and the resulting mixing-time upper
//! bound. Guards fail loudly when a computation would stop being exact.

mod analysis;
mod landscape;
mod matrix;
mod paths;

pub use analysis::{spectral_gap, tv_mixing_time};
pub use landscape::{two_tier_acceptance, TwoTierLandscape};
pub use matrix::{
    detailed_balance_residual, exact_lbmh_matrix, exact_mh_matrix, exact_mtm_matrix,
    mc_mtm_matrix, stationarity_residual, McEstimate, TransitionMatrix,
};
pub use paths::{congestion, greedy_path_ensemble, sinclair_bound, PathEnsemble};

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelSpace, Trial};
use crate::sampler::SamplerSpec;

/// Hard cap on enumerable state spaces.
pub const SPACE_LIMIT: usize = 1 << 16;

/// A fully enumerated target: normalized log probabilities over indexed
/// states plus a symmetric neighbor relation.
#[derive(Debug, Clone)]
pub struct EnumeratedSpace {
    labels: Vec<String>,
    log_pi: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl EnumeratedSpace {
    /// Normalizes `log_weights` and validates the neighbor structure.
    pub fn new(
        log_weights: Vec<f64>,
        neighbors: Vec<Vec<usize>>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = log_weights.len();
        if n == 0 || n != neighbors.len() {
            return Err(Error::InvalidConfig(format!(
                "{} weights vs {} neighbor lists",
                n,
                neighbors.len()
            )));
        }
        if n > SPACE_LIMIT {
            return Err(Error::SpaceTooLarge { size: n, limit: SPACE_LIMIT });
        }
        if log_weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig(
                "enumerated states must have positive probability".into(),
            ));
        }
        for (i, list) in neighbors.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidConfig(format!("state {i} has no neighbors")));
            }
            for &j in list {
                if j >= n || j == i {
                    return Err(Error::InvalidConfig(format!(
                        "bad neighbor {j} of state {i}"
                    )));
                }
                if !neighbors[j].contains(&i) {
                    return Err(Error::InvalidConfig(format!(
                        "neighbor relation not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let norm = crate::logspace::log_sum_exp(&log_weights);
        let log_pi = log_weights.iter().map(|w| w - norm).collect();
        let labels =
            labels.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
        Ok(EnumeratedSpace { labels, log_pi, neighbors })
    }

    pub fn len(&self) -> usize {
        self.log_pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_pi.is_empty()
    }

    pub fn pi(&self, i: usize) -> f64 {
        self.log_pi[i].exp()
    }

    pub fn log_pi(&self, i: usize) -> f64 {
        self.log_pi[i]
    }

    pub fn neighbors_of(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn min_pi(&self) -> f64 {
        self.log_pi
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .exp()
    }

    /// Index of the global mode.
    pub fn mode(&self) -> usize {
        (0..self.len())
            .max_by(|&a, &b| self.log_pi[a].total_cmp(&self.log_pi[b]))
            .expect("nonempty space")
    }

    /// Hypercube {0,1}^m with pi proportional to exp(-d_H(x, x_star)) and
    /// single-bit-flip neighborhoods. `x_star` is a bit mask.
    pub fn hypercube(m: usize, x_star: u64) -> Result<Self> {
        if m == 0 || m > 16 {
            return Err(Error::InvalidConfig(format!("hypercube dimension {m}")));
        }
        let n = 1usize << m;
        let mut log_weights = Vec::with_capacity(n);
        let mut neighbors = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for s in 0..n as u64 {
            log_weights.push(-(((s ^ x_star).count_ones()) as f64));
            neighbors.push((0..m).map(|b| (s ^ (1 << b)) as usize).collect());
            labels.push(
                (0..m)
                    .rev()
                    .map(|b| if s >> b & 1 == 1 { '1' } else { '0' })
                    .collect(),
            );
        }
        EnumeratedSpace::new(log_weights, neighbors, Some(labels))
    }

    /// Ring of `weights.len()` states, pi proportional to `weights`.
    pub fn cycle(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        if n < 3 {
            return Err(Error::InvalidConfig("cycle needs at least 3 states".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidConfig("cycle weights must be positive".into()));
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let neighbors = (0..n)
            .map(|i| {
                let mut list = vec![(i + n - 1) % n, (i + 1) % n];
                list.sort_unstable();
                list.dedup();
                list
            })
            .collect();
        EnumeratedSpace::new(log_weights, neighbors, None)
    }
}

/// Exhaustively enumerates the support reachable from `x0` through a model's
/// neighborhoods. Returns the space and the concrete states per index.
pub fn enumerate_model<M: ModelSpace>(
    model: &M,
    x0: &M::State,
) -> Result<(EnumeratedSpace, Vec<M::State>)> {
    if !model.log_post(x0).is_finite() {
        return Err(Error::ZeroProbabilityStart);
    }
    let mut states = vec![x0.clone()];
    let mut index = std::collections::HashMap::new();
    index.insert(model.fingerprint(x0), 0usize);
    let mut neighbors: Vec<Vec<usize>> = Vec::new();
    let mut at = 0;
    while at < states.len() {
        let trials = model
            .enumerate_moves(&states[at])
            .ok_or(Error::EnumerationUnsupported("state-space enumeration"))?;
        let mut list = Vec::new();
        for Trial { mv, log_post, .. } in trials {
            if log_post == f64::NEG_INFINITY {
                continue;
            }
            let y = model.apply_move(&states[at], &mv);
            let fp = model.fingerprint(&y);
            let j = *index.entry(fp).or_insert_with(|| {
                states.push(y);
                states.len() - 1
            });
            if states.len() > SPACE_LIMIT {
                return Err(Error::SpaceTooLarge {
                    size: states.len(),
                    limit: SPACE_LIMIT,
                });
            }
            list.push(j);
        }
        list.sort_unstable();
        list.dedup();
        neighbors.push(list);
        at += 1;
    }
    let log_weights = states.iter().map(|s| model.log_post(s)).collect();
    let space = EnumeratedSpace::new(log_weights, neighbors, None)?;
    Ok((space, states))
}

/// The enumerated space is itself a sampling target; states are indices and
/// moves are destination indices.
impl ModelSpace for EnumeratedSpace {
    type State = usize;
    type Move = usize;

    fn log_post(&self, x: &usize) -> f64 {
        self.log_pi[*x]
    }

    fn propose_move(&self, x: &usize, rng: &mut dyn RngCore) -> (usize, f64, f64) {
        let list = &self.neighbors[*x];
        let y = list[rng.random_range(0..list.len())];
        (
            y,
            -(list.len() as f64).ln(),
            -(self.neighbors[y].len() as f64).ln(),
        )
    }

    fn eval_move(&self, _x: &usize, mv: &usize) -> f64 {
        self.log_pi[*mv]
    }

    fn apply_move(&self, _x: &usize, mv: &usize) -> usize {
        *mv
    }

    fn neighborhood_size(&self, x: &usize) -> usize {
        self.neighbors[*x].len()
    }

    fn enumerate_moves(&self, x: &usize) -> Option<Vec<Trial<usize>>> {
        let log_fwd = -(self.neighbors[*x].len() as f64).ln();
        Some(
            self.neighbors[*x]
                .iter()
                .map(|&y| Trial {
                    mv: y,
                    log_post: self.log_pi[y],
                    log_fwd,
                    log_rev: -(self.neighbors[y].len() as f64).ln(),
                })
                .collect(),
        )
    }

    fn fingerprint(&self, x: &usize) -> u64 {
        *x as u64
    }
}

/// Everything the lab measures about one sampler on one enumerated target.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub target: String,
    pub sampler: String,
    pub gap: f64,
    pub t_mix: usize,
    pub rho: f64,
    pub ell: usize,
    pub bound: f64,
    pub db_residual: f64,
}

/// Builds the exact transition matrix for a sampler specification.
pub fn exact_matrix(space: &EnumeratedSpace, spec: &SamplerSpec) -> Result<TransitionMatrix> {
    match *spec {
        SamplerSpec::Mh => Ok(exact_mh_matrix(space)),
        SamplerSpec::Mtm { num_trials, weight } => exact_mtm_matrix(space, num_trials, weight),
        SamplerSpec::Lbmh { balancing } => Ok(exact_lbmh_matrix(space, balancing)),
    }
}

/// Full diagnostic pass: matrix, residual, lazy spectra, path-ensemble bound.
pub fn analyze_sampler(
    space: &EnumeratedSpace,
    target: &str,
    spec: &SamplerSpec,
    eps: f64,
) -> Result<SpectralReport> {
    let p = exact_matrix(space, spec)?;
    let db_residual = detailed_balance_residual(&p, space);
    let gap = spectral_gap(&p, space)?;
    let t_mix = tv_mixing_time(&p, space, eps)?;
    let ensemble = greedy_path_ensemble(space)?;
    let rho = congestion(&ensemble, &p, space)?;
    let bound = sinclair_bound(rho, ensemble.ell(), space, eps);
    Ok(SpectralReport {
        target: target.to_string(),
        sampler: spec.label(),
        gap,
        t_mix,
        rho,
        ell: ensemble.ell(),
        bound,
        db_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hypercube_mode_and_normalization() {
        let s = EnumeratedSpace::hypercube(3, 0b110).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.mode(), 0b110);
        assert_eq!(s.label(0b110), "110");
        let total: f64 = (0..8).map(|i| s.pi(i)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Every state has exactly m = 3 neighbors at Hamming distance 1.
        for i in 0..8 {
            assert_eq!(s.neighbors_of(i).len(), 3);
        }
    }

    #[test]
    fn cycle_neighbors_are_ring() {
        let s = EnumeratedSpace::cycle(&[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.neighbors_of(0), &[1, 2]);
        assert!((s.pi(2) - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_neighbors_rejected() {
        let r = EnumeratedSpace::new(
            vec![0.0, 0.0],
            vec![vec![1], vec![]],
            None,
        );
        assert!(r.is_err());
    }

    #[test]
    fn bvs_enumeration_matches_direct_posterior() {
        use crate::bvs::{BvsDesign, BvsGenSpec, BvsHyper, BvsModel, SignalSpec};
        use rand::SeedableRng;
        let spec = BvsGenSpec {
            n: 20,
            p: 6,
            design: BvsDesign::Independent,
            signal: SignalSpec::RandomNormal { sigma_beta: 1.0, count: 2 },
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let (data, _, _) = crate::bvs::generate_dataset(&spec, &mut rng).unwrap();
        let model =
            BvsModel::new(data, BvsHyper { g_scale: 216.0, kappa: 2.0, s_max: 6 }).unwrap();
        let x0 = model.null_state();
        let (space, states) = enumerate_model(&model, &x0).unwrap();
        assert_eq!(space.len(), 64);
        let logz = crate::logspace::log_sum_exp(
            &states.iter().map(|s| s.log_post).collect::<Vec<_>>(),
        );
        for (i, st) in states.iter().enumerate() {
            assert!((space.log_pi(i) - (st.log_post - logz)).abs() < 1e-10);
        }
    }
}
