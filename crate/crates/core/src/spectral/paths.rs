//! Greedy path ensembles, congestion, and the resulting mixing-time bound.
//!
//! The greedy climb map g sends every non-mode state to its best neighbor;
//! its iteration defines one canonical path between every ordered pair of
//! states, routed through the mode when the two climbs do not meet earlier.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{EnumeratedSpace, TransitionMatrix};

#[derive(Debug, Clone)]
pub struct PathEnsemble {
    g: Vec<usize>,
    x_star: usize,
    /// Climb chain from each state to the mode, inclusive of both ends.
    chains: Vec<Vec<usize>>,
    ell: usize,
}

impl PathEnsemble {
    pub fn g(&self, x: usize) -> usize {
        self.g[x]
    }

    pub fn x_star(&self) -> usize {
        self.x_star
    }

    /// Longest path length (in edges) over all ordered pairs.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// The canonical path from `x` to `y` as a vertex sequence. The two climb
    /// chains are joined at their first common vertex, so vertices never
    /// repeat; when the chains only meet at the mode this is the
    /// through-the-mode route.
    pub fn path(&self, x: usize, y: usize) -> Vec<usize> {
        assert_ne!(x, y, "paths are defined for distinct states");
        let cx = &self.chains[x];
        let cy = &self.chains[y];
        let mut pos_in_y = vec![usize::MAX; self.g.len()];
        for (k, &v) in cy.iter().enumerate() {
            pos_in_y[v] = k;
        }
        let meet = cx
            .iter()
            .position(|&v| pos_in_y[v] != usize::MAX)
            .expect("both chains contain the mode");
        let mut path: Vec<usize> = cx[..=meet].to_vec();
        path.extend(cy[..pos_in_y[cx[meet]]].iter().rev());
        path
    }
}

/// Builds the greedy ensemble. Ties in the climb map break to the lowest
/// state index so the construction is deterministic. Targets where the climb
/// gets trapped below the mode are rejected, reporting the local modes.
pub fn greedy_path_ensemble(space: &EnumeratedSpace) -> Result<PathEnsemble> {
    let n = space.len();
    let x_star = space.mode();
    let mut g = vec![0usize; n];
    for x in 0..n {
        if x == x_star {
            g[x] = x_star;
            continue;
        }
        g[x] = space
            .neighbors_of(x)
            .iter()
            .cloned()
            .max_by(|&a, &b| {
                space
                    .log_pi(a)
                    .total_cmp(&space.log_pi(b))
                    .then(b.cmp(&a))
            })
            .expect("states have neighbors");
    }
    let mut chains = Vec::with_capacity(n);
    let mut trapped = Vec::new();
    for x in 0..n {
        let mut chain = vec![x];
        let mut at = x;
        for _ in 0..n {
            if at == x_star {
                break;
            }
            at = g[at];
            chain.push(at);
        }
        if *chain.last().unwrap() != x_star {
            trapped.push(x);
        }
        chains.push(chain);
    }
    if !trapped.is_empty() {
        // Report the actual local optima among the trapped states.
        let mut modes: Vec<usize> = trapped
            .into_iter()
            .filter(|&x| {
                space
                    .neighbors_of(x)
                    .iter()
                    .all(|&y| space.log_pi(y) <= space.log_pi(x))
            })
            .collect();
        modes.sort_unstable();
        modes.dedup();
        return Err(Error::Multimodal(modes));
    }
    let mut ensemble = PathEnsemble { g, x_star, chains, ell: 0 };
    let mut ell = 0;
    for x in 0..n {
        for y in 0..n {
            if x != y {
                ell = ell.max(ensemble.path(x, y).len() - 1);
            }
        }
    }
    ensemble.ell = ell;
    Ok(ensemble)
}

/// Congestion parameter: the worst edge loading
/// `sum_(paths through (u,v)) pi(x) pi(y) / (pi(u) P(u, v))` over all edges
/// traversed by the ensemble, counting ordered pairs.
pub fn congestion(
    ensemble: &PathEnsemble,
    p: &TransitionMatrix,
    space: &EnumeratedSpace,
) -> Result<f64> {
    let n = space.len();
    let mut load = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            if x == y {
                continue;
            }
            let flow = space.pi(x) * space.pi(y);
            let path = ensemble.path(x, y);
            for e in path.windows(2) {
                load[(e[0], e[1])] += flow;
            }
        }
    }
    let mut rho: f64 = 0.0;
    for u in 0..n {
        for v in 0..n {
            if load[(u, v)] > 0.0 {
                if p.entry(u, v) <= 0.0 {
                    return Err(Error::ZeroCapacityEdge(u, v));
                }
                rho = rho.max(load[(u, v)] / (space.pi(u) * p.entry(u, v)));
            }
        }
    }
    Ok(rho)
}

/// Mixing-time upper bound `2 rho ell [ln(1/eps) + ln(1/min_x pi(x))]`,
/// compared against the lazy chain's mixing time.
pub fn sinclair_bound(rho: f64, ell: usize, space: &EnumeratedSpace, eps: f64) -> f64 {
    2.0 * rho * ell as f64 * ((1.0 / eps).ln() + (1.0 / space.min_pi()).ln())
}
