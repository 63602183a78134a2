//! Spectral gap and total-variation mixing time of lazy chains.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::{EnumeratedSpace, TransitionMatrix};

/// Iteration cap for the TV power iteration.
const MAX_TV_ITERS: usize = 2_000_000;

fn ensure_lazy(p: &TransitionMatrix) -> TransitionMatrix {
    if p.lazy {
        p.clone()
    } else {
        p.lazy()
    }
}

fn check_irreducible(p: &TransitionMatrix) -> Result<()> {
    let n = p.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if u != v && !seen[v] && (p.entry(u, v) > 0.0 || p.entry(v, u) > 0.0) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(())
    } else {
        Err(Error::Reducible)
    }
}

/// `1 - lambda_2` of the lazy transform, computed on the pi-symmetrized
/// similarity `D^(1/2) P_lazy D^(-1/2)`.
pub fn spectral_gap(p: &TransitionMatrix, space: &EnumeratedSpace) -> Result<f64> {
    check_irreducible(p)?;
    let lazy = ensure_lazy(p);
    let n = lazy.len();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = ((space.log_pi(i) - space.log_pi(j)) / 2.0).exp() * lazy.entry(i, j);
        }
    }
    // Reversibility makes s symmetric up to round-off.
    let sym = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
    eig.sort_by(f64::total_cmp);
    let top = eig[n - 1];
    debug_assert!((top - 1.0).abs() < 1e-8, "leading eigenvalue {top}");
    debug_assert!(eig[0] > -1e-10, "lazy eigenvalue {}", eig[0]);
    if n == 1 {
        return Ok(1.0);
    }
    Ok(1.0 - eig[n - 2])
}

/// Smallest `t` with `max_x || P_lazy^t(x, .) - pi ||_TV <= eps`, by direct
/// power iteration of the lazy matrix.
pub fn tv_mixing_time(p: &TransitionMatrix, space: &EnumeratedSpace, eps: f64) -> Result<usize> {
    check_irreducible(p)?;
    let lazy = ensure_lazy(p);
    let n = lazy.len();
    let mut dist = DMatrix::<f64>::identity(n, n);
    for t in 0..=MAX_TV_ITERS {
        let worst = (0..n)
            .map(|x| {
                0.5 * (0..n)
                    .map(|y| (dist[(x, y)] - space.pi(y)).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        if worst <= eps {
            return Ok(t);
        }
        dist *= &lazy.mat;
    }
    Err(Error::InvalidConfig(format!(
        "no eps={eps} mixing within {MAX_TV_ITERS} lazy steps"
    )))
}
