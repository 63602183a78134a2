//! Data-driven selection of the number of trials from a one-shot scan of the
//! starting state's neighborhood.
//!
//! The scan measures how many neighbors look "good" (large posterior ratio)
//! versus "bad", clusters the log ratios into two groups, and sizes the trial
//! count so that the good set is reliably represented among the proposals
//! without overshooting into wasted posterior evaluations.

use crate::error::{Error, Result};
use crate::model::ModelSpace;

/// Base-p log posterior ratios of every neighbor of the scanned state.
#[derive(Debug, Clone)]
pub struct RatioScan {
    /// `log_p(pi(y_j) / pi(x0))` for each neighbor `y_j`.
    pub ratios: Vec<f64>,
    /// Lower neighborhood-size exponent, `log_p min |N(x)|`.
    pub t3: f64,
    /// Upper neighborhood-size exponent, `log_p max |N(x)|`.
    pub t4: f64,
    /// Complexity parameter; the base of all exponents. At least 2.
    pub p: u64,
}

/// Outcome of the trial-count selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TunerEstimates {
    /// Largest "bad" log ratio after the adjustment loop.
    pub t1_hat: f64,
    /// Smallest "good" log ratio.
    pub t2_hat: f64,
    /// Estimated count of good neighbors.
    pub s0_hat: usize,
    /// Damping exponent applied to the raw trial count, in (0, 1).
    pub psi: f64,
    /// Selected number of trials, at least 1.
    pub n_selected: usize,
    /// Set when the ratios carried no usable two-cluster signal and the
    /// selection fell back to a single trial.
    pub degenerate: bool,
}

/// Evaluates every neighbor of `x0` and records base-p log posterior ratios.
///
/// `t3` and `t4` default to `log_p |N(x0)|` on both ends, the symmetric
/// uniform-proposal case. Callers with size-varying neighborhoods can widen
/// them before selection.
pub fn neighbor_log_ratio_scan<M: ModelSpace>(
    model: &M,
    x0: &M::State,
    p: u64,
) -> Result<RatioScan> {
    if p < 2 {
        return Err(Error::InvalidConfig(format!(
            "complexity parameter must be at least 2, got {p}"
        )));
    }
    let lp_x = model.log_post(x0);
    if !lp_x.is_finite() {
        return Err(Error::ZeroProbabilityStart);
    }
    let trials = model
        .enumerate_moves(x0)
        .ok_or(Error::EnumerationUnsupported("neighbor_log_ratio_scan"))?;
    let ln_p = (p as f64).ln();
    let ratios: Vec<f64> = trials.iter().map(|t| (t.log_post - lp_x) / ln_p).collect();
    let t = (ratios.len() as f64).ln() / ln_p;
    Ok(RatioScan { ratios, t3: t, t4: t, p })
}

/// Optimal two-cluster partition of a set of reals, returned as the sorted
/// lower cluster and the sorted upper cluster.
///
/// Optimal 1-D two-partitions under within-cluster sum of squares are
/// contiguous in sorted order, so an exhaustive scan over cut points between
/// distinct values is exact and deterministic.
pub fn two_means_split(values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("ratios must not be NaN"));
    let n = sorted.len();
    if n < 2 || sorted[0] == sorted[n - 1] {
        return Err(Error::DegeneratePartition);
    }
    let prefix: Vec<f64> = std::iter::once(0.0)
        .chain(sorted.iter().scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        }))
        .collect();
    let prefix_sq: Vec<f64> = std::iter::once(0.0)
        .chain(sorted.iter().scan(0.0, |acc, v| {
            *acc += v * v;
            Some(*acc)
        }))
        .collect();
    // Within-cluster SS of sorted[a..b) is sum(x^2) - (sum x)^2 / count.
    let wcss = |a: usize, b: usize| {
        let s = prefix[b] - prefix[a];
        let s2 = prefix_sq[b] - prefix_sq[a];
        s2 - s * s / (b - a) as f64
    };
    let mut best: Option<(f64, usize)> = None;
    for cut in 1..n {
        if sorted[cut - 1] == sorted[cut] {
            continue;
        }
        let cost = wcss(0, cut) + wcss(cut, n);
        match best {
            Some((c, _)) if c <= cost => {}
            _ => best = Some((cost, cut)),
        }
    }
    let (_, cut) = best.expect("a valid cut exists between distinct values");
    Ok((sorted[..cut].to_vec(), sorted[cut..].to_vec()))
}

/// Runs the clustering, threshold-adjustment and crossing loop on a scan and
/// returns the selected trial count `N = floor((p^t3 / s0_hat)^psi)`.
///
/// All comparisons of `p`-exponentials happen in log space. Inputs whose
/// ratios are all identical carry no signal; they select a single trial and
/// set the `degenerate` flag.
pub fn select_num_trials(scan: &RatioScan, psi: f64) -> Result<TunerEstimates> {
    if !(psi > 0.0 && psi < 1.0) {
        return Err(Error::InvalidConfig(format!("psi must lie in (0, 1), got {psi}")));
    }
    if scan.t3 > scan.t4 {
        return Err(Error::InvalidConfig(format!(
            "t3 = {} exceeds t4 = {}",
            scan.t3, scan.t4
        )));
    }
    let ln_p = (scan.p as f64).ln();
    let (mut c1, c2) = match two_means_split(&scan.ratios) {
        Ok(split) => split,
        Err(Error::DegeneratePartition) => {
            let r = scan.ratios.first().copied().unwrap_or(0.0);
            return Ok(TunerEstimates {
                t1_hat: r,
                t2_hat: r,
                s0_hat: 1,
                psi,
                n_selected: 1,
                degenerate: true,
            });
        }
        Err(e) => return Err(e),
    };
    let mut t2_hat = c2[0];
    let mut s0_hat = c2.len();
    // The upper cluster must sit strictly above t4 to count as "good". When
    // the k-means cut lands below t4, re-split at t4 itself; when nothing
    // exceeds t4, treat t4 as the good threshold with a single phantom good
    // neighbor.
    if t2_hat < scan.t4 {
        let mut all = scan.ratios.clone();
        all.sort_by(|a, b| a.partial_cmp(b).expect("ratios must not be NaN"));
        let cut = all.partition_point(|&r| r <= scan.t4);
        if cut < all.len() {
            t2_hat = all[cut];
            s0_hat = all.len() - cut;
            c1 = all[..cut].to_vec();
        } else {
            t2_hat = scan.t4;
            s0_hat = 1;
            c1 = all;
        }
    }
    let mut t1_hat = *c1.last().expect("lower cluster is nonempty");
    // Raise the bad/good boundary until the acceptance scale p^((t2-t1)/2)
    // covers the per-trial hit rate p^t3 / s0.
    loop {
        let lhs = 0.5 * (t2_hat - t1_hat) * ln_p;
        let rhs = scan.t3 * ln_p - (s0_hat as f64).ln();
        if lhs >= rhs {
            break;
        }
        c1.pop();
        s0_hat += 1;
        match c1.last() {
            Some(&max) => t1_hat = max,
            None => break,
        }
    }
    let log_n = psi * (scan.t3 * ln_p - (s0_hat as f64).ln());
    let n_selected = ((log_n.exp() + 1e-9).floor() as usize).max(1);
    Ok(TunerEstimates { t1_hat, t2_hat, s0_hat, psi, n_selected, degenerate: false })
}
