//! Bayesian stochastic block model over node partitions.
//!
//! With the edge probabilities integrated out under a Beta prior, the log
//! posterior of a partition is `sum_{u<=v} ln B(k1 + m_uv, k2 + mbar_uv)`
//! where `m_uv` counts edges between blocks u and v and `mbar_uv` the
//! non-edges. A balance constraint keeps every block size within
//! `[p/(alpha K), alpha p/K]`; outside it the posterior is zero. Moves are
//! single label flips, maintained in O(degree + K^2).

mod graph;

pub use graph::{
    a_for_target_ch, ch_divergence, generate_graph, read_edge_csv, write_edge_csv, SbmGraph,
};

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::model::{fnv1a, ModelSpace, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmHyper {
    pub kappa1: f64,
    pub kappa2: f64,
    /// Number of blocks.
    pub k: usize,
    /// Balance slack alpha; blocks must hold between p/(alpha K) and
    /// alpha p/K nodes.
    pub alpha_balance: f64,
}

impl SbmHyper {
    /// Defaults: flat Beta(1,1) prior and alpha = 1000, leaving the balance
    /// constraint essentially inactive apart from excluding empty blocks.
    pub fn defaults_for(k: usize) -> Self {
        SbmHyper { kappa1: 1.0, kappa2: 1.0, k, alpha_balance: 1000.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.kappa1 <= 0.0 || self.kappa2 <= 0.0 || self.alpha_balance <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "bad hyperparameters: kappa1={}, kappa2={}, K={}, alpha={}",
                self.kappa1, self.kappa2, self.k, self.alpha_balance
            )));
        }
        Ok(())
    }

    fn size_in_support(&self, n_u: usize, p: usize) -> bool {
        let lo = p as f64 / (self.alpha_balance * self.k as f64);
        let hi = self.alpha_balance * p as f64 / self.k as f64;
        (n_u as f64) >= lo && (n_u as f64) <= hi
    }
}

/// Upper-triangle edge counts between blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockCounts {
    k: usize,
    m: Vec<u64>,
}

impl BlockCounts {
    pub fn zeros(k: usize) -> Self {
        BlockCounts { k, m: vec![0; k * (k + 1) / 2] }
    }

    fn idx(&self, u: usize, v: usize) -> usize {
        let (u, v) = if u <= v { (u, v) } else { (v, u) };
        u * self.k - (u * u - u) / 2 + (v - u)
    }

    pub fn get(&self, u: usize, v: usize) -> u64 {
        self.m[self.idx(u, v)]
    }

    fn add(&mut self, u: usize, v: usize, delta: i64) {
        let i = self.idx(u, v);
        self.m[i] = self.m[i].checked_add_signed(delta).expect("edge count underflow");
    }

    pub fn total_edges(&self) -> u64 {
        self.m.iter().sum()
    }

    /// Pair capacity of a block pair given current sizes; the non-edge count
    /// is capacity minus `m_uv`.
    pub fn capacity(sizes: &[usize], u: usize, v: usize) -> u64 {
        if u == v {
            (sizes[u] * sizes[u].saturating_sub(1) / 2) as u64
        } else {
            (sizes[u] * sizes[v]) as u64
        }
    }
}

/// Committed chain state.
#[derive(Debug, Clone)]
pub struct SbmState {
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
    pub counts: BlockCounts,
    pub log_post: f64,
}

/// Relabel one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SbmMove {
    pub node: usize,
    pub new_label: usize,
}

pub struct SbmModel {
    graph: SbmGraph,
    hyper: SbmHyper,
}

impl SbmModel {
    pub fn new(graph: SbmGraph, hyper: SbmHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(SbmModel { graph, hyper })
    }

    pub fn graph(&self) -> &SbmGraph {
        &self.graph
    }

    pub fn hyper(&self) -> &SbmHyper {
        &self.hyper
    }

    pub fn p(&self) -> usize {
        self.graph.p()
    }

    /// From-scratch block sizes and edge counts.
    pub fn recount(&self, labels: &[usize]) -> Result<(Vec<usize>, BlockCounts)> {
        let k = self.hyper.k;
        let mut sizes = vec![0usize; k];
        for &l in labels {
            if l >= k {
                return Err(Error::LabelOutOfRange { label: l, k });
            }
            sizes[l] += 1;
        }
        let mut counts = BlockCounts::zeros(k);
        for (i, j) in self.graph.edges() {
            counts.add(labels[i], labels[j], 1);
        }
        Ok((sizes, counts))
    }

    fn log_post_from(&self, sizes: &[usize], counts: &BlockCounts) -> f64 {
        let p = self.p();
        if sizes.iter().any(|&n| !self.hyper.size_in_support(n, p)) {
            return f64::NEG_INFINITY;
        }
        let k = self.hyper.k;
        let mut lp = 0.0;
        for u in 0..k {
            for v in u..k {
                let cap = BlockCounts::capacity(sizes, u, v);
                let m = counts.get(u, v);
                debug_assert!(m <= cap, "counts inconsistent with sizes");
                lp += ln_beta(
                    self.hyper.kappa1 + m as f64,
                    self.hyper.kappa2 + (cap - m) as f64,
                );
            }
        }
        lp
    }

    pub fn state_from_labels(&self, labels: Vec<usize>) -> Result<SbmState> {
        if labels.len() != self.p() {
            return Err(Error::InvalidConfig(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.p()
            )));
        }
        let (sizes, counts) = self.recount(&labels)?;
        let log_post = self.log_post_from(&sizes, &counts);
        Ok(SbmState { labels, sizes, counts, log_post })
    }

    pub fn log_posterior(&self, labels: &[usize]) -> Result<f64> {
        let (sizes, counts) = self.recount(labels)?;
        Ok(self.log_post_from(&sizes, &counts))
    }

    /// Neighbor count of `i` per block, excluding `i` itself.
    fn edge_profile(&self, labels: &[usize], i: usize) -> Vec<i64> {
        let mut e = vec![0i64; self.hyper.k];
        for &j in self.graph.neighbors(i) {
            e[labels[j]] += 1;
        }
        e
    }

    fn shift_counts(counts: &mut BlockCounts, e: &[i64], from: usize, to: usize) {
        for (u, &cnt) in e.iter().enumerate() {
            if cnt != 0 {
                counts.add(from, u, -cnt);
                counts.add(to, u, cnt);
            }
        }
    }

    fn log_flip_density(&self) -> f64 {
        -((self.p() * (self.hyper.k - 1)) as f64).ln()
    }
}

impl ModelSpace for SbmModel {
    type State = SbmState;
    type Move = SbmMove;

    fn log_post(&self, x: &SbmState) -> f64 {
        x.log_post
    }

    fn propose_move(&self, x: &SbmState, rng: &mut dyn RngCore) -> (SbmMove, f64, f64) {
        let node = rng.random_range(0..self.p());
        let offset = rng.random_range(1..self.hyper.k);
        let new_label = (x.labels[node] + offset) % self.hyper.k;
        let d = self.log_flip_density();
        (SbmMove { node, new_label }, d, d)
    }

    fn eval_move(&self, x: &SbmState, mv: &SbmMove) -> f64 {
        let old = x.labels[mv.node];
        if old == mv.new_label {
            return x.log_post;
        }
        let mut sizes = x.sizes.clone();
        sizes[old] -= 1;
        sizes[mv.new_label] += 1;
        let p = self.p();
        if !self.hyper.size_in_support(sizes[old], p)
            || !self.hyper.size_in_support(sizes[mv.new_label], p)
        {
            return f64::NEG_INFINITY;
        }
        let e = self.edge_profile(&x.labels, mv.node);
        let mut counts = x.counts.clone();
        Self::shift_counts(&mut counts, &e, old, mv.new_label);
        self.log_post_from(&sizes, &counts)
    }

    fn apply_move(&self, x: &SbmState, mv: &SbmMove) -> SbmState {
        let mut next = x.clone();
        let old = next.labels[mv.node];
        if old == mv.new_label {
            return next;
        }
        let e = self.edge_profile(&next.labels, mv.node);
        Self::shift_counts(&mut next.counts, &e, old, mv.new_label);
        next.labels[mv.node] = mv.new_label;
        next.sizes[old] -= 1;
        next.sizes[mv.new_label] += 1;
        next.log_post = self.log_post_from(&next.sizes, &next.counts);
        next
    }

    fn neighborhood_size(&self, _x: &SbmState) -> usize {
        self.p() * (self.hyper.k - 1)
    }

    fn enumerate_moves(&self, x: &SbmState) -> Option<Vec<Trial<SbmMove>>> {
        let d = self.log_flip_density();
        let mut out = Vec::with_capacity(self.neighborhood_size(x));
        for node in 0..self.p() {
            for new_label in 0..self.hyper.k {
                if new_label != x.labels[node] {
                    let mv = SbmMove { node, new_label };
                    out.push(Trial {
                        log_post: self.eval_move(x, &mv),
                        mv,
                        log_fwd: d,
                        log_rev: d,
                    });
                }
            }
        }
        Some(out)
    }

    /// Fingerprint of the canonical relabeling (labels renumbered by first
    /// occurrence), so permutation-equivalent partitions collapse.
    fn fingerprint(&self, x: &SbmState) -> u64 {
        let k = self.hyper.k;
        let mut map = vec![usize::MAX; k];
        let mut next = 0;
        let canon = x.labels.iter().map(|&l| {
            if map[l] == usize::MAX {
                map[l] = next;
                next += 1;
            }
            map[l] as u32
        });
        fnv1a(canon.flat_map(u32::to_le_bytes))
    }
}

/// Minimum Hamming distance between `z` and any block relabeling of
/// `z_prime`. Exact permutation enumeration up to K = 10, optimal assignment
/// on the confusion matrix beyond.
pub fn perm_invariant_hamming(z: &[usize], z_prime: &[usize], k: usize) -> Result<usize> {
    if z.len() != z_prime.len() {
        return Err(Error::InvalidConfig(format!(
            "partition lengths differ: {} vs {}",
            z.len(),
            z_prime.len()
        )));
    }
    let mut confusion = vec![vec![0i64; k]; k];
    for (&a, &b) in z.iter().zip(z_prime) {
        if a >= k {
            return Err(Error::LabelOutOfRange { label: a, k });
        }
        if b >= k {
            return Err(Error::LabelOutOfRange { label: b, k });
        }
        confusion[a][b] += 1;
    }
    let best_agreement = if k <= 10 {
        let mut best = 0i64;
        let mut perm: Vec<usize> = (0..k).collect();
        permute(&mut perm, 0, &mut |sigma| {
            let agree: i64 = (0..k).map(|v| confusion[sigma[v]][v]).sum();
            best = best.max(agree);
        });
        best
    } else {
        let weights = pathfinding::matrix::Matrix::from_rows(confusion)
            .expect("square confusion matrix");
        pathfinding::kuhn_munkres::kuhn_munkres(&weights).0
    };
    Ok(z.len() - best_agreement as usize)
}

fn permute(v: &mut Vec<usize>, at: usize, f: &mut impl FnMut(&[usize])) {
    if at == v.len() {
        f(v);
        return;
    }
    for i in at..v.len() {
        v.swap(at, i);
        permute(v, at + 1, f);
        v.swap(at, i);
    }
}

/// Corrupts `z_star` by random relabels of `distance` distinct nodes until
/// the permutation-invariant distance hits `distance` exactly.
pub fn partition_at_distance<R: Rng + ?Sized>(
    z_star: &[usize],
    k: usize,
    distance: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let p = z_star.len();
    if distance > p {
        return Err(Error::InitialDistanceUnsatisfiable(distance));
    }
    for _ in 0..10_000 {
        let mut z = z_star.to_vec();
        let mut idx: Vec<usize> = (0..p).collect();
        for i in 0..distance {
            let j = rng.random_range(i..p);
            idx.swap(i, j);
        }
        for &i in &idx[..distance] {
            let offset = rng.random_range(1..k);
            z[i] = (z[i] + offset) % k;
        }
        if perm_invariant_hamming(&z, z_star, k)? == distance {
            return Ok(z);
        }
    }
    Err(Error::InitialDistanceUnsatisfiable(distance))
}
