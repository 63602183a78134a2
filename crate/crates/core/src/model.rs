//! The target-model abstraction shared by every sampler in this crate.

use rand::RngCore;

/// A candidate move out of the current state, together with the neighbor's log
/// posterior and the forward/reverse proposal log densities
/// `log K_RW(x, y)` and `log K_RW(y, x)`.
#[derive(Debug, Clone)]
pub struct Trial<Mv> {
    pub mv: Mv,
    pub log_post: f64,
    pub log_fwd: f64,
    pub log_rev: f64,
}

/// A discrete sampling target: an unnormalized log posterior over states plus
/// a symmetric neighborhood relation with a random-walk proposal kernel.
///
/// Moves are separated from states so that trial posteriors can be evaluated
/// speculatively (and in parallel) against one immutable base state, while
/// only the accepted move pays for a committed state update. `log_post` and
/// `eval_move` are pure reads and must be safe to call concurrently.
pub trait ModelSpace: Sync {
    type State: Clone + Send + Sync;
    type Move: Clone + Send + Sync;

    /// Log posterior up to an additive constant; `-inf` marks states outside
    /// the support.
    fn log_post(&self, x: &Self::State) -> f64;

    /// Draw a move uniformly per the model's random-walk kernel, returning
    /// `(move, log K_RW(x,y), log K_RW(y,x))`. Does not evaluate the
    /// posterior.
    fn propose_move(&self, x: &Self::State, rng: &mut dyn RngCore) -> (Self::Move, f64, f64);

    /// Log posterior of the neighbor reached by `mv` from `x`, without
    /// committing the move.
    fn eval_move(&self, x: &Self::State, mv: &Self::Move) -> f64;

    /// Commit a move, producing the neighbor's full state (including any
    /// incremental caches it carries).
    fn apply_move(&self, x: &Self::State, mv: &Self::Move) -> Self::State;

    /// `|N(x)|`, the support size of the proposal kernel at `x`.
    fn neighborhood_size(&self, x: &Self::State) -> usize;

    /// Full neighborhood enumeration, when the model supports it. Required by
    /// the trial tuner, the pointwise informed sampler and the spectral lab.
    fn enumerate_moves(&self, _x: &Self::State) -> Option<Vec<Trial<Self::Move>>> {
        None
    }

    /// 64-bit fingerprint of a canonical encoding of `x`, used for
    /// unique-state counting and hit detection bookkeeping.
    fn fingerprint(&self, x: &Self::State) -> u64;

    /// Convenience: propose, evaluate and package a trial.
    fn sample_trial(&self, x: &Self::State, rng: &mut dyn RngCore) -> Trial<Self::Move> {
        let (mv, log_fwd, log_rev) = self.propose_move(x, rng);
        let log_post = self.eval_move(x, &mv);
        Trial { mv, log_post, log_fwd, log_rev }
    }
}

/// FNV-1a over a byte encoding; stable across runs and platforms.
pub fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
