//! Step kernels and chain orchestration: the multiple-try Metropolis step,
//! the pointwise informed (exhaustive-neighborhood) baseline, and `run_chain`.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::{categorical_from_log_weights, log_sum_exp};
use crate::model::{ModelSpace, Trial};
use crate::weights::{Balancing, WeightSpec};

/// Trial counts at or above this evaluate posteriors through the rayon pool.
const PARALLEL_EVAL_MIN: usize = 64;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MtmConfig {
    /// Number of trials N >= 1. N = 1 reduces the step to standard
    /// random-walk Metropolis-Hastings.
    pub num_trials: usize,
    pub weight: WeightSpec,
    pub seed: u64,
}

impl MtmConfig {
    pub fn new(num_trials: usize, weight: WeightSpec, seed: u64) -> Self {
        assert!(num_trials >= 1, "num_trials must be >= 1");
        Self { num_trials, weight, seed }
    }
}

/// Outcome of a single step.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub accepted: bool,
    pub log_alpha: f64,
    pub proposal_log_post: f64,
    /// Posterior evaluations spent on weights: `2N - 1` whenever a proposal
    /// was selected, `N` on degenerate selection.
    pub weight_evals: usize,
}

fn eval_moves<M: ModelSpace>(model: &M, x: &M::State, moves: &[(M::Move, f64, f64)]) -> Vec<f64> {
    if moves.len() >= PARALLEL_EVAL_MIN {
        moves.par_iter().map(|(mv, _, _)| model.eval_move(x, mv)).collect()
    } else {
        moves.iter().map(|(mv, _, _)| model.eval_move(x, mv)).collect()
    }
}

/// One multiple-try Metropolis step from `x`.
///
/// Trials are drawn with replacement. The acceptance ratio compares the sum
/// of the N trial weights against the weight of the reverse move plus N - 1
/// reference trials drawn from the proposal's neighborhood; everything is
/// accumulated with log-sum-exp. Returns `x` unchanged on rejection or when
/// every trial weight is `-inf` (all trials outside the support).
pub fn mtm_step<M: ModelSpace>(
    model: &M,
    x: &M::State,
    config: &MtmConfig,
    rng: &mut dyn RngCore,
) -> (M::State, StepStats) {
    let n = config.num_trials;
    let weight = config.weight;
    let log_post_x = model.log_post(x);

    // Step 1: N trials from N(x), with replacement.
    let trials: Vec<(M::Move, f64, f64)> =
        (0..n).map(|_| model.propose_move(x, rng)).collect();
    let trial_posts = eval_moves(model, x, &trials);
    let trial_logw: Vec<f64> = trials
        .iter()
        .zip(&trial_posts)
        .map(|(&(_, log_fwd, log_rev), &lp)| weight.log_weight(log_post_x, lp, log_fwd, log_rev))
        .collect();

    // Step 2: select the proposal in proportion to its weight.
    let selected = match categorical_from_log_weights(&trial_logw, rng) {
        Ok(j) => j,
        Err(_) => {
            return (
                x.clone(),
                StepStats {
                    accepted: false,
                    log_alpha: f64::NEG_INFINITY,
                    proposal_log_post: f64::NEG_INFINITY,
                    weight_evals: n,
                },
            );
        }
    };
    let (mv, log_fwd, log_rev) = trials[selected].clone();
    let log_post_y = trial_posts[selected];
    let y = model.apply_move(x, &mv);

    // Step 3: N - 1 reference trials from N(y), plus the reverse move x <- y.
    let refs: Vec<(M::Move, f64, f64)> =
        (0..n - 1).map(|_| model.propose_move(&y, rng)).collect();
    let ref_posts = eval_moves(model, &y, &refs);
    let mut denom_logw: Vec<f64> = Vec::with_capacity(n);
    denom_logw.push(weight.log_weight(log_post_y, log_post_x, log_rev, log_fwd));
    denom_logw.extend(refs.iter().zip(&ref_posts).map(|(&(_, lf, lr), &lp)| {
        weight.log_weight(log_post_y, lp, lf, lr)
    }));

    let log_alpha = (log_sum_exp(&trial_logw) - log_sum_exp(&denom_logw)).min(0.0);

    // Step 4: accept with probability exp(log_alpha).
    let accepted = log_alpha == 0.0 || rng.random::<f64>().ln() < log_alpha;
    let stats = StepStats {
        accepted,
        log_alpha,
        proposal_log_post: log_post_y,
        weight_evals: 2 * n - 1,
    };
    if accepted {
        (y, stats)
    } else {
        (x.clone(), stats)
    }
}

/// Cached neighborhood table for the pointwise informed sampler: the full
/// proposal distribution and its log normalizer, reusable while the chain
/// sits at the same state.
pub struct LbmhCache<M: ModelSpace> {
    entry: Option<(u64, NeighborTable<M::Move>)>,
}

struct NeighborTable<Mv> {
    trials: Vec<Trial<Mv>>,
    log_q: Vec<f64>,
    log_z: f64,
}

impl<M: ModelSpace> Default for LbmhCache<M> {
    fn default() -> Self {
        Self { entry: None }
    }
}

impl<M: ModelSpace> LbmhCache<M> {
    pub fn new() -> Self {
        Self::default()
    }
}

fn build_table<M: ModelSpace>(
    model: &M,
    x: &M::State,
    balancing: Balancing,
) -> Result<NeighborTable<M::Move>> {
    let trials = model
        .enumerate_moves(x)
        .ok_or(Error::EnumerationUnsupported("lbmh_step"))?;
    let log_post_x = model.log_post(x);
    let log_q: Vec<f64> = trials
        .iter()
        .map(|t| balancing.log_eval(t.log_post - log_post_x) + t.log_fwd)
        .collect();
    let log_z = log_sum_exp(&log_q);
    Ok(NeighborTable { trials, log_q, log_z })
}

/// One step of the exhaustive-neighborhood informed sampler: propose from
/// `Q_h(x, y) ∝ h(pi(y)/pi(x)) K_sym(x, y)` and accept with
/// `min(1, Z_h(x)/Z_h(y))`. The neighborhood table of the current state is
/// reused from `cache` when the chain has not moved.
pub fn lbmh_step<M: ModelSpace>(
    model: &M,
    x: &M::State,
    balancing: Balancing,
    cache: &mut LbmhCache<M>,
    rng: &mut dyn RngCore,
) -> Result<(M::State, StepStats)> {
    let fp_x = model.fingerprint(x);
    let mut evals = 0usize;
    let table_x = match cache.entry.take() {
        Some((fp, table)) if fp == fp_x => table,
        _ => {
            let t = build_table(model, x, balancing)?;
            evals += t.trials.len();
            t
        }
    };

    let selected = match categorical_from_log_weights(&table_x.log_q, rng) {
        Ok(j) => j,
        Err(_) => {
            let stats = StepStats {
                accepted: false,
                log_alpha: f64::NEG_INFINITY,
                proposal_log_post: f64::NEG_INFINITY,
                weight_evals: evals,
            };
            cache.entry = Some((fp_x, table_x));
            return Ok((x.clone(), stats));
        }
    };
    let y = model.apply_move(x, &table_x.trials[selected].mv);
    let log_post_y = table_x.trials[selected].log_post;

    let table_y = build_table(model, &y, balancing)?;
    evals += table_y.trials.len();

    let log_alpha = (table_x.log_z - table_y.log_z).min(0.0);
    let accepted = log_alpha == 0.0 || rng.random::<f64>().ln() < log_alpha;
    let stats = StepStats {
        accepted,
        log_alpha,
        proposal_log_post: log_post_y,
        weight_evals: evals,
    };
    if accepted {
        cache.entry = Some((model.fingerprint(&y), table_y));
        Ok((y, stats))
    } else {
        cache.entry = Some((fp_x, table_x));
        Ok((x.clone(), stats))
    }
}

/// Sampler selector used by chain runners and the experiment harness.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerSpec {
    /// Single-try Metropolis-Hastings (the N = 1 special case).
    Mh,
    Mtm { num_trials: usize, weight: WeightSpec },
    Lbmh { balancing: Balancing },
}

impl SamplerSpec {
    pub fn label(&self) -> String {
        match self {
            SamplerSpec::Mh => "mh".into(),
            SamplerSpec::Mtm { num_trials, weight } => format!("mtm-{weight}-N{num_trials}"),
            SamplerSpec::Lbmh { balancing } => format!("lbmh-{balancing}"),
        }
    }
}

/// What a hook tells the runner after observing a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HookAction {
    Continue,
    Stop,
}

/// Per-iteration record of a finished (or hook-stopped) chain.
#[derive(Debug, Clone)]
pub struct ChainTrace<S> {
    pub log_post_series: Vec<f64>,
    pub state_fingerprints: Vec<u64>,
    pub acceptance_count: usize,
    /// Seconds since the chain started, one mark per iteration.
    pub wall_clock_marks: Vec<f64>,
    pub final_state: S,
}

impl<S> ChainTrace<S> {
    pub fn len(&self) -> usize {
        self.log_post_series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_post_series.is_empty()
    }
}

/// Deterministic per-step generator: early stopping or hook behavior in one
/// step cannot perturb the randomness of any later step.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(
        seed ^ (step.wrapping_add(1)).wrapping_mul(0x9E3779B97F4A7C15),
    ))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Run `iters` multiple-try steps from `x0`, deterministically in
/// `config.seed`. The hook observes `(t, state_after_step, stats)` and may
/// stop the chain early (e.g. on hitting a target state).
pub fn run_chain<M, F>(
    model: &M,
    x0: M::State,
    config: &MtmConfig,
    iters: usize,
    hook: F,
) -> Result<ChainTrace<M::State>>
where
    M: ModelSpace,
    F: FnMut(usize, &M::State, &StepStats) -> HookAction,
{
    run_with(model, x0, iters, config.seed, hook, |model, x, rng| {
        mtm_step(model, x, config, rng)
    })
}

/// Like [`run_chain`] but advancing with the pointwise informed sampler.
pub fn run_chain_lbmh<M, F>(
    model: &M,
    x0: M::State,
    balancing: Balancing,
    seed: u64,
    iters: usize,
    hook: F,
) -> Result<ChainTrace<M::State>>
where
    M: ModelSpace,
    F: FnMut(usize, &M::State, &StepStats) -> HookAction,
{
    let mut cache = LbmhCache::new();
    let mut out = Ok(());
    let trace = run_with(model, x0, iters, seed, hook, |model, x, rng| {
        match lbmh_step(model, x, balancing, &mut cache, rng) {
            Ok(pair) => pair,
            Err(e) => {
                out = Err(e);
                (
                    x.clone(),
                    StepStats {
                        accepted: false,
                        log_alpha: f64::NEG_INFINITY,
                        proposal_log_post: f64::NEG_INFINITY,
                        weight_evals: 0,
                    },
                )
            }
        }
    })?;
    out?;
    Ok(trace)
}

fn run_with<M, F, K>(
    model: &M,
    x0: M::State,
    iters: usize,
    seed: u64,
    mut hook: F,
    mut kernel: K,
) -> Result<ChainTrace<M::State>>
where
    M: ModelSpace,
    F: FnMut(usize, &M::State, &StepStats) -> HookAction,
    K: FnMut(&M, &M::State, &mut ChaCha8Rng) -> (M::State, StepStats),
{
    if model.log_post(&x0) == f64::NEG_INFINITY {
        return Err(Error::ZeroProbabilityStart);
    }
    let start = Instant::now();
    let mut state = x0;
    let mut trace = ChainTrace {
        log_post_series: Vec::with_capacity(iters),
        state_fingerprints: Vec::with_capacity(iters),
        acceptance_count: 0,
        wall_clock_marks: Vec::with_capacity(iters),
        final_state: state.clone(),
    };
    for t in 0..iters {
        let mut rng = step_rng(seed, t as u64);
        let (next, stats) = kernel(model, &state, &mut rng);
        state = next;
        // A Stop at iteration t truncates the trace before t is recorded, so
        // an unconditional stop at t = 0 yields an empty trace.
        if hook(t, &state, &stats) == HookAction::Stop {
            break;
        }
        trace.log_post_series.push(model.log_post(&state));
        trace.state_fingerprints.push(model.fingerprint(&state));
        trace.wall_clock_marks.push(start.elapsed().as_secs_f64());
        if stats.accepted {
            trace.acceptance_count += 1;
        }
    }
    trace.final_state = state;
    Ok(trace)
}
