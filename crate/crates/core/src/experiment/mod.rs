//! Replicate experiments: hitting-time metrics, effective sample size, and
//! CSV/JSON reports.
//!
//! A replicate generates its own dataset from a derived seed, builds an
//! initial state from a distance rule, runs one chain, and records how many
//! iterations (`H`) and how many wall-clock seconds (`T_H`) it took to hit
//! the data-generating state. Chains that exhaust their budget are censored;
//! a configuration where more than half the replicates are censored reports
//! no median at all rather than a misleading one.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvs::{generate_dataset, BvsGenSpec, BvsHyper, BvsModel, Gamma};
use crate::error::{Error, Result};
use crate::model::ModelSpace;
use crate::sampler::{
    run_chain, run_chain_lbmh, splitmix64, HookAction, MtmConfig, SamplerSpec, StepStats,
};
use crate::sbm::{
    generate_graph, partition_at_distance, perm_invariant_hamming, SbmHyper, SbmModel,
};
use crate::spectral::EnumeratedSpace;
use crate::tuner::{neighbor_log_ratio_scan, select_num_trials, TunerEstimates};
use crate::weights::{Balancing, WeightSpec};

/// Which synthetic target a replicate samples.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelConfig {
    Bvs {
        #[serde(flatten)]
        gen: BvsGenSpec,
        /// Model-size cap; defaults to min(100, p).
        #[serde(default)]
        s_max: Option<usize>,
    },
    Sbm {
        p: usize,
        k: usize,
        /// Within-block edge probability.
        a: f64,
        /// Across-block edge probability.
        b: f64,
    },
    /// Hypercube toy target, pi(x) proportional to exp(-d_H(x, x*)), with
    /// the mode at the all-ones corner.
    Toy { m: usize },
}

impl ModelConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ModelConfig::Bvs { .. } => "bvs",
            ModelConfig::Sbm { .. } => "sbm",
            ModelConfig::Toy { .. } => "toy",
        }
    }
}

/// How the initial state relates to the data-generating state.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InitRule {
    /// Start at the truth itself (H = 0 by construction).
    Truth,
    /// Exactly `distance` coordinate disagreements with the truth
    /// (permutation-invariant for block models).
    HammingFromTruth { distance: usize },
    /// A random model of `size` variables sharing nothing with the true
    /// support. Variable selection only.
    DisjointRandom { size: usize },
    /// The empty model. Variable selection only.
    Null,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub sampler: SamplerSpec,
    pub replicates: usize,
    /// Iteration budget per replicate.
    pub iters: usize,
    pub init: InitRule,
    /// Burn-in for the ESS metric; defaults to 20% of the budget.
    #[serde(default)]
    pub burn_in: Option<usize>,
    pub seed: u64,
    /// When false, chains always run the full budget and H is not measured.
    #[serde(default = "default_true")]
    pub hit_detection: bool,
}

fn default_true() -> bool {
    true
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 || self.iters == 0 {
            return Err(Error::InvalidConfig(
                "replicates and the iteration budget must be positive".into(),
            ));
        }
        if let Some(b) = self.burn_in {
            if b >= self.iters {
                return Err(Error::InvalidConfig(format!(
                    "burn-in {b} must be below the budget {}",
                    self.iters
                )));
            }
        }
        Ok(())
    }

    pub fn burn_in_or_default(&self) -> usize {
        self.burn_in.unwrap_or(self.iters / 5)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub seed: u64,
    /// Iterations until the chain first sat at the truth; None = censored.
    pub hit_iter: Option<usize>,
    pub censored: bool,
    /// Wall-clock seconds of sampling until the hit; excludes data
    /// generation, initial-state construction, and reporting.
    pub t_h_seconds: Option<f64>,
    pub acc_rate: f64,
    /// Distinct visited states, counted through 64-bit fingerprints of
    /// canonical encodings. At trace lengths up to 1e7 the collision
    /// probability is below 3e-6, negligible for this count.
    pub unique_states: usize,
    /// None when the chain hit (trace truncated) or the distance series was
    /// too short or constant.
    pub ess: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub hits: usize,
    pub replicates: usize,
    /// None when at most half the replicates hit ("Fail").
    pub median_h: Option<f64>,
    pub median_t_h_seconds: Option<f64>,
    pub median_acc_rate: f64,
    pub median_ess: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReplicateRow>,
    pub summary: Summary,
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Medians under the censoring convention: H and T_H medians are taken over
/// the uncensored replicates, and only reported when strictly more than half
/// of the replicates hit.
pub fn summarize(rows: &[ReplicateRow]) -> Summary {
    let hits = rows.iter().filter(|r| r.hit_iter.is_some()).count();
    let majority = 2 * hits > rows.len();
    let over = |f: &dyn Fn(&ReplicateRow) -> Option<f64>| {
        median(&mut rows.iter().filter_map(f).collect())
    };
    Summary {
        hits,
        replicates: rows.len(),
        median_h: if majority {
            over(&|r| r.hit_iter.map(|h| h as f64))
        } else {
            None
        },
        median_t_h_seconds: if majority { over(&|r| r.t_h_seconds) } else { None },
        median_acc_rate: over(&|r| Some(r.acc_rate)).unwrap_or(0.0),
        median_ess: over(&|r| r.ess),
    }
}

fn replicate_seed(master: u64, replicate: usize) -> u64 {
    splitmix64(master ^ (replicate as u64 + 1).wrapping_mul(0xA24BAED4963EE407))
}

struct RepMetrics {
    hit_iter: Option<usize>,
    t_h_seconds: Option<f64>,
    acc_rate: f64,
    unique_states: usize,
    ess: Option<f64>,
}

/// One chain with hit detection and metric accumulation. `snap` projects a
/// state to the cheap representation the ESS distance works on; full states
/// are never retained.
fn run_one<M, S>(
    model: &M,
    x0: M::State,
    target: Option<&M::State>,
    sampler: &SamplerSpec,
    iters: usize,
    burn_in: usize,
    chain_seed: u64,
    snap: impl Fn(&M::State) -> S,
    dist: impl Fn(&S, &S) -> f64,
) -> Result<RepMetrics>
where
    M: ModelSpace,
{
    let target_fp = target.map(|t| model.fingerprint(t));
    if target_fp == Some(model.fingerprint(&x0)) {
        return Ok(RepMetrics {
            hit_iter: Some(0),
            t_h_seconds: Some(0.0),
            acc_rate: 0.0,
            unique_states: 1,
            ess: None,
        });
    }

    // Distance snapshots exist for the ESS metric, which is reported on
    // fixed-budget runs only; hitting runs stop early and would pin
    // arbitrarily long state histories in memory.
    let record_ess = target_fp.is_none();
    let mut snaps: Vec<S> = Vec::new();
    let mut log_posts: Vec<f64> = Vec::new();
    let mut unique: HashSet<u64> = HashSet::new();
    unique.insert(model.fingerprint(&x0));
    let mut steps = 0usize;
    let mut accepts = 0usize;
    let mut hit_iter = None;
    let hook = |t: usize, s: &M::State, stats: &StepStats| {
        steps += 1;
        if stats.accepted {
            accepts += 1;
        }
        let fp = model.fingerprint(s);
        unique.insert(fp);
        if record_ess {
            snaps.push(snap(s));
            log_posts.push(model.log_post(s));
        }
        if target_fp == Some(fp) {
            // The chain reached the truth after step t, i.e. as state x_{t+1}.
            hit_iter = Some(t + 1);
            return HookAction::Stop;
        }
        HookAction::Continue
    };

    let clock = Instant::now();
    match sampler {
        // A single balanced trial is exact Metropolis-Hastings including the
        // proposal-density correction, which the unscaled weight drops.
        SamplerSpec::Mh => {
            let cfg = MtmConfig::new(
                1,
                WeightSpec::Balanced { balancing: Balancing::Min1 },
                chain_seed,
            );
            run_chain(model, x0, &cfg, iters, hook)?;
        }
        SamplerSpec::Mtm { num_trials, weight } => {
            let cfg = MtmConfig::new(*num_trials, *weight, chain_seed);
            run_chain(model, x0, &cfg, iters, hook)?;
        }
        SamplerSpec::Lbmh { balancing } => {
            run_chain_lbmh(model, x0, *balancing, chain_seed, iters, hook)?;
        }
    }
    let elapsed = clock.elapsed().as_secs_f64();

    let ess = if record_ess && snaps.len() > burn_in + 10 {
        ess_hamming(&snaps, &log_posts, &dist, burn_in).ok()
    } else {
        None
    };
    Ok(RepMetrics {
        hit_iter,
        t_h_seconds: hit_iter.map(|_| elapsed),
        acc_rate: if steps == 0 { 0.0 } else { accepts as f64 / steps as f64 },
        unique_states: unique.len(),
        ess,
    })
}

fn bvs_initial(
    model: &BvsModel,
    support: &[usize],
    rule: InitRule,
    rng: &mut ChaCha8Rng,
) -> Result<crate::bvs::BvsState> {
    let p = model.p();
    let truth = Gamma::from_indices(p, support);
    let gamma = match rule {
        InitRule::Truth => truth,
        InitRule::Null => Gamma::empty(p),
        InitRule::HammingFromTruth { distance } => {
            if distance > p {
                return Err(Error::InitialDistanceUnsatisfiable(distance));
            }
            let mut found = None;
            for _ in 0..10_000 {
                let mut g = truth.clone();
                let mut idx: Vec<usize> = (0..p).collect();
                for i in 0..distance {
                    let j = rng.random_range(i..p);
                    idx.swap(i, j);
                }
                for &j in &idx[..distance] {
                    g.set(j, !g.contains(j));
                }
                if g.size() <= model.hyper().s_max {
                    found = Some(g);
                    break;
                }
            }
            found.ok_or(Error::InitialDistanceUnsatisfiable(distance))?
        }
        InitRule::DisjointRandom { size } => {
            let pool: Vec<usize> = (0..p).filter(|j| !truth.contains(*j)).collect();
            if size > pool.len() || size > model.hyper().s_max {
                return Err(Error::InitialDistanceUnsatisfiable(size));
            }
            let mut pool = pool;
            for i in 0..size {
                let j = rng.random_range(i..pool.len());
                pool.swap(i, j);
            }
            Gamma::from_indices(p, &pool[..size])
        }
    };
    model.state_from_gamma(gamma)
}

fn run_bvs_replicate(
    gen: &BvsGenSpec,
    s_max: Option<usize>,
    config: &ExperimentConfig,
    rep_seed: u64,
) -> Result<RepMetrics> {
    let mut data_rng = ChaCha8Rng::seed_from_u64(splitmix64(rep_seed ^ 1));
    let (data, support, _beta) = generate_dataset(gen, &mut data_rng)?;
    let mut hyper = BvsHyper::defaults_for(gen.p);
    if let Some(s) = s_max {
        hyper.s_max = s;
    }
    let model = BvsModel::new(data, hyper)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(splitmix64(rep_seed ^ 3));
    let x0 = bvs_initial(&model, &support, config.init, &mut init_rng)?;
    let target = if config.hit_detection {
        Some(model.state_from_gamma(Gamma::from_indices(gen.p, &support))?)
    } else {
        None
    };
    run_one(
        &model,
        x0,
        target.as_ref(),
        &config.sampler,
        config.iters,
        config.burn_in_or_default(),
        splitmix64(rep_seed ^ 2),
        |s| s.gamma.clone(),
        |a: &Gamma, b: &Gamma| a.hamming(b) as f64,
    )
}

fn run_sbm_replicate(
    p: usize,
    k: usize,
    a: f64,
    b: f64,
    config: &ExperimentConfig,
    rep_seed: u64,
) -> Result<RepMetrics> {
    let mut data_rng = ChaCha8Rng::seed_from_u64(splitmix64(rep_seed ^ 1));
    let (graph, truth) = generate_graph(p, k, a, b, &mut data_rng)?;
    let model = SbmModel::new(graph, SbmHyper::defaults_for(k))?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(splitmix64(rep_seed ^ 3));
    let z0 = match config.init {
        InitRule::Truth => truth.clone(),
        InitRule::HammingFromTruth { distance } => {
            partition_at_distance(&truth, k, distance, &mut init_rng)?
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "{other:?} is a variable-selection rule; block models start \
                 from the truth or at a fixed distance"
            )))
        }
    };
    let x0 = model.state_from_labels(z0)?;
    let target = if config.hit_detection {
        Some(model.state_from_labels(truth)?)
    } else {
        None
    };
    run_one(
        &model,
        x0,
        target.as_ref(),
        &config.sampler,
        config.iters,
        config.burn_in_or_default(),
        splitmix64(rep_seed ^ 2),
        |s| s.labels.clone(),
        |a: &Vec<usize>, b: &Vec<usize>| {
            perm_invariant_hamming(a, b, k).expect("equal-length label vectors") as f64
        },
    )
}

fn run_toy_replicate(m: usize, config: &ExperimentConfig, rep_seed: u64) -> Result<RepMetrics> {
    let mode: usize = (1usize << m) - 1;
    let space = EnumeratedSpace::hypercube(m, mode as u64)?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(splitmix64(rep_seed ^ 3));
    let x0 = match config.init {
        InitRule::Truth => mode,
        InitRule::HammingFromTruth { distance } => {
            if distance > m {
                return Err(Error::InitialDistanceUnsatisfiable(distance));
            }
            let mut idx: Vec<usize> = (0..m).collect();
            for i in 0..distance {
                let j = init_rng.random_range(i..m);
                idx.swap(i, j);
            }
            idx[..distance].iter().fold(mode, |x, &b| x ^ (1 << b))
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "{other:?} is a variable-selection rule; the toy target starts \
                 from the mode or at a fixed distance"
            )))
        }
    };
    let target = config.hit_detection.then_some(mode);
    run_one(
        &space,
        x0,
        target.as_ref(),
        &config.sampler,
        config.iters,
        config.burn_in_or_default(),
        splitmix64(rep_seed ^ 2),
        |s| *s,
        |a: &usize, b: &usize| (a ^ b).count_ones() as f64,
    )
}

/// Runs every replicate on the rayon pool. Replicate seeds derive from the
/// master seed and the replicate index alone, so results are independent of
/// thread count and scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let rows: Result<Vec<ReplicateRow>> = (0..config.replicates)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = replicate_seed(config.seed, rep);
            let metrics = match &config.model {
                ModelConfig::Bvs { gen, s_max } => {
                    run_bvs_replicate(gen, *s_max, config, rep_seed)?
                }
                ModelConfig::Sbm { p, k, a, b } => {
                    run_sbm_replicate(*p, *k, *a, *b, config, rep_seed)?
                }
                ModelConfig::Toy { m } => run_toy_replicate(*m, config, rep_seed)?,
            };
            Ok(ReplicateRow {
                replicate: rep,
                seed: rep_seed,
                hit_iter: metrics.hit_iter,
                censored: config.hit_detection && metrics.hit_iter.is_none(),
                t_h_seconds: metrics.t_h_seconds,
                acc_rate: metrics.acc_rate,
                unique_states: metrics.unique_states,
                ess: metrics.ess,
            })
        })
        .collect();
    let rows = rows?;
    let summary = summarize(&rows);
    Ok(ExperimentReport { config: config.clone(), rows, summary })
}

/// Builds replicate 0 of a configuration (same derived seeds as
/// [`run_experiment`]) and runs the trial-count selection on its initial
/// state's neighborhood.
pub fn tune_first_replicate(config: &ExperimentConfig, psi: f64) -> Result<TunerEstimates> {
    config.validate()?;
    let rep_seed = replicate_seed(config.seed, 0);
    let mut data_rng = ChaCha8Rng::seed_from_u64(splitmix64(rep_seed ^ 1));
    let mut init_rng = ChaCha8Rng::seed_from_u64(splitmix64(rep_seed ^ 3));
    let scan = match &config.model {
        ModelConfig::Bvs { gen, s_max } => {
            let (data, support, _) = generate_dataset(gen, &mut data_rng)?;
            let mut hyper = BvsHyper::defaults_for(gen.p);
            if let Some(s) = s_max {
                hyper.s_max = *s;
            }
            let model = BvsModel::new(data, hyper)?;
            let x0 = bvs_initial(&model, &support, config.init, &mut init_rng)?;
            neighbor_log_ratio_scan(&model, &x0, gen.p as u64)?
        }
        ModelConfig::Sbm { p, k, a, b } => {
            let (graph, truth) = generate_graph(*p, *k, *a, *b, &mut data_rng)?;
            let model = SbmModel::new(graph, SbmHyper::defaults_for(*k))?;
            let z0 = match config.init {
                InitRule::Truth => truth,
                InitRule::HammingFromTruth { distance } => {
                    partition_at_distance(&truth, *k, distance, &mut init_rng)?
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "{other:?} is a variable-selection rule"
                    )))
                }
            };
            let x0 = model.state_from_labels(z0)?;
            neighbor_log_ratio_scan(&model, &x0, *p as u64)?
        }
        ModelConfig::Toy { m } => {
            let mode: usize = (1usize << m) - 1;
            let space = EnumeratedSpace::hypercube(*m, mode as u64)?;
            let x0 = match config.init {
                InitRule::Truth => mode,
                InitRule::HammingFromTruth { distance } if distance <= *m => {
                    (0..distance).fold(mode, |x, b| x ^ (1 << b))
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "{other:?} not supported on the toy target"
                    )))
                }
            };
            neighbor_log_ratio_scan(&space, &x0, 1u64 << m)?
        }
    };
    select_num_trials(&scan, psi)
}

/// Effective sample size of the series of distances from the highest-
/// posterior state observed in the trace. The reference maximizes
/// `log_posts` over the whole trace (ties to the earliest), the series runs
/// from `burn_in` on, and the autocorrelation sum is truncated by the
/// initial-positive-sequence rule.
pub fn ess_hamming<S>(
    states: &[S],
    log_posts: &[f64],
    dist: impl Fn(&S, &S) -> f64,
    burn_in: usize,
) -> Result<f64> {
    assert_eq!(states.len(), log_posts.len());
    if states.len() <= burn_in + 10 {
        return Err(Error::TraceTooShort { len: states.len(), burn_in });
    }
    let reference = log_posts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| &states[i])
        .expect("nonempty trace");
    let series: Vec<f64> = states[burn_in..].iter().map(|s| dist(reference, s)).collect();
    ess_from_series(&series)
}

/// `T / (1 + 2 sum rho_k)` with Geyer's initial-positive-sequence
/// truncation: consecutive autocorrelation pairs are summed while those pair
/// sums stay positive.
pub fn ess_from_series(series: &[f64]) -> Result<f64> {
    let t = series.len();
    if t <= 10 {
        return Err(Error::TraceTooShort { len: t, burn_in: 0 });
    }
    let mean = series.iter().sum::<f64>() / t as f64;
    let autocov = |lag: usize| {
        (0..t - lag)
            .map(|i| (series[i] - mean) * (series[i + lag] - mean))
            .sum::<f64>()
            / t as f64
    };
    let c0 = autocov(0);
    if c0 <= 0.0 || !c0.is_finite() {
        return Err(Error::ConstantSeries);
    }
    // tau = -1 + 2 * sum of pair sums (rho_{2m} + rho_{2m+1}); the m = 0 pair
    // contains rho_0 = 1.
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < t {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    Ok(t as f64 / tau.max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

pub const CSV_COLUMNS: &str =
    "model,weight,N,replicate,seed,H,censored,T_H_seconds,acc_rate,unique_states,ess";

fn sampler_columns(spec: &SamplerSpec) -> (String, usize) {
    match spec {
        SamplerSpec::Mh => ("none".into(), 1),
        SamplerSpec::Mtm { num_trials, weight } => (weight.to_string(), *num_trials),
        SamplerSpec::Lbmh { balancing } => (format!("lbmh-{balancing}"), 0),
    }
}

fn fmt_real(v: f64) -> String {
    // 17 significant digits round-trips every finite f64.
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

/// Renders the per-replicate table. The CSV column order is fixed; the JSON
/// form mirrors the rows and additionally embeds the full resolved config
/// and summary.
pub fn render_report(
    report: &ExperimentReport,
    w: &mut dyn std::io::Write,
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut *w, report)?;
            writeln!(w)?;
        }
        ReportFormat::Csv => {
            writeln!(w, "{CSV_COLUMNS}")?;
            let model = report.config.model.label();
            let (weight, n) = sampler_columns(&report.config.sampler);
            for r in &report.rows {
                writeln!(
                    w,
                    "{model},{weight},{n},{},{},{},{},{},{},{},{}",
                    r.replicate,
                    r.seed,
                    r.hit_iter.map(|h| h.to_string()).unwrap_or_default(),
                    r.censored,
                    fmt_opt(r.t_h_seconds),
                    fmt_real(r.acc_rate),
                    r.unique_states,
                    fmt_opt(r.ess),
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    render_report(report, &mut f, format)
}

pub fn read_report_json(path: &Path) -> Result<ExperimentReport> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}
