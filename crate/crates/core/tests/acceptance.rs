//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line (run with `--nocapture` to see them on success).
//!
//! Criteria 1-3 are desk-scale replicate experiments (minutes); criterion 4
//! is the full-scale reproduction (hours) and stays behind `--ignored`.
//! Everything else runs in seconds.

use mtm_core::bvs::{BvsDesign, BvsGenSpec, BvsHyper, BvsModel, Gamma, SignalSpec};
use mtm_core::experiment::{
    ess_from_series, run_experiment, ExperimentConfig, InitRule, ModelConfig,
};
use mtm_core::sbm::{a_for_target_ch, generate_graph, SbmHyper, SbmModel};
use mtm_core::spectral::{
    congestion, detailed_balance_residual, exact_matrix, greedy_path_ensemble, sinclair_bound,
    stationarity_residual, tv_mixing_time, two_tier_acceptance, EnumeratedSpace,
    TwoTierLandscape,
};
use mtm_core::tuner::{select_num_trials, RatioScan};
use mtm_core::{Balancing, ModelSpace, SamplerSpec, WeightSpec};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DB_TOL: f64 = 1e-12;
const STATIONARITY_TOL: f64 = 1e-10;
const SSR_REL_TOL: f64 = 1e-8;
const ESS_REL_TOL: f64 = 0.15;
const FULL_SCALE_FACTOR: f64 = 2.0;

fn check(criterion: usize, ok: bool, detail: &str) {
    println!("criterion {criterion}: {} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

fn desk_bvs(sampler: SamplerSpec, iters: usize, replicates: usize) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelConfig::Bvs {
            gen: BvsGenSpec {
                n: 300,
                p: 1000,
                design: BvsDesign::Independent,
                signal: SignalSpec::ScaledPattern { snr: 4.0 },
            },
            s_max: Some(50),
        },
        sampler,
        replicates,
        iters,
        init: InitRule::HammingFromTruth { distance: 20 },
        burn_in: None,
        seed: 0xACCE01,
        hit_detection: true,
    }
}

fn mtm_sqrt(num_trials: usize) -> SamplerSpec {
    SamplerSpec::Mtm { num_trials, weight: WeightSpec::sqrt() }
}

fn median_h(config: &ExperimentConfig) -> Option<f64> {
    run_experiment(config).expect("experiment runs").summary.median_h
}

/// Balanced multiple-try proposals cut the hitting iteration count by at
/// least the trial factor margins on the desk-size selection problem.
#[test]
fn criterion_01_factor_n_speedup_bvs_desk() {
    let h_mh = median_h(&desk_bvs(SamplerSpec::Mh, 400_000, 20));
    let h_10 = median_h(&desk_bvs(mtm_sqrt(10), 100_000, 20));
    let h_50 = median_h(&desk_bvs(mtm_sqrt(50), 40_000, 20));
    let detail = format!("median H: mh {h_mh:?}, N=10 {h_10:?}, N=50 {h_50:?}");
    let ok = match (h_mh, h_10, h_50) {
        (Some(mh), Some(h10), Some(h50)) => h10 <= mh / 5.0 && h50 <= mh / 20.0,
        _ => false,
    };
    check(1, ok, &detail);
}

/// At N = 1000 the unscaled weight degrades: either its median hitting count
/// is at least 5x the balanced one, or it is censored in more than half the
/// replicates while the balanced sampler hits in over 90%.
#[test]
fn criterion_02_ordinary_weight_degrades_at_large_n() {
    let reps = 20;
    let iters = 3_000;
    let ord = run_experiment(&desk_bvs(
        SamplerSpec::Mtm { num_trials: 1000, weight: WeightSpec::Ordinary },
        iters,
        reps,
    ))
    .unwrap()
    .summary;
    let sqrt = run_experiment(&desk_bvs(mtm_sqrt(1000), iters, reps)).unwrap().summary;
    let ratio_ok = match (ord.median_h, sqrt.median_h) {
        (Some(o), Some(s)) => o >= 5.0 * s,
        _ => false,
    };
    let censor_ok =
        2 * ord.hits < reps && 10 * sqrt.hits > 9 * reps;
    let detail = format!(
        "ordinary: {}/{} hit, median {:?}; sqrt: {}/{} hit, median {:?}",
        ord.hits, reps, ord.median_h, sqrt.hits, reps, sqrt.median_h
    );
    check(2, ratio_ok || censor_ok, &detail);
}

/// Block-model desk scale at divergence 10: balanced N = 10 beats plain
/// Metropolis-Hastings by at least 3x in median hitting iterations.
#[test]
fn criterion_03_sbm_desk_speedup() {
    let (p, k) = (200usize, 2usize);
    let b = 0.01;
    let a = a_for_target_ch(b, 10.0, k, p);
    let config = |sampler, iters| ExperimentConfig {
        model: ModelConfig::Sbm { p, k, a, b },
        sampler,
        replicates: 10,
        iters,
        init: InitRule::HammingFromTruth { distance: 80 },
        burn_in: None,
        seed: 0xACCE03,
        hit_detection: true,
    };
    let h_mh = median_h(&config(SamplerSpec::Mh, 400_000));
    let h_10 = median_h(&config(mtm_sqrt(10), 100_000));
    let detail = format!("median H: mh {h_mh:?}, N=10 {h_10:?} (a={a:.4}, b={b})");
    let ok = match (h_mh, h_10) {
        (Some(mh), Some(h10)) => h10 <= mh / 3.0,
        _ => false,
    };
    check(3, ok, &detail);
}

/// Full-scale reproduction of the published hitting-iteration medians;
/// hours of runtime, excluded from routine runs.
#[test]
#[ignore]
fn criterion_04_full_scale_reproduction() {
    let config = |sampler, iters| ExperimentConfig {
        model: ModelConfig::Bvs {
            gen: BvsGenSpec {
                n: 1000,
                p: 5000,
                design: BvsDesign::Independent,
                signal: SignalSpec::ScaledPattern { snr: 4.0 },
            },
            s_max: Some(100),
        },
        sampler,
        replicates: 20,
        iters,
        init: InitRule::HammingFromTruth { distance: 20 },
        burn_in: None,
        seed: 0xACCE04,
        hit_detection: true,
    };
    // Each replicate holds a 5000 x 5000 Gram matrix (~200 MB); cap the
    // worker count to bound peak memory.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let (h_mh, h_10) = pool.install(|| {
        (
            median_h(&config(SamplerSpec::Mh, 400_000)),
            median_h(&config(mtm_sqrt(10), 100_000)),
        )
    });
    let detail = format!("median H: mh {h_mh:?} (expect ~19414), N=10 {h_10:?} (expect ~1787)");
    let within = |h: Option<f64>, reference: f64| {
        h.is_some_and(|h| h >= reference / FULL_SCALE_FACTOR && h <= reference * FULL_SCALE_FACTOR)
    };
    check(4, within(h_mh, 19414.0) && within(h_10, 1787.0), &detail);
}

fn toy_spaces() -> Vec<(&'static str, EnumeratedSpace)> {
    vec![
        ("hypercube3", EnumeratedSpace::hypercube(3, 0b110).unwrap()),
        ("hypercube4", EnumeratedSpace::hypercube(4, 0b1011).unwrap()),
        ("cycle3", EnumeratedSpace::cycle(&[4.0, 1.0, 2.0]).unwrap()),
    ]
}

fn toy_samplers() -> Vec<SamplerSpec> {
    let mut specs = Vec::new();
    for n in 1..=3 {
        for weight in WeightSpec::ALL {
            specs.push(SamplerSpec::Mtm { num_trials: n, weight });
        }
    }
    specs
}

/// Every exact multiple-try matrix on the toy spaces is reversible and
/// preserves the target distribution.
#[test]
fn criterion_05_reversibility_suite() {
    let mut worst_db: f64 = 0.0;
    let mut worst_pi: f64 = 0.0;
    for (name, space) in toy_spaces() {
        for spec in toy_samplers() {
            let p = exact_matrix(&space, &spec).unwrap();
            let db = detailed_balance_residual(&p, &space);
            let pi = stationarity_residual(&p, &space);
            assert!(
                db < DB_TOL && pi < STATIONARITY_TOL,
                "{name} / {}: db {db:.2e}, stationarity {pi:.2e}",
                spec.label()
            );
            worst_db = worst_db.max(db);
            worst_pi = worst_pi.max(pi);
        }
    }
    let detail = format!(
        "36 matrices: worst detailed-balance residual {worst_db:.2e} (< {DB_TOL:.0e}), \
         worst stationarity residual {worst_pi:.2e} (< {STATIONARITY_TOL:.0e})"
    );
    check(5, worst_db < DB_TOL && worst_pi < STATIONARITY_TOL, &detail);
}

/// The congestion bound from the greedy path ensemble dominates the measured
/// lazy mixing time on every toy/sampler combination.
#[test]
fn criterion_06_congestion_bound_sound() {
    let eps = 0.25;
    let mut worst_slack = f64::INFINITY;
    for (name, space) in toy_spaces() {
        let ensemble = greedy_path_ensemble(&space).unwrap();
        for spec in toy_samplers() {
            let p = exact_matrix(&space, &spec).unwrap();
            let rho = congestion(&ensemble, &p, &space).unwrap();
            let bound = sinclair_bound(rho, ensemble.ell(), &space, eps);
            let t_mix = tv_mixing_time(&p, &space, eps).unwrap();
            assert!(
                (t_mix as f64) <= bound,
                "{name} / {}: t_mix {t_mix} > bound {bound:.2}",
                spec.label()
            );
            worst_slack = worst_slack.min(bound / t_mix.max(1) as f64);
        }
    }
    let detail =
        format!("36 combinations: bound / t_mix >= {worst_slack:.2} everywhere");
    check(6, worst_slack >= 1.0, &detail);
}

/// Two-tier landscape: the unscaled weight's acceptance of the good move
/// collapses below 2/sqrt(p) at large N while the balanced weight holds.
#[test]
fn criterion_07_ordinary_acceptance_collapses() {
    let land = TwoTierLandscape { base: 100.0, t1: 1.0, t2: 2.0, neighborhood: 100, s0: 1 };
    let n = 1000;
    let ord = two_tier_acceptance(&land, n, WeightSpec::Ordinary).unwrap();
    let sqrt = two_tier_acceptance(&land, n, WeightSpec::sqrt()).unwrap();
    let cap = 2.0 / land.base.powf(land.t1 / 2.0);
    let detail = format!("N={n}: ordinary {ord:.4} (<= {cap}), sqrt {sqrt:.4} (> 0.5)");
    check(7, ord <= cap && sqrt > 0.5, &detail);
}

/// Incremental bookkeeping never drifts: a thousand factor updates stay
/// within 1e-8 relative of fresh factorizations, and a thousand block-count
/// updates match from-scratch recounts exactly.
#[test]
fn criterion_08_incremental_update_oracles() {
    // Variable selection: random flips with the factor carried incrementally.
    let spec = BvsGenSpec {
        n: 80,
        p: 60,
        design: BvsDesign::Banded,
        signal: SignalSpec::ScaledPattern { snr: 3.0 },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE08);
    let (data, _, _) = mtm_core::bvs::generate_dataset(&spec, &mut rng).unwrap();
    let mut hyper = BvsHyper::defaults_for(60);
    hyper.s_max = 25;
    let model = BvsModel::new(data, hyper).unwrap();
    let mut state = model.null_state();
    let mut max_rel = 0.0f64;
    for _ in 0..1000 {
        let (mv, _, _) = model.propose_move(&state, &mut rng);
        if model.eval_move(&state, &mv) == f64::NEG_INFINITY {
            continue;
        }
        state = model.apply_move(&state, &mv);
        let fresh = model.state_from_gamma(state.gamma.clone()).unwrap();
        max_rel = max_rel.max((state.ssr - fresh.ssr).abs() / fresh.ssr.abs());
    }

    // Block model: random single-node relabels against full recounts.
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE09);
    let (graph, truth) = generate_graph(60, 3, 0.4, 0.08, &mut rng).unwrap();
    let sbm = SbmModel::new(graph, SbmHyper::defaults_for(3)).unwrap();
    let mut z = sbm.state_from_labels(truth).unwrap();
    let mut counts_exact = true;
    for _ in 0..1000 {
        let (mv, _, _) = sbm.propose_move(&z, &mut rng);
        if sbm.eval_move(&z, &mv) == f64::NEG_INFINITY {
            continue;
        }
        z = sbm.apply_move(&z, &mv);
        let (sizes, counts) = sbm.recount(&z.labels).unwrap();
        counts_exact &= sizes == z.sizes && counts == z.counts;
    }
    let detail = format!(
        "max relative residual-quadratic error {max_rel:.2e} (< {SSR_REL_TOL:.0e}); \
         block counts exact: {counts_exact}"
    );
    check(8, max_rel < SSR_REL_TOL && counts_exact, &detail);
}

/// Trial-count selection: the synthetic scan picks N = 14, and the
/// fallback paths are deterministic.
#[test]
fn criterion_09_trial_count_selection() {
    let scan = |ratios: Vec<f64>| RatioScan { ratios, t3: 1.0, t4: 1.0, p: 100 };
    // 95 bad neighbors at ratio p^-1, 5 good at p^3.
    let mut r = vec![-1.0; 95];
    r.extend([3.0; 5]);
    let main = select_num_trials(&scan(r), 0.9).unwrap();
    // No neighbor above t4: the threshold falls back to t4 and the crossing
    // loop absorbs the near-good cluster.
    let mut r = vec![-1.0; 90];
    r.extend([0.5; 10]);
    let fallback = select_num_trials(&scan(r), 0.9).unwrap();
    // A cut below t4 forces the re-split at t4.
    let mut r = vec![-1.0; 95];
    r.extend([0.9; 5]);
    r.push(3.0);
    let resplit = select_num_trials(&scan(r), 0.9).unwrap();
    let degenerate = select_num_trials(&scan(vec![-1.0; 50]), 0.9).unwrap();
    let detail = format!(
        "main N={} (expect 14), fallback N={} s0={}, re-split N={} s0={}, degenerate N={}",
        main.n_selected,
        fallback.n_selected,
        fallback.s0_hat,
        resplit.n_selected,
        resplit.s0_hat,
        degenerate.n_selected
    );
    let ok = main.n_selected == 14
        && main.s0_hat == 5
        && (fallback.n_selected, fallback.s0_hat) == (7, 11)
        && (resplit.n_selected, resplit.s0_hat) == (63, 1)
        && degenerate.n_selected == 1
        && degenerate.degenerate;
    check(9, ok, &detail);
}

/// ESS estimator calibration on a process with known integrated
/// autocorrelation time (1 + 0.5)/(1 - 0.5) = 3.
#[test]
fn criterion_10_ess_calibration() {
    use rand_distr::{Distribution, StandardNormal};
    let t = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE10);
    let mut series = Vec::with_capacity(t);
    let mut x = 0.0f64;
    for _ in 0..t {
        let eps: f64 = StandardNormal.sample(&mut rng);
        x = 0.5 * x + eps;
        series.push(x);
    }
    let ess = ess_from_series(&series).unwrap();
    let expected = t as f64 / 3.0;
    let rel = (ess - expected).abs() / expected;
    let detail =
        format!("ESS {ess:.0} vs T/3 = {expected:.0}, relative error {rel:.3} (< {ESS_REL_TOL})");
    check(10, rel < ESS_REL_TOL, &detail);
}

/// Sanity on the shared toy fixtures so failures in 5/6 localize.
#[test]
fn toy_fixtures_are_unimodal() {
    for (name, space) in toy_spaces() {
        assert!(greedy_path_ensemble(&space).is_ok(), "{name} must be unimodal");
    }
    let _ = Balancing::ALL;
    let _ = Gamma::empty(4);
}
