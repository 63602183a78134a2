//! Step-kernel and exact-matrix benchmarks.
//!
//! Sizes are deliberately below the full experiment scale so a bench pass
//! stays in minutes; the per-step cost model (posterior evaluations dominate,
//! 2N - 1 of them per multiple-try step) is what these measure.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mtm_core::bvs::{
    generate_dataset, BvsDesign, BvsGenSpec, BvsHyper, BvsModel, BvsState, Gamma, SignalSpec,
};
use mtm_core::sbm::{generate_graph, SbmHyper, SbmModel, SbmState};
use mtm_core::sampler::mtm_step;
use mtm_core::spectral::{exact_mtm_matrix, EnumeratedSpace};
use mtm_core::{ModelSpace, MtmConfig, WeightSpec};

fn bvs_fixture() -> (BvsModel, BvsState) {
    let spec = BvsGenSpec {
        n: 100,
        p: 300,
        design: BvsDesign::Independent,
        signal: SignalSpec::ScaledPattern { snr: 4.0 },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (data, support, _) = generate_dataset(&spec, &mut rng).unwrap();
    let mut hyper = BvsHyper::defaults_for(300);
    hyper.s_max = 50;
    let model = BvsModel::new(data, hyper).unwrap();
    let state = model.state_from_gamma(Gamma::from_indices(300, &support)).unwrap();
    (model, state)
}

fn sbm_fixture() -> (SbmModel, SbmState) {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let (graph, truth) = generate_graph(200, 2, 0.2, 0.05, &mut rng).unwrap();
    let model = SbmModel::new(graph, SbmHyper::defaults_for(2)).unwrap();
    let state = model.state_from_labels(truth).unwrap();
    (model, state)
}

fn bench_bvs_step(c: &mut Criterion) {
    let (model, state) = bvs_fixture();
    let mut group = c.benchmark_group("bvs_mtm_step");
    for n in [1usize, 10, 50] {
        let config = MtmConfig::new(n, WeightSpec::sqrt(), 23);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = ChaCha8Rng::seed_from_u64(29);
            b.iter(|| mtm_step(&model, &state, &config, &mut rng))
        });
    }
    group.finish();
}

fn bench_sbm_step(c: &mut Criterion) {
    let (model, state) = sbm_fixture();
    let mut group = c.benchmark_group("sbm_mtm_step");
    for n in [1usize, 10, 50] {
        let config = MtmConfig::new(n, WeightSpec::sqrt(), 23);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut rng = ChaCha8Rng::seed_from_u64(31);
            b.iter(|| mtm_step(&model, &state, &config, &mut rng))
        });
    }
    group.finish();
}

fn bench_neighborhood_eval(c: &mut Criterion) {
    let (model, state) = bvs_fixture();
    // Cost of one full-neighborhood sweep, the per-step price the exhaustive
    // informed sampler pays and the multiple-try sampler avoids.
    c.bench_function("bvs_enumerate_neighborhood", |b| {
        b.iter(|| model.enumerate_moves(&state).unwrap().len())
    });
}

fn bench_exact_matrix(c: &mut Criterion) {
    let space = EnumeratedSpace::hypercube(6, 0b111111).unwrap();
    c.bench_function("exact_mtm_matrix_hypercube6_n2", |b| {
        b.iter(|| exact_mtm_matrix(&space, 2, WeightSpec::sqrt()).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_bvs_step,
    bench_sbm_step,
    bench_neighborhood_eval,
    bench_exact_matrix
);
criterion_main!(kernels);
