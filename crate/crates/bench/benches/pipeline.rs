//! Hot-path benchmarks: superoperator exponentials, single-record
//! measurement sweeps, K-NN queries, and one training step.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::Rng;

use qmodel_core::coupling::{generate_coupling_set, CouplingCase};
use qmodel_core::dataset::{generate_record, sample_model};
use qmodel_core::knn::{knn_fit, knn_predict};
use qmodel_core::lindblad::{
    assemble_hamiltonian, build_liouvillian, propagate_expm, DensityMatrix,
};
use qmodel_core::mlp::{mlp_backward, mlp_init, MlpArchitecture};
use qmodel_core::rng::{record_rng, stream_rng};

fn bench_propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate_expm");
    for n in [2usize, 3, 5] {
        let mut rng = record_rng(1, n as u64);
        let model = sample_model(&mut rng, n, 1.0, 1.0);
        let row: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..50.0)).collect();
        let full = assemble_hamiltonian(&model, &row).unwrap();
        let liou = build_liouvillian(&full, &model.gamma).unwrap();
        let rho0 = DensityMatrix::pure_basis(n + 1, 1).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| propagate_expm(&liou, &rho0, 0.15).unwrap())
        });
    }
    group.finish();
}

fn bench_record(c: &mut Criterion) {
    let case = CouplingCase { alpha: 3, j_strength: 50.0, r_min: 0.5, r_max: 3.0, seed: 7 };
    let set = generate_coupling_set(&case, 3, 200).unwrap();
    let mut rng = record_rng(2, 0);
    let model = sample_model(&mut rng, 3, 1.0, 1.0);
    c.bench_function("generate_record_n3_q200", |b| {
        b.iter(|| generate_record(&model, &set, 0.15).unwrap())
    });
}

fn bench_knn(c: &mut Criterion) {
    let mut rng = stream_rng(3, "bench-knn");
    let train = Array2::from_shape_simple_fn((10_000, 200), || rng.gen_range(0.0..1.0));
    let labels: Vec<u32> = (0..10_000).map(|i| 2 + (i % 4) as u32).collect();
    let model = knn_fit(train, labels, 5).unwrap();
    let query: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..1.0)).collect();
    c.bench_function("knn_predict_d10k_q200", |b| {
        b.iter(|| knn_predict(&model, &query).unwrap())
    });
}

fn bench_training_step(c: &mut Criterion) {
    let arch = MlpArchitecture { input_dim: 200, hidden_dims: vec![1024, 512, 256], output_dim: 6 };
    let params = mlp_init(&arch, 1).unwrap();
    let mut rng = stream_rng(4, "bench-mlp");
    let x = Array2::from_shape_simple_fn((64, 200), || rng.gen_range(0.0..1.0));
    let y = Array2::from_shape_simple_fn((64, 6), || rng.gen_range(0.0..1.0));
    c.bench_function("mlp_backward_b64", |b| {
        b.iter(|| mlp_backward(&params, &x.view(), &y.view()).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = bench_propagation, bench_record, bench_knn, bench_training_step
}
criterion_main!(benches);
