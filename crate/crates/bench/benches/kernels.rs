use criterion::{criterion_group, criterion_main, Criterion};
use fairprune::data::synthetic::{credit_dataset, CreditConfig};
use fairprune::fairness::{PairStream, SimilarityConfig};
use fairprune::influence::{inverse_hvp, SolverConfig};
use fairprune::model::train;
use fairprune::{Dataset, Hyperparameters, Mlp};
use std::hint::black_box;

fn setup() -> (Dataset, Mlp) {
    let d = credit_dataset(&CreditConfig::default()).unwrap();
    let hp = Hyperparameters {
        epochs: 50,
        learning_rate: 0.05,
        ..Default::default()
    };
    let m = train(&d, &hp).unwrap();
    (d, m)
}

fn kernels(c: &mut Criterion) {
    let (d, m) = setup();
    let v = vec![1e-2; m.num_params()];

    c.bench_function("hvp_1000_rows", |b| {
        b.iter(|| m.hvp(black_box(&v), d.examples()).unwrap())
    });

    let g = m.grad_mean_loss(d.examples().take(50)).unwrap();
    let cg = SolverConfig {
        damping: 0.1,
        ..SolverConfig::default()
    };
    c.bench_function("cg_inverse_hvp", |b| {
        b.iter(|| inverse_hvp(&m, black_box(&g), &d, &cg).unwrap())
    });

    let sim = SimilarityConfig::exact(0);
    c.bench_function("pair_stream_10k", |b| {
        b.iter(|| {
            PairStream::new(d.layout(), 100, &sim, 0)
                .unwrap()
                .map(|p| p.a2[0])
                .sum::<f64>()
        })
    });

    let epoch = Hyperparameters {
        epochs: 1,
        ..Default::default()
    };
    c.bench_function("train_one_epoch", |b| {
        b.iter(|| train(black_box(&d), &epoch).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
