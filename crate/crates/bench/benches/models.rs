use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use songrec::eval::{evaluate, EvalConfig};
use songrec::models::{Architecture, Hyperparams, NeuralRecommender};
use songrec::nn::ops::Mode;
use songrec::SeededRng;
use songrec_bench::random_examples;

const SONGS: usize = 10_000;
const USERS: usize = 987;

fn models(c: &mut Criterion) {
    let hyper = Hyperparams::default();
    let mut rng = SeededRng::new(2);
    let cnn = NeuralRecommender::new(Architecture::Cnnrec, hyper.clone(), SONGS, USERS, &mut rng).unwrap();
    let ctx = [1, 20, 300, 4000, 9999];
    c.bench_function("cnnrec forward, default dims", |b| {
        b.iter(|| cnn.forward(black_box(7), black_box(&ctx), Mode::Eval, &mut rng).unwrap())
    });

    let batch = random_examples(hyper.batch, hyper.j, SONGS, USERS, 3);
    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    for arch in [Architecture::Cnnrec, Architecture::Nnrec] {
        let mut model = NeuralRecommender::new(arch, hyper.clone(), SONGS, USERS, &mut rng).unwrap();
        group.bench_function(format!("{} batch of 50", arch.tag()), |b| {
            b.iter(|| model.train_step(black_box(&batch), &mut rng).unwrap())
        });
    }
    group.finish();

    let examples = random_examples(200, hyper.j, SONGS, USERS, 4);
    let config = EvalConfig::default();
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    group.bench_function("cnnrec full catalog, 200 cases", |b| {
        b.iter(|| evaluate(&cnn, black_box(&examples), &config, None).unwrap())
    });
    group.finish();
}

criterion_group!(benches, models);
criterion_main!(benches);
