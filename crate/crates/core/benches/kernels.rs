//! Kernel throughput on the default rayon pool versus a single worker.
//!
//! A one-thread pool runs the same code path the sequential build takes, so
//! the pair of numbers per kernel shows what the data-parallel core buys on
//! the host. Build with `--no-default-features` for the truly sequential
//! variant.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;
use uisal::features::CROP_SHAPE;
use uisal::gaze::{fixations_to_pixel_saliency, FixationSet, GazePoint};
use uisal::model::Autoencoder;
use uisal::numerics::{euclidean_loss, ConvLayer, DenseLayer, Tensor};
use uisal::SeededRng;

fn pools() -> Vec<(&'static str, Option<ThreadPool>)> {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("default", None), ("single", Some(single))]
}

fn run<R>(pool: &Option<ThreadPool>, f: impl FnOnce() -> R + Send) -> R
where
    R: Send,
{
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn kernels(c: &mut Criterion) {
    let mut rng = SeededRng::new(0);
    let crop: Tensor<f32> = Tensor::from_fn(&CROP_SHAPE, |_| rng.uniform() as f32);
    let conv = ConvLayer::<f32>::init(3, 32, &mut rng);
    let dense = DenseLayer::<f32>::init(27665, 512, &mut rng);
    let rows: Vec<f32> = (0..64 * 27665).map(|_| rng.normal() as f32).collect();
    let ae = Autoencoder::<f32>::init(&mut rng);
    let fx = FixationSet {
        ui_id: "b".into(),
        points: (0..40)
            .map(|i| GazePoint::new(rng.uniform_range(0.0, 1080.0), rng.uniform_range(0.0, 1920.0), i))
            .collect(),
        covariance: [[400.0, 50.0], [50.0, 300.0]],
    };

    let mut g = c.benchmark_group("kernels");
    g.sample_size(10);
    for (name, pool) in pools() {
        g.bench_function(BenchmarkId::new("conv_3x32_162x288", name), |b| {
            b.iter(|| run(&pool, || conv.forward(&crop).unwrap()))
        });
        g.bench_function(BenchmarkId::new("dense_64x27665x512", name), |b| {
            b.iter(|| run(&pool, || dense.forward_batch(&rows, 64).unwrap()))
        });
        g.bench_function(BenchmarkId::new("autoencoder_step", name), |b| {
            b.iter(|| {
                run(&pool, || {
                    let cache = ae.forward(&crop).unwrap();
                    let (_, grad) = euclidean_loss(cache.output(), &crop).unwrap();
                    ae.backward(&cache, &grad).unwrap()
                })
            })
        });
        g.bench_function(BenchmarkId::new("pixel_saliency_1080x1920", name), |b| {
            b.iter(|| run(&pool, || fixations_to_pixel_saliency(&fx, 1080, 1920).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
