use std::hint::black_box;

use contourreg::bench::random_volume;
use contourreg::losses::{total_loss, LogitField, LossConfig};
use contourreg::morphology::{contour, maxpool_naive, maxpool_separable, WindowRadius};
use contourreg::volume::{LabelVolume, VolumeGeometry};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn kernels(c: &mut Criterion) {
    let vol = random_volume([64, 64, 64], 0).unwrap();
    let mut group = c.benchmark_group("maxpool_64");
    group.sample_size(10);
    for d in [1usize, 3] {
        group.bench_with_input(BenchmarkId::new("naive", d), &d, |b, &d| {
            b.iter(|| maxpool_naive(black_box(&vol), WindowRadius(d)))
        });
        group.bench_with_input(BenchmarkId::new("separable", d), &d, |b, &d| {
            b.iter(|| maxpool_separable(black_box(&vol), WindowRadius(d)))
        });
    }
    group.finish();
}

/// Same work on the global pool and on a one-thread pool. Build with
/// `--no-default-features` to measure the rayon-free sequential path instead.
fn threads(c: &mut Criterion) {
    let vol = random_volume([96, 96, 96], 1).unwrap();
    let mut group = c.benchmark_group("threads");
    group.sample_size(10);
    group.bench_function(format!("contour_d3_{}threads", contourreg::current_num_threads()), |b| {
        b.iter(|| contour(black_box(&vol), WindowRadius(3)))
    });
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        group.bench_function("contour_d3_1thread", |b| {
            b.iter(|| single.install(|| contour(black_box(&vol), WindowRadius(3))))
        });
    }
    group.finish();
}

fn loss(c: &mut Criterion) {
    let g = VolumeGeometry::isotropic([48, 48, 48]).unwrap();
    let labels = LabelVolume::new(g, 5, (0..g.len()).map(|i| (i % 7 % 5) as u8).collect()).unwrap();
    let logits = LogitField::new(g, 5, (0..g.len() * 5).map(|i| ((i * 37) % 101) as f64 / 50.0).collect()).unwrap();
    let cfg = LossConfig::default();
    c.bench_function("total_loss_48", |b| b.iter(|| total_loss(black_box(&logits), &labels, &cfg).unwrap()));
}

criterion_group!(benches, kernels, threads, loss);
criterion_main!(benches);
