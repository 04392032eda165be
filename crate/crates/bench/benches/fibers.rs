use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use distdim::norms::{NormSpec, SmoothNorm};
use distdim::projections::{fiber_cover, weak_transversality_scan, ProjectionFamily};
use distdim_bench::grid_cloud;

fn bench_fiber_cover(c: &mut Criterion) {
    let cloud = grid_cloud(1000);
    let family = ProjectionFamily::new(
        vec![vec![-0.3, -0.4], vec![1.4, -0.35]],
        NormSpec::Smooth(SmoothNorm::unweighted(2.0, 2).unwrap()),
    )
    .unwrap();
    let mut g = c.benchmark_group("fiber_cover_1M_grid");
    g.sample_size(20);
    for k in [5i32, 8] {
        g.bench_function(format!("two_pins_delta_2^-{k}"), |b| {
            let delta = 2f64.powi(-k);
            b.iter(|| fiber_cover(black_box(&family), black_box(&cloud), &[0.9, 0.9], delta).unwrap())
        });
    }
    g.finish();
}

fn bench_scan(c: &mut Criterion) {
    let cloud = grid_cloud(500);
    let family = ProjectionFamily::new(
        vec![vec![-0.3, -0.4], vec![1.4, -0.35]],
        NormSpec::Smooth(SmoothNorm::unweighted(4.0, 2).unwrap()),
    )
    .unwrap();
    let deltas: Vec<f64> = (4..=8).map(|k| 2f64.powi(-k)).collect();
    let mut g = c.benchmark_group("weak_transversality_scan");
    g.sample_size(10);
    g.bench_function("250k_grid_5_scales_16_targets", |b| {
        b.iter(|| weak_transversality_scan(black_box(&family), black_box(&cloud), &deltas, 16, 3).unwrap())
    });
    g.finish();
}

criterion_group!(benches, bench_fiber_cover, bench_scan);
criterion_main!(benches);
