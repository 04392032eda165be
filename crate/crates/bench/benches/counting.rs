use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use distdim::covering::{grid_covering_count, ScaleValue};
use distdim::distance::{digit_envelope, distance_set, verify_envelope, PairOptions};
use distdim_bench::{axis_norm, sharp_sample};

fn bench_grid_counts(c: &mut Criterion) {
    let (fractal, cloud) = sharp_sample(5, 50_000, 1);
    let mut g = c.benchmark_group("grid_covering_count");
    for m in [6u64, 16, 34] {
        g.bench_function(format!("exact_50k_level_{m}"), |b| {
            let scale = ScaleValue::q_pow(3, m);
            b.iter(|| grid_covering_count(black_box(&cloud), black_box(&scale)).unwrap())
        });
    }
    let floats = cloud.to_float();
    g.bench_function("float_50k_level_16", |b| {
        let scale = ScaleValue::Approx(3f64.powi(-16));
        b.iter(|| grid_covering_count(black_box(&floats), black_box(&scale)).unwrap())
    });
    g.finish();
    drop(fractal);
}

fn bench_distances(c: &mut Criterion) {
    let (_, cloud) = sharp_sample(5, 2_000, 1);
    let norm = axis_norm();
    c.bench_function("distance_set_sampled_100k_exact", |b| {
        b.iter_batched(
            || PairOptions {
                sample: Some((100_000, 7)),
                ..Default::default()
            },
            |opts| distance_set(black_box(&cloud), black_box(&norm), &opts).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn bench_envelope(c: &mut Criterion) {
    let (fractal, cloud) = sharp_sample(5, 2_000, 1);
    let norm = axis_norm();
    let poly = norm.as_polyhedral().unwrap();
    let env = digit_envelope(fractal.schedule(), 3, 2, poly).unwrap();
    let dist = distance_set(
        &cloud,
        &norm,
        &PairOptions {
            sample: Some((20_000, 7)),
            ..Default::default()
        },
    )
    .unwrap();
    c.bench_function("verify_envelope_20k_values", |b| {
        b.iter(|| {
            verify_envelope(
                black_box(&dist),
                black_box(&env),
                3,
                fractal.depth(),
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, bench_grid_counts, bench_distances, bench_envelope);
criterion_main!(benches);
