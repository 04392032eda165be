//! Shared fixtures for the counting benchmarks.

use distdim::covering::PointCloud;
use distdim::digitsets::{BlockSchedule, DigitFractal};
use distdim::norms::{NormSpec, PolyhedralNorm};

/// The d=2, base-3, density-1/2 test set, sampled to `n` exact points.
pub fn sharp_sample(blocks: usize, n: u64, seed: u64) -> (DigitFractal, PointCloud) {
    let schedule = BlockSchedule::for_density(0.5, blocks, 3).expect("valid schedule");
    let depth = schedule.checkpoints().last().unwrap() + 4;
    let fractal = DigitFractal::new(schedule, depth, 2).expect("valid fractal");
    let cloud = fractal.sample_points(n, seed).expect("sampling");
    (fractal, cloud)
}

/// Scaled-axis polyhedral norm matching the base-3 digit sets.
pub fn axis_norm() -> NormSpec {
    NormSpec::Polyhedral(
        PolyhedralNorm::from_strs(&[&["1/3", "0"], &["0", "1/3"]]).expect("valid norm"),
    )
}

/// Uniform `n x n` float grid on the unit square.
pub fn grid_cloud(n: usize) -> PointCloud {
    let mut coords = Vec::with_capacity(n * n * 2);
    for i in 0..n {
        for j in 0..n {
            coords.push(i as f64 / (n - 1) as f64);
            coords.push(j as f64 / (n - 1) as f64);
        }
    }
    PointCloud::from_f64(2, coords).expect("grid cloud")
}
