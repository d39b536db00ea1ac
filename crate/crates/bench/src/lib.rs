//! Seeded inputs shared by the benchmarks in `benches/`.

use nalgebra::Matrix4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regdiff::{back_project, FeaturePointCloud, HomogeneousPoint3D, NormalizedPoint2D};

/// `n` back-projected points and their images under a small motion, with
/// the last `outliers` destinations replaced by random points.
pub fn point_pairs(
    seed: u64,
    n: usize,
    outliers: usize,
) -> (Vec<HomogeneousPoint3D>, Vec<HomogeneousPoint3D>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Matrix4::identity();
    a[(0, 1)] = -0.03;
    a[(1, 0)] = 0.03;
    a[(0, 3)] = 0.2;
    a[(2, 3)] = 0.3;
    let point = |rng: &mut ChaCha8Rng| {
        let p = NormalizedPoint2D::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        back_project(p, rng.random_range(1.0..5.0)).expect("positive depth")
    };
    let src: Vec<_> = (0..n).map(|_| point(&mut rng)).collect();
    let mut dst: Vec<_> = src.iter().map(|p| HomogeneousPoint3D(a * p.0)).collect();
    for d in dst.iter_mut().skip(n - outliers) {
        *d = point(&mut rng);
    }
    (src, dst)
}

/// A jittered grid of `h·w` points with `channels` random features.
pub fn dense_cloud(seed: u64, h: usize, w: usize, channels: usize) -> FeaturePointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let p = NormalizedPoint2D::from_pixel(
                x as f64 + rng.random_range(-0.7..0.7),
                y as f64 + rng.random_range(-0.7..0.7),
                w,
                h,
            );
            pos.push([p.x, p.y, rng.random_range(1.0..3.0)]);
        }
    }
    let feat = (0..h * w * channels)
        .map(|_| rng.random_range(-1.0f32..1.0))
        .collect();
    FeaturePointCloud::new(channels, pos, feat, (h, w)).expect("finite cloud")
}
