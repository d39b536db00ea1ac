use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NormalizedPoint2D;

use super::{FeatureGrid, FeaturePointCloud, VisibilityMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Disk radius in target pixels.
    pub splat_radius: f64,
    /// Points blended per pixel, nearest in depth first.
    pub k_nearest: usize,
    /// Exponent of the `(1 − (dist/r)²)` falloff.
    pub weight_power: f64,
    /// Depth softness relative to the nearest point's depth.
    pub depth_sigma: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            splat_radius: 1.5,
            k_nearest: 4,
            weight_power: 2.0,
            depth_sigma: 0.05,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.splat_radius > 0.0 && self.splat_radius.is_finite()) {
            return Err(Error::domain("splat_radius must be > 0"));
        }
        if self.k_nearest == 0 {
            return Err(Error::domain("k_nearest must be >= 1"));
        }
        if !(self.weight_power > 0.0 && self.weight_power.is_finite()) {
            return Err(Error::domain("weight_power must be > 0"));
        }
        if !(self.depth_sigma > 0.0 && self.depth_sigma.is_finite()) {
            return Err(Error::domain("depth_sigma must be > 0"));
        }
        Ok(())
    }

    /// Single-pixel splats with a hard z-buffer.
    pub fn nearest_pixel() -> Self {
        Self {
            splat_radius: 0.5,
            k_nearest: 1,
            ..Self::default()
        }
    }
}

/// Output of [`splat_render`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub features: FeatureGrid,
    pub mask: VisibilityMask,
    /// Depth of the nearest contributing point per pixel, `+∞` where no
    /// point lands.
    pub depth: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Candidate {
    col: u32,
    index: u32,
    z: f64,
    weight: f64,
}

/// Renders a feature point cloud into a `target = (h, w)` grid.
///
/// Each point covers the pixels whose centers are closer than the splat
/// radius, with spatial weight `(1 − (dist/r)²)^p`. Per pixel the
/// `k_nearest` points by depth are blended with the spatial weight times
/// `exp(−(z − z_min)/(depth_sigma·z_min))`, normalized to sum to one. The
/// visibility mask is the unnormalized weight sum clamped to `[0, 1]`.
/// Ties in depth are broken by point index, so output does not depend on
/// scheduling.
pub fn splat_render(
    pc: &FeaturePointCloud,
    target: (usize, usize),
    cfg: &RenderConfig,
) -> Result<Rendered> {
    cfg.validate()?;
    let (h, w) = target;
    if h == 0 || w == 0 {
        return Err(Error::domain("render target dimensions must be positive"));
    }
    let c = pc.channels();
    let r = cfg.splat_radius;
    let r2 = r * r;

    let pixels: Vec<(f64, f64)> = pc
        .positions()
        .iter()
        .map(|p| NormalizedPoint2D::new(p[0], p[1]).to_pixel(w, h))
        .collect();

    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); h];
    for (i, &(_, pv)) in pixels.iter().enumerate() {
        let lo = (pv - r).floor().max(0.0);
        let hi = (pv + r).ceil().min(h as f64 - 1.0);
        if hi < lo {
            continue;
        }
        for v in lo as usize..=hi as usize {
            if (v as f64 - pv).abs() < r {
                rows[v].push(i as u32);
            }
        }
    }

    let mut features = vec![0.0f32; c * h * w];
    let mut mask = vec![0.0f32; h * w];
    let mut depth = vec![f64::INFINITY; h * w];

    let row_out: Vec<(Vec<f32>, Vec<f32>, Vec<f64>)> = rows
        .par_iter()
        .enumerate()
        .map(|(v, bucket)| {
            let mut cands = Vec::new();
            for &i in bucket {
                let (pu, pv) = pixels[i as usize];
                let dv2 = (v as f64 - pv).powi(2);
                let reach = (r2 - dv2).max(0.0).sqrt();
                let lo = (pu - reach).floor().max(0.0);
                let hi = (pu + reach).ceil().min(w as f64 - 1.0);
                if hi < lo {
                    continue;
                }
                for u in lo as usize..=hi as usize {
                    let d2 = (u as f64 - pu).powi(2) + dv2;
                    if d2 < r2 {
                        cands.push(Candidate {
                            col: u as u32,
                            index: i,
                            z: pc.positions()[i as usize][2],
                            weight: (1.0 - d2 / r2).powf(cfg.weight_power),
                        });
                    }
                }
            }
            cands.sort_unstable_by(|a, b| {
                a.col
                    .cmp(&b.col)
                    .then(a.z.total_cmp(&b.z))
                    .then(a.index.cmp(&b.index))
            });

            let mut feat = vec![0.0f32; c * w];
            let mut m = vec![0.0f32; w];
            let mut zbuf = vec![f64::INFINITY; w];
            let mut acc = vec![0.0f64; c];
            for group in cands.chunk_by(|a, b| a.col == b.col) {
                let u = group[0].col as usize;
                let z_min = group[0].z;
                acc.iter_mut().for_each(|a| *a = 0.0);
                let mut total = 0.0;
                for cand in group.iter().take(cfg.k_nearest) {
                    let wgt = cand.weight * (-(cand.z - z_min) / (cfg.depth_sigma * z_min)).exp();
                    total += wgt;
                    for (a, &f) in acc.iter_mut().zip(pc.feature(cand.index as usize)) {
                        *a += wgt * f as f64;
                    }
                }
                if total > 0.0 {
                    for (ch, a) in acc.iter().enumerate() {
                        feat[ch * w + u] = (a / total) as f32;
                    }
                    m[u] = total.min(1.0) as f32;
                    zbuf[u] = z_min;
                }
            }
            (feat, m, zbuf)
        })
        .collect();

    for (v, (feat, m, zbuf)) in row_out.into_iter().enumerate() {
        for ch in 0..c {
            features[(ch * h + v) * w..(ch * h + v + 1) * w]
                .copy_from_slice(&feat[ch * w..(ch + 1) * w]);
        }
        mask[v * w..(v + 1) * w].copy_from_slice(&m);
        depth[v * w..(v + 1) * w].copy_from_slice(&zbuf);
    }

    Ok(Rendered {
        features: FeatureGrid::new(c, h, w, features)?,
        mask: VisibilityMask::new(h, w, mask)?,
        depth,
    })
}

/// Largest absolute difference between `render(α·f + β·g)` and
/// `α·render(f) + β·render(g)` for two clouds with identical positions.
pub fn render_linearity_check(
    pc_f: &FeaturePointCloud,
    pc_g: &FeaturePointCloud,
    alpha: f32,
    beta: f32,
    target: (usize, usize),
    cfg: &RenderConfig,
) -> Result<f64> {
    if pc_f.positions() != pc_g.positions() {
        return Err(Error::domain("point clouds do not share positions"));
    }
    if pc_f.channels() != pc_g.channels() {
        return Err(Error::domain("point clouds differ in channel count"));
    }
    let mixed: Vec<f32> = pc_f
        .features()
        .iter()
        .zip(pc_g.features())
        .map(|(f, g)| alpha * f + beta * g)
        .collect();
    let pc_mix = pc_f.with_features(pc_f.channels(), mixed)?;
    let rf = splat_render(pc_f, target, cfg)?;
    let rg = splat_render(pc_g, target, cfg)?;
    let rm = splat_render(&pc_mix, target, cfg)?;
    let worst = rm
        .features
        .data()
        .iter()
        .zip(rf.features.data())
        .zip(rg.features.data())
        .map(|((m, f), g)| (*m as f64 - (alpha as f64 * *f as f64 + beta as f64 * *g as f64)).abs())
        .fold(0.0, f64::max);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featgrid::{lift_features, Warp};
    use crate::geometry::DepthMap;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Reference renderer: every pixel visits every point.
    fn brute_force(
        pc: &FeaturePointCloud,
        (h, w): (usize, usize),
        cfg: &RenderConfig,
    ) -> (Vec<f64>, Vec<f64>) {
        let c = pc.channels();
        let mut feat = vec![0.0; c * h * w];
        let mut mask = vec![0.0; h * w];
        for v in 0..h {
            for u in 0..w {
                let mut hits: Vec<(f64, usize, f64)> = Vec::new();
                for (i, p) in pc.positions().iter().enumerate() {
                    let pu = (p[0] * w as f64 + w as f64 - 1.0) / 2.0;
                    let pv = (p[1] * h as f64 + h as f64 - 1.0) / 2.0;
                    let d = ((u as f64 - pu).powi(2) + (v as f64 - pv).powi(2)).sqrt();
                    if d < cfg.splat_radius {
                        let ws = (1.0 - (d / cfg.splat_radius).powi(2)).powf(cfg.weight_power);
                        hits.push((p[2], i, ws));
                    }
                }
                if hits.is_empty() {
                    continue;
                }
                hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                hits.truncate(cfg.k_nearest);
                let z0 = hits[0].0;
                let weights: Vec<f64> = hits
                    .iter()
                    .map(|(z, _, ws)| ws * (-(z - z0) / (cfg.depth_sigma * z0)).exp())
                    .collect();
                let total: f64 = weights.iter().sum();
                for ch in 0..c {
                    let s: f64 = hits
                        .iter()
                        .zip(&weights)
                        .map(|((_, i, _), wt)| wt * pc.feature(*i)[ch] as f64)
                        .sum();
                    feat[(ch * h + v) * w + u] = s / total;
                }
                mask[v * w + u] = total.min(1.0);
            }
        }
        (feat, mask)
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, c: usize) -> FeaturePointCloud {
        let positions = (0..n)
            .map(|_| {
                [
                    rng.random_range(-1.1..1.1),
                    rng.random_range(-1.1..1.1),
                    rng.random_range(0.5..3.0),
                ]
            })
            .collect();
        let features = (0..n * c).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        FeaturePointCloud::new(c, positions, features, (0, 0)).unwrap()
    }

    fn random_config(rng: &mut ChaCha8Rng) -> RenderConfig {
        RenderConfig {
            splat_radius: rng.random_range(0.3..2.5),
            k_nearest: rng.random_range(1..6),
            weight_power: rng.random_range(0.5..3.0),
            depth_sigma: rng.random_range(0.01..0.5),
        }
    }

    #[test]
    fn empty_cloud_renders_zeros() {
        let out = splat_render(
            &FeaturePointCloud::empty(3),
            (4, 5),
            &RenderConfig::default(),
        )
        .unwrap();
        assert!(out.features.data().iter().all(|v| *v == 0.0));
        assert!(out.mask.values().iter().all(|v| *v == 0.0));
        assert_eq!(out.features.channels(), 3);
    }

    #[test]
    fn single_point_on_pixel_center() {
        let p = NormalizedPoint2D::from_pixel(2.0, 1.0, 5, 4);
        let pc =
            FeaturePointCloud::new(2, vec![[p.x, p.y, 1.0]], vec![0.25, -4.0], (1, 1)).unwrap();
        let out = splat_render(&pc, (4, 5), &RenderConfig::nearest_pixel()).unwrap();
        for v in 0..4 {
            for u in 0..5 {
                let hit = (u, v) == (2, 1);
                assert_eq!(out.mask.get(v, u), if hit { 1.0 } else { 0.0 });
                assert_eq!(out.features.get(0, v, u), if hit { 0.25 } else { 0.0 });
                assert_eq!(out.features.get(1, v, u), if hit { -4.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn nearest_depth_wins_with_k1() {
        let p = NormalizedPoint2D::from_pixel(1.0, 1.0, 3, 3);
        let pc = FeaturePointCloud::new(
            1,
            vec![[p.x, p.y, 2.0], [p.x, p.y, 1.0]],
            vec![7.0, 3.0],
            (1, 2),
        )
        .unwrap();
        let cfg = RenderConfig {
            k_nearest: 1,
            ..RenderConfig::default()
        };
        let out = splat_render(&pc, (3, 3), &cfg).unwrap();
        assert_eq!(out.features.get(0, 1, 1), 3.0);
        let (reference, _) = brute_force(&pc, (3, 3), &cfg);
        assert_eq!(reference[4], 3.0);
        assert_eq!(out.depth[4], 1.0);
    }

    #[test]
    fn matches_brute_force_renderer() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..40 {
            let h = rng.random_range(1..=16);
            let w = rng.random_range(1..=16);
            let n = rng.random_range(0..=256);
            let c = rng.random_range(1..=4);
            let pc = random_cloud(&mut rng, n, c);
            let cfg = random_config(&mut rng);
            let out = splat_render(&pc, (h, w), &cfg).unwrap();
            let (feat, mask) = brute_force(&pc, (h, w), &cfg);
            for (a, b) in out.features.data().iter().zip(&feat) {
                assert!((*a as f64 - b).abs() < 1e-5);
            }
            for (a, b) in out.mask.values().iter().zip(&mask) {
                assert!((*a as f64 - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn identity_round_trip_reproduces_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (c, h, w) = (3, 7, 9);
        let data = (0..c * h * w)
            .map(|_| rng.random_range(-2.0f32..2.0))
            .collect();
        let grid = FeatureGrid::new(c, h, w, data).unwrap();
        let depth = DepthMap::constant(w, h, 1.7).unwrap();
        let pc = lift_features(&grid, Some(&depth), &Warp::Identity).unwrap();
        let out = splat_render(&pc, (h, w), &RenderConfig::nearest_pixel()).unwrap();
        assert_eq!(out.features, grid);
        assert!(out.mask.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn linearity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_cloud(&mut rng, 100, 3);
        let g_feats = (0..300).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let g = f.with_features(3, g_feats).unwrap();
        let cfg = RenderConfig::default();
        assert_eq!(
            render_linearity_check(&f, &g, 1.0, 0.0, (12, 12), &cfg).unwrap(),
            0.0
        );
        assert!(render_linearity_check(&f, &g, 2.0, -1.0, (12, 12), &cfg).unwrap() < 1e-5);
        let other = random_cloud(&mut rng, 100, 3);
        assert!(render_linearity_check(&f, &other, 1.0, 1.0, (12, 12), &cfg).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn mask_in_unit_interval_and_zero_outside_disks(seed in any::<u64>(), h in 1usize..12, w in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(0..64);
            let pc = random_cloud(&mut rng, n, 2);
            let cfg = random_config(&mut rng);
            let out = splat_render(&pc, (h, w), &cfg).unwrap();
            for v in 0..h {
                for u in 0..w {
                    let m = out.mask.get(v, u);
                    prop_assert!((0.0..=1.0).contains(&m));
                    let covered = pc.positions().iter().any(|p| {
                        let pu = (p[0] * w as f64 + w as f64 - 1.0) / 2.0;
                        let pv = (p[1] * h as f64 + h as f64 - 1.0) / 2.0;
                        (u as f64 - pu).powi(2) + (v as f64 - pv).powi(2) < cfg.splat_radius.powi(2)
                    });
                    if !covered {
                        prop_assert_eq!(m, 0.0);
                        for ch in 0..2 {
                            prop_assert_eq!(out.features.get(ch, v, u), 0.0);
                        }
                    }
                }
            }
        }

        #[test]
        fn point_order_does_not_matter(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pc = random_cloud(&mut rng, 80, 2);
            let cfg = random_config(&mut rng);
            let mut order: Vec<usize> = (0..pc.len()).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let positions = order.iter().map(|&i| pc.positions()[i]).collect();
            let features = order.iter().flat_map(|&i| pc.feature(i).to_vec()).collect();
            let shuffled = FeaturePointCloud::new(2, positions, features, (0, 0)).unwrap();
            let a = splat_render(&pc, (10, 10), &cfg).unwrap();
            let b = splat_render(&shuffled, (10, 10), &cfg).unwrap();
            for (x, y) in a.features.data().iter().zip(b.features.data()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
            for (x, y) in a.mask.values().iter().zip(b.mask.values()) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }

        #[test]
        fn rendering_is_linear_in_features(seed in any::<u64>(), alpha in -3.0f32..3.0, beta in -3.0f32..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_cloud(&mut rng, 60, 3);
            let g_feats = (0..180).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            let g = f.with_features(3, g_feats).unwrap();
            let cfg = random_config(&mut rng);
            prop_assert!(render_linearity_check(&f, &g, alpha, beta, (9, 11), &cfg).unwrap() < 1e-5);
        }
    }
}
