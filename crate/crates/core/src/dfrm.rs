//! Registration strategy resolution and masked feature differencing.
//!
//! For every pyramid level and both directions the source features are
//! lifted with the plan's warp, splat into the target grid, and subtracted
//! from the target features under the visibility mask:
//! `H¹ = v₂→₁ ⊙ (G¹ − τ₂→₁(G²))` and symmetrically for image 2.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featgrid::{
    downsample_depth, lift_features, splat_render, FeatureGrid, RenderConfig, VisibilityMask, Warp,
};
use crate::features::FeaturePyramid;
use crate::geometry::{
    estimate_homography_dlt, estimate_transform_ransac, relative_pose_transform, CameraModel,
    CorrespondenceSet, DepthMap, Homography2D, NormalizedPoint2D, RansacConfig, Transform3D,
};

#[derive(Debug, Clone, PartialEq)]
pub enum RegistrationStrategy {
    Identity,
    HomographySupplied(Homography2D),
    HomographyEstimated(CorrespondenceSet),
    Transform3DSupplied(Transform3D),
    Transform3DEstimated(CorrespondenceSet, RansacConfig),
    GroundTruthPose(CameraModel, CameraModel),
}

impl RegistrationStrategy {
    pub fn needs_depth(&self) -> bool {
        matches!(
            self,
            Self::Transform3DSupplied(_)
                | Self::Transform3DEstimated(..)
                | Self::GroundTruthPose(..)
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::HomographySupplied(_) => "homography_supplied",
            Self::HomographyEstimated(_) => "homography_estimated",
            Self::Transform3DSupplied(_) => "transform3d_supplied",
            Self::Transform3DEstimated(..) => "transform3d_estimated",
            Self::GroundTruthPose(..) => "ground_truth_pose",
        }
    }
}

/// Per-direction fit statistics, where the strategy produces them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DirectionDiagnostics {
    pub inliers: Option<usize>,
    pub correspondences: Option<usize>,
    pub mean_residual: Option<f64>,
    pub condition_number: Option<f64>,
    /// Last row of an estimated 4×4 map; `(0, 0, 0, 1)` for a rigid motion.
    pub last_row: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub strategy: String,
    pub forward: DirectionDiagnostics,
    pub backward: DirectionDiagnostics,
    /// Largest displacement after warping 1→2→1 on sample points, in
    /// normalized units.
    pub composition_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationPlan {
    pub warp_1to2: Warp,
    pub warp_2to1: Warp,
    pub diagnostics: PlanDiagnostics,
}

fn registration_error(direction: &str, e: Error) -> Error {
    match e {
        Error::RegistrationFailure(msg) => {
            Error::RegistrationFailure(format!("{direction}: {msg}"))
        }
        other => Error::RegistrationFailure(format!("{direction}: {other}")),
    }
}

/// Resolves both directional warps. Estimated strategies fit each
/// direction independently.
pub fn build_plan(
    strategy: &RegistrationStrategy,
    d1: Option<&DepthMap>,
    d2: Option<&DepthMap>,
) -> Result<RegistrationPlan> {
    let depths = if strategy.needs_depth() {
        let d1 = d1.ok_or_else(|| Error::domain("strategy needs a depth map for image 1"))?;
        let d2 = d2.ok_or_else(|| Error::domain("strategy needs a depth map for image 2"))?;
        if d1.dims() != d2.dims() {
            return Err(Error::domain("depth maps differ in size"));
        }
        Some((d1, d2))
    } else {
        None
    };

    let mut diag = PlanDiagnostics {
        strategy: strategy.name().to_string(),
        ..Default::default()
    };
    let (warp_1to2, warp_2to1) = match strategy {
        RegistrationStrategy::Identity => (Warp::Identity, Warp::Identity),
        RegistrationStrategy::HomographySupplied(h) => {
            let inv = h
                .inverse()
                .ok_or_else(|| Error::domain("supplied homography is singular"))?;
            (Warp::Homography(*h), Warp::Homography(inv))
        }
        RegistrationStrategy::HomographyEstimated(corr) => {
            let fwd = estimate_homography_dlt(corr).map_err(|e| registration_error("1->2", e))?;
            let bwd = estimate_homography_dlt(&corr.swapped())
                .map_err(|e| registration_error("2->1", e))?;
            diag.forward = homography_diagnostics(&fwd, corr);
            diag.backward = homography_diagnostics(&bwd, &corr.swapped());
            (Warp::Homography(fwd), Warp::Homography(bwd))
        }
        RegistrationStrategy::Transform3DSupplied(t) => {
            let inv = t
                .inverse()
                .ok_or_else(|| Error::domain("supplied transform is singular"))?;
            (Warp::Transform(*t), Warp::Transform(inv))
        }
        RegistrationStrategy::Transform3DEstimated(corr, cfg) => {
            let (d1, d2) = depths.expect("checked above");
            let fwd = estimate_transform_ransac(corr, d1, d2, cfg)
                .map_err(|e| registration_error("1->2", e))?;
            let bwd = estimate_transform_ransac(&corr.swapped(), d2, d1, cfg)
                .map_err(|e| registration_error("2->1", e))?;
            for (slot, fit) in [(&mut diag.forward, &fwd), (&mut diag.backward, &bwd)] {
                *slot = DirectionDiagnostics {
                    inliers: Some(fit.inlier_count),
                    correspondences: Some(corr.len()),
                    mean_residual: Some(fit.mean_residual),
                    condition_number: Some(fit.condition_number),
                    last_row: Some(fit.transform.last_row()),
                };
            }
            (
                Warp::Transform(fwd.transform),
                Warp::Transform(bwd.transform),
            )
        }
        RegistrationStrategy::GroundTruthPose(c1, c2) => {
            let (d1, _) = depths.expect("checked above");
            let fwd = relative_pose_transform(c1, c2, d1.width(), d1.height())?;
            (Warp::Pose(fwd), Warp::Pose(fwd.inverse()))
        }
    };
    diag.composition_residual = composition_residual(&warp_1to2, &warp_2to1, depths.map(|d| d.0));
    Ok(RegistrationPlan {
        warp_1to2,
        warp_2to1,
        diagnostics: diag,
    })
}

fn homography_diagnostics(h: &Homography2D, corr: &CorrespondenceSet) -> DirectionDiagnostics {
    let errs: Vec<f64> = corr
        .pairs
        .iter()
        .filter_map(|&(p, q)| {
            h.apply(p)
                .map(|m| ((m.x - q.x).powi(2) + (m.y - q.y).powi(2)).sqrt())
        })
        .collect();
    DirectionDiagnostics {
        correspondences: Some(corr.len()),
        mean_residual: (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64),
        condition_number: {
            let sv = h.0.singular_values();
            Some(sv.max() / sv.min())
        },
        ..Default::default()
    }
}

/// Largest 1→2→1 round-trip displacement on an 8×8 lattice of points.
fn composition_residual(fwd: &Warp, bwd: &Warp, d1: Option<&DepthMap>) -> Option<f64> {
    let mut worst: Option<f64> = None;
    for i in 0..8 {
        for j in 0..8 {
            let p = NormalizedPoint2D::new(-0.875 + 0.25 * j as f64, -0.875 + 0.25 * i as f64);
            let depth = match d1 {
                Some(d) => match d.sample_nearest(p) {
                    Some(v) => v,
                    None => continue,
                },
                None => 1.0,
            };
            let Some([x, y, z]) = fwd.apply(p, depth) else {
                continue;
            };
            let Some([bx, by, _]) = bwd.apply(NormalizedPoint2D::new(x, y), z) else {
                continue;
            };
            let err = ((bx - p.x).powi(2) + (by - p.y).powi(2)).sqrt();
            worst = Some(worst.map_or(err, |w: f64| w.max(err)));
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DifferenceConfig {
    pub render: RenderConfig,
    /// Relative depth tolerance of the co-visibility check. When set and
    /// both depth maps are available for a 3D warp, target pixels whose
    /// surface is hidden from (or outside) the source view are masked out,
    /// unless the warped source content lies in front of that surface.
    pub occlusion_tolerance: Option<f64>,
    /// Radius, in pixels of each level, of the minimum filter applied to the
    /// co-visibility gate. Features near a hidden region still carry some
    /// of its appearance through blurring; this keeps them out too.
    pub gate_erosion: usize,
    /// Pass the target grid through the same splat kernel (identity warp,
    /// target depth) before differencing, so that both sides carry the
    /// renderer's resampling blur and unchanged content cancels.
    pub smooth_target: bool,
}

impl Default for DifferenceConfig {
    fn default() -> Self {
        Self {
            render: RenderConfig::default(),
            occlusion_tolerance: Some(0.05),
            gate_erosion: 2,
            smooth_target: true,
        }
    }
}

impl DifferenceConfig {
    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        if let Some(t) = self.occlusion_tolerance {
            if !(t > 0.0 && t < 0.5) {
                return Err(Error::domain("occlusion_tolerance must lie in (0, 0.5)"));
            }
        }
        Ok(())
    }
}

/// One resolution of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceLevel {
    /// `mask ⊙ (target − rendered)`, with the target optionally smoothed
    /// by the splat kernel.
    pub difference: FeatureGrid,
    /// Effective mask applied to the difference.
    pub mask: VisibilityMask,
    /// Mask produced by splatting alone.
    pub splat_mask: VisibilityMask,
    /// Source features rendered into the target grid.
    pub rendered: FeatureGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferencePyramid {
    pub levels: Vec<DifferenceLevel>,
}

fn level_depth(depth: Option<&DepthMap>, dims: (usize, usize)) -> Result<Option<DepthMap>> {
    let Some(d) = depth else { return Ok(None) };
    let (h, w) = dims;
    if d.width() % w != 0 || d.width() / w != d.height() / h || d.height() % h != 0 {
        return Err(Error::domain(format!(
            "depth map {}x{} does not reduce to level {w}x{h}",
            d.width(),
            d.height()
        )));
    }
    downsample_depth(d, d.width() / w).map(Some)
}

/// Registers `source` into the target grid and differences it.
fn difference_into(
    target: &FeatureGrid,
    target_depth: Option<&DepthMap>,
    source: &FeatureGrid,
    source_depth: Option<&DepthMap>,
    to_target: &Warp,
    to_source: &Warp,
    cfg: &DifferenceConfig,
) -> Result<DifferenceLevel> {
    let lift_depth = if to_target.needs_depth() {
        source_depth
    } else {
        None
    };
    let pc = lift_features(source, lift_depth, to_target)?;
    let rendered = splat_render(&pc, target.dims(), &cfg.render)?;
    let (h, w) = target.dims();

    let gate = match (cfg.occlusion_tolerance, target_depth, source_depth) {
        (Some(tol), Some(td), Some(sd)) if to_source.needs_depth() => {
            let g = covisibility_gate(td, sd, to_source, &rendered.depth, tol);
            Some(min_filter(&g, h, w, cfg.gate_erosion))
        }
        _ => None,
    };
    let mask_values: Vec<f32> = match &gate {
        Some(g) => rendered
            .mask
            .values()
            .iter()
            .zip(g)
            .map(|(m, g)| m * g)
            .collect(),
        None => rendered.mask.values().to_vec(),
    };

    let reference = if cfg.smooth_target {
        let own = lift_features(target, lift_depth.and(target_depth), &Warp::Identity)?;
        let r = splat_render(&own, (h, w), &cfg.render)?;
        let mut f = r.features;
        for (i, m) in r.mask.values().iter().enumerate() {
            if *m == 0.0 {
                for ch in 0..f.channels() {
                    f.channel_mut(ch)[i] = target.channel(ch)[i];
                }
            }
        }
        f
    } else {
        target.clone()
    };

    let c = target.channels();
    let n = h * w;
    let mut diff = vec![0.0f32; c * n];
    for ch in 0..c {
        let t = reference.channel(ch);
        let r = rendered.features.channel(ch);
        for i in 0..n {
            let m = mask_values[i];
            if m > 0.0 {
                diff[ch * n + i] = m * (t[i] - r[i]);
            }
        }
    }
    Ok(DifferenceLevel {
        difference: FeatureGrid::new(c, h, w, diff)?,
        mask: VisibilityMask::new(h, w, mask_values)?,
        splat_mask: rendered.mask,
        rendered: rendered.features,
    })
}

/// Per target pixel: 1 when its surface point is seen by the source view,
/// 0 when it is hidden there or falls outside the source frame, with a
/// linear ramp between one and two tolerances of relative depth. Pixels
/// that received warped content lying in front of the target surface keep
/// weight 1, since that content is absent from the target.
fn covisibility_gate(
    target_depth: &DepthMap,
    source_depth: &DepthMap,
    to_source: &Warp,
    rendered_depth: &[f64],
    tol: f64,
) -> Vec<f32> {
    let (h, w) = target_depth.dims();
    (0..h * w)
        .into_par_iter()
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let Some(dt) = target_depth.get(x, y) else {
                return 1.0;
            };
            if rendered_depth[i] < dt * (1.0 - tol) {
                return 1.0;
            }
            let p = NormalizedPoint2D::from_pixel(x as f64, y as f64, w, h);
            let Some([sx, sy, sz]) = to_source.apply(p, dt) else {
                return 0.0;
            };
            let q = NormalizedPoint2D::new(sx, sy);
            let Some(ds) = source_depth.sample_nearest(q) else {
                return if q.is_in_frame() { 1.0 } else { 0.0 };
            };
            let hidden = (sz - ds) / sz;
            ((2.0 * tol - hidden) / tol).clamp(0.0, 1.0) as f32
        })
        .collect()
}

/// Separable square minimum filter; the frame edge does not shrink it.
fn min_filter(src: &[f32], h: usize, w: usize, r: usize) -> Vec<f32> {
    if r == 0 {
        return src.to_vec();
    }
    let mut tmp = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let row = &src[y * w + x.saturating_sub(r)..y * w + (x + r + 1).min(w)];
            tmp[y * w + x] = row.iter().copied().fold(f32::INFINITY, f32::min);
        }
    }
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = (y.saturating_sub(r)..(y + r + 1).min(h))
                .map(|yy| tmp[yy * w + x])
                .fold(f32::INFINITY, f32::min);
        }
    }
    out
}

/// Differences both pyramids in both directions at every level.
pub fn warp_and_difference(
    pyr1: &FeaturePyramid,
    pyr2: &FeaturePyramid,
    d1: Option<&DepthMap>,
    d2: Option<&DepthMap>,
    plan: &RegistrationPlan,
    cfg: &DifferenceConfig,
) -> Result<(DifferencePyramid, DifferencePyramid)> {
    cfg.validate()?;
    if pyr1.len() != pyr2.len() || pyr1.is_empty() {
        return Err(Error::domain(
            "pyramids must have the same, non-zero number of levels",
        ));
    }
    for (a, b) in pyr1.levels.iter().zip(&pyr2.levels) {
        if a.channels() != b.channels() {
            return Err(Error::domain("pyramid levels differ in channel count"));
        }
    }
    let needs_depth = plan.warp_1to2.needs_depth() || plan.warp_2to1.needs_depth();
    if needs_depth && (d1.is_none() || d2.is_none()) {
        return Err(Error::domain("3D warps need depth maps for both images"));
    }

    let per_level: Vec<(DifferenceLevel, DifferenceLevel)> = pyr1
        .levels
        .par_iter()
        .zip(&pyr2.levels)
        .map(|(g1, g2)| {
            let l1 = level_depth(d1, g1.dims())?;
            let l2 = level_depth(d2, g2.dims())?;
            let (into1, into2) = rayon::join(
                || {
                    difference_into(
                        g1,
                        l1.as_ref(),
                        g2,
                        l2.as_ref(),
                        &plan.warp_2to1,
                        &plan.warp_1to2,
                        cfg,
                    )
                },
                || {
                    difference_into(
                        g2,
                        l2.as_ref(),
                        g1,
                        l1.as_ref(),
                        &plan.warp_1to2,
                        &plan.warp_2to1,
                        cfg,
                    )
                },
            );
            Ok((into1?, into2?))
        })
        .collect::<Result<_>>()?;

    let (levels1, levels2) = per_level.into_iter().unzip();
    Ok((
        DifferencePyramid { levels: levels1 },
        DifferencePyramid { levels: levels2 },
    ))
}
