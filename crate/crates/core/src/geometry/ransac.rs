use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::transform::MIN_HOMOGENEOUS_SCALE;
use super::{
    back_project, estimate_transform_lsq, CorrespondenceSet, DepthMap, HomogeneousPoint3D,
    Transform3D,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Reprojection distance in normalized image units.
    pub inlier_threshold: f64,
    pub min_sample: usize,
    pub seed: u64,
    /// Early-exit confidence that an outlier-free sample was drawn.
    pub confidence: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            inlier_threshold: 0.01,
            min_sample: 5,
            seed: 0,
            confidence: 0.999,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::domain("inlier_threshold must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be >= 1"));
        }
        if self.min_sample < 4 {
            return Err(Error::domain("min_sample must be >= 4"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::domain("confidence must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    pub transform: Transform3D,
    /// One flag per input correspondence; samples rejected at depth lookup
    /// are never inliers.
    pub inliers: Vec<bool>,
    pub inlier_count: usize,
    pub iterations: usize,
    /// Mean reprojection residual over the final inliers.
    pub mean_residual: f64,
    pub condition_number: f64,
    /// Correspondences dropped because depth could not be sampled.
    pub depth_rejected: usize,
}

/// Robust 3D transform from 2D matches and the two depth maps.
///
/// Depth is sampled bilinearly at each match; samples on depth edges are
/// discarded. Candidate models are scored by the distance between the
/// warped point's projection `(x′/z′, y′/z′)` and the observed location in
/// q.
pub fn estimate_transform_ransac(
    corr: &CorrespondenceSet,
    depth_r: &DepthMap,
    depth_q: &DepthMap,
    cfg: &RansacConfig,
) -> Result<RansacFit> {
    cfg.validate()?;
    if corr.len() < cfg.min_sample {
        return Err(Error::InsufficientData {
            needed: cfg.min_sample,
            got: corr.len(),
        });
    }
    let mut index = Vec::with_capacity(corr.len());
    let mut src = Vec::with_capacity(corr.len());
    let mut dst = Vec::with_capacity(corr.len());
    for (i, &(pr, pq)) in corr.pairs.iter().enumerate() {
        let (Some(dr), Some(dq)) = (depth_r.sample_bilinear(pr), depth_q.sample_bilinear(pq))
        else {
            continue;
        };
        src.push(back_project(pr, dr)?);
        dst.push(back_project(pq, dq)?);
        index.push(i);
    }
    let depth_rejected = corr.len() - index.len();
    if index.len() < cfg.min_sample {
        return Err(Error::InsufficientData {
            needed: cfg.min_sample,
            got: index.len(),
        });
    }
    let mut fit = ransac_transform_points(&src, &dst, cfg)?;
    let mut inliers = vec![false; corr.len()];
    for (k, &i) in index.iter().enumerate() {
        inliers[i] = fit.inliers[k];
    }
    fit.inliers = inliers;
    fit.depth_rejected = depth_rejected;
    Ok(fit)
}

/// Reprojection residual of one match under `t`; infinite when the warped
/// point is at infinity or behind the target camera.
pub(crate) fn reprojection_residual(
    t: &Transform3D,
    src: &HomogeneousPoint3D,
    dst: &HomogeneousPoint3D,
) -> f64 {
    let w = t.0 * src.0;
    if w[3].abs() < MIN_HOMOGENEOUS_SCALE || !(w[2] / w[3] > 0.0) {
        return f64::INFINITY;
    }
    let (px, py) = (w[0] / w[2], w[1] / w[2]);
    let (ox, oy) = (dst.0[0] / dst.0[2], dst.0[1] / dst.0[2]);
    ((px - ox).powi(2) + (py - oy).powi(2)).sqrt()
}

fn score(
    t: &Transform3D,
    src: &[HomogeneousPoint3D],
    dst: &[HomogeneousPoint3D],
    threshold: f64,
) -> (Vec<bool>, usize, f64) {
    let mut mask = Vec::with_capacity(src.len());
    let mut count = 0;
    let mut total = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let r = reprojection_residual(t, s, d);
        let inlier = r < threshold;
        if inlier {
            count += 1;
            total += r;
        }
        mask.push(inlier);
    }
    (mask, count, total)
}

fn select<T: Copy>(items: &[T], mask: &[bool]) -> Vec<T> {
    items
        .iter()
        .zip(mask)
        .filter_map(|(v, &keep)| keep.then_some(*v))
        .collect()
}

/// RANSAC over already lifted point pairs (`dst` doubles as the observed
/// 2D location via its projection).
pub fn ransac_transform_points(
    src: &[HomogeneousPoint3D],
    dst: &[HomogeneousPoint3D],
    cfg: &RansacConfig,
) -> Result<RansacFit> {
    cfg.validate()?;
    if src.len() != dst.len() {
        return Err(Error::domain("source and destination lengths differ"));
    }
    let n = src.len();
    let m = cfg.min_sample;
    if n < m {
        return Err(Error::InsufficientData { needed: m, got: n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Vec<bool>, usize, f64)> = None;
    let mut budget = cfg.max_iterations;
    let mut iterations = 0;
    let mut sample_src = Vec::with_capacity(m);
    let mut sample_dst = Vec::with_capacity(m);
    while iterations < budget {
        iterations += 1;
        let picks = rand::seq::index::sample(&mut rng, n, m);
        sample_src.clear();
        sample_dst.clear();
        for i in picks.iter() {
            sample_src.push(src[i]);
            sample_dst.push(dst[i]);
        }
        let Ok(model) = estimate_transform_lsq(&sample_src, &sample_dst) else {
            continue;
        };
        let (mask, count, total) = score(&model.transform, src, dst, cfg.inlier_threshold);
        let better = match &best {
            None => true,
            Some((_, c, t)) => count > *c || (count == *c && total < *t),
        };
        if better {
            best = Some((mask, count, total));
            let w = count as f64 / n as f64;
            let p_good = w.powi(m as i32);
            budget = if p_good >= 1.0 {
                iterations
            } else if p_good <= 0.0 {
                cfg.max_iterations
            } else {
                let needed = ((1.0 - cfg.confidence).ln() / (1.0 - p_good).ln()).ceil();
                (needed.max(1.0) as usize).min(cfg.max_iterations)
            };
        }
    }

    let Some((mut mask, count, _)) = best.filter(|(_, c, _)| *c >= m) else {
        return Err(Error::RegistrationFailure(format!(
            "no model reached {m} inliers in {iterations} iterations"
        )));
    };
    debug_assert!(count >= m);

    // Refit on the consensus set until the set stops changing.
    let mut fit = estimate_transform_lsq(&select(src, &mask), &select(dst, &mask))?;
    for _ in 0..10 {
        let (next, next_count, _) = score(&fit.transform, src, dst, cfg.inlier_threshold);
        if next == mask || next_count < m {
            break;
        }
        let Ok(refit) = estimate_transform_lsq(&select(src, &next), &select(dst, &next)) else {
            break;
        };
        mask = next;
        fit = refit;
    }
    let (_, final_count, final_total) = score(&fit.transform, src, dst, cfg.inlier_threshold);
    let inlier_count = mask.iter().filter(|b| **b).count();
    let mean_residual = if final_count > 0 {
        final_total / final_count as f64
    } else {
        f64::INFINITY
    };
    Ok(RansacFit {
        transform: fit.transform,
        inliers: mask,
        inlier_count,
        iterations,
        mean_residual,
        condition_number: fit.condition_number(),
        depth_rejected: 0,
    })
}
