use crate::error::{Error, Result};
use crate::geometry::{
    apply_transform, back_project, DepthMap, Homography2D, NormalizedPoint2D, PoseWarp, Transform3D,
};

use super::{FeatureGrid, FeaturePointCloud};

/// How a source-view location and depth move into the target view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warp {
    Identity,
    Homography(Homography2D),
    Transform(Transform3D),
    Pose(PoseWarp),
}

impl Warp {
    pub fn needs_depth(&self) -> bool {
        matches!(self, Warp::Transform(_) | Warp::Pose(_))
    }

    /// Target-view `(x, y, depth)`, or `None` when the point is at infinity
    /// or behind the target camera.
    pub fn apply(&self, p: NormalizedPoint2D, depth: f64) -> Option<[f64; 3]> {
        let out = match self {
            Warp::Identity => [p.x, p.y, depth],
            Warp::Homography(h) => {
                let q = h.apply(p)?;
                [q.x, q.y, depth]
            }
            Warp::Transform(t) => {
                let [a, b, c] = apply_transform(t, &back_project(p, depth).ok()?).ok()?;
                if !(c > 0.0) {
                    return None;
                }
                [a / c, b / c, c]
            }
            Warp::Pose(w) => {
                let (q, d) = w.warp_normalized(p, depth)?;
                [q.x, q.y, d]
            }
        };
        (out.iter().all(|v| v.is_finite()) && out[2] > 0.0).then_some(out)
    }
}

/// Lifts every grid cell to a warped 3D point carrying its feature vector.
///
/// Depth is required for the 3D warps; identity and homography warps use
/// depth 1 when none is given and carry depth through unchanged.
pub fn lift_features(
    grid: &FeatureGrid,
    depth: Option<&DepthMap>,
    warp: &Warp,
) -> Result<FeaturePointCloud> {
    let (h, w) = grid.dims();
    if let Some(d) = depth {
        if d.dims() != (h, w) {
            return Err(Error::domain(format!(
                "depth map is {}x{} but feature grid is {}x{}",
                d.height(),
                d.width(),
                h,
                w
            )));
        }
    } else if warp.needs_depth() {
        return Err(Error::domain("3D warps need a depth map"));
    }

    let c = grid.channels();
    let mut positions = Vec::with_capacity(h * w);
    let mut features = Vec::with_capacity(h * w * c);
    let mut dropped = 0;
    for y in 0..h {
        for x in 0..w {
            let d = match depth {
                Some(d) => match d.get(x, y) {
                    Some(v) => v,
                    None => {
                        dropped += 1;
                        continue;
                    }
                },
                None => 1.0,
            };
            let p = NormalizedPoint2D::from_pixel(x as f64, y as f64, w, h);
            let Some(pos) = warp.apply(p, d) else {
                dropped += 1;
                continue;
            };
            positions.push(pos);
            features.extend((0..c).map(|ch| grid.get(ch, y, x)));
        }
    }
    let mut pc = FeaturePointCloud::new(c, positions, features, (h, w))?;
    pc.dropped = dropped;
    Ok(pc)
}

/// Nearest-neighbor decimation keeping the top-left sample of each block.
pub fn downsample_depth(depth: &DepthMap, factor: usize) -> Result<DepthMap> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::domain(format!(
            "factor {factor} is not a power of two"
        )));
    }
    let (h, w) = depth.dims();
    if h % factor != 0 || w % factor != 0 {
        return Err(Error::domain(format!(
            "factor {factor} does not divide {w}x{h}"
        )));
    }
    if factor == 1 {
        return Ok(depth.clone());
    }
    let (oh, ow) = (h / factor, w / factor);
    let values = depth.values();
    let out = (0..oh)
        .flat_map(|y| (0..ow).map(move |x| values[y * factor * w + x * factor]))
        .collect();
    DepthMap::from_raw_masked(ow, oh, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_lift_places_points_at_cell_centers() {
        let grid = FeatureGrid::new(2, 2, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let depth = DepthMap::constant(2, 2, 1.0).unwrap();
        let pc = lift_features(&grid, Some(&depth), &Warp::Identity).unwrap();
        assert_eq!(pc.len(), 4);
        assert_eq!(
            pc.positions(),
            &[
                [-0.5, -0.5, 1.0],
                [0.5, -0.5, 1.0],
                [-0.5, 0.5, 1.0],
                [0.5, 0.5, 1.0]
            ]
        );
        assert_eq!(pc.feature(1), &[2.0, 6.0]);
        assert_eq!(pc.dropped(), 0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let grid = FeatureGrid::zeros(1, 3, 3);
        let depth = DepthMap::constant(5, 5, 1.0).unwrap();
        assert!(matches!(
            lift_features(&grid, Some(&depth), &Warp::Identity),
            Err(Error::InputDomain(_))
        ));
        assert!(lift_features(&grid, None, &Warp::Transform(Transform3D::identity())).is_err());
    }

    #[test]
    fn points_behind_camera_are_counted() {
        let grid = FeatureGrid::zeros(1, 2, 2);
        let depth = DepthMap::constant(2, 2, 1.0).unwrap();
        let mut flip = Transform3D::identity();
        flip.0[(2, 2)] = -1.0;
        let pc = lift_features(&grid, Some(&depth), &Warp::Transform(flip)).unwrap();
        assert_eq!(pc.len(), 0);
        assert_eq!(pc.dropped(), 4);
    }

    #[test]
    fn downsample_examples() {
        let d = DepthMap::new(4, 4, (1..=16).map(f64::from).collect()).unwrap();
        assert_eq!(downsample_depth(&d, 1).unwrap(), d);
        let half = downsample_depth(&d, 2).unwrap();
        assert_eq!(half.values(), &[1.0, 3.0, 9.0, 11.0]);
        let c = DepthMap::constant(8, 4, 2.5).unwrap();
        assert!(downsample_depth(&c, 4)
            .unwrap()
            .values()
            .iter()
            .all(|v| *v == 2.5));
        assert!(downsample_depth(&d, 3).is_err());
        assert!(downsample_depth(&d, 8).is_err());
    }
}
