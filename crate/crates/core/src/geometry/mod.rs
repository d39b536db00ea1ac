//! Coordinate conventions, back-projection and transform estimation.
//!
//! Normalized image coordinates use the pixel-center convention: pixel
//! `(u, v)` of a `W×H` image maps to `x = (2u + 1 − W)/W`,
//! `y = (2v + 1 − H)/H`, so the image spans `[−1, 1]` on both axes and the
//! mapping does not depend on resolution.

mod camera;
mod depth;
mod homography;
mod ransac;
mod transform;

pub use camera::{relative_pose_transform, CameraModel, PoseWarp};
pub use depth::DepthMap;
pub use homography::{estimate_homography_dlt, Homography2D};
pub use ransac::{estimate_transform_ransac, ransac_transform_points, RansacConfig, RansacFit};
pub use transform::{apply_transform, estimate_transform_lsq, LsqFit, Transform3D, PINV_RTOL};

use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Image location in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedPoint2D {
    pub x: f64,
    pub y: f64,
}

impl NormalizedPoint2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Continuous pixel coordinates (pixel centers at integers) in a
    /// `width × height` image.
    pub fn to_pixel(self, width: usize, height: usize) -> (f64, f64) {
        (
            (self.x * width as f64 + width as f64 - 1.0) / 2.0,
            (self.y * height as f64 + height as f64 - 1.0) / 2.0,
        )
    }

    /// Inverse of [`normalize_pixel`]: the integer pixel whose center this
    /// point is closest to, or `None` when it lies outside the image.
    pub fn to_pixel_index(self, width: usize, height: usize) -> Option<(usize, usize)> {
        let (u, v) = self.to_pixel(width, height);
        let (u, v) = (u.round(), v.round());
        (u >= 0.0 && v >= 0.0 && u < width as f64 && v < height as f64)
            .then_some((u as usize, v as usize))
    }

    pub fn from_pixel(u: f64, v: f64, width: usize, height: usize) -> Self {
        Self {
            x: (2.0 * u + 1.0 - width as f64) / width as f64,
            y: (2.0 * v + 1.0 - height as f64) / height as f64,
        }
    }

    pub fn is_in_frame(self) -> bool {
        self.x.abs() <= 1.0 && self.y.abs() <= 1.0
    }
}

pub fn normalize_pixel(
    u: usize,
    v: usize,
    width: usize,
    height: usize,
) -> Result<NormalizedPoint2D> {
    if u >= width || v >= height {
        return Err(Error::domain(format!(
            "pixel ({u}, {v}) outside {width}x{height} image"
        )));
    }
    Ok(NormalizedPoint2D::from_pixel(
        u as f64, v as f64, width, height,
    ))
}

/// Depth-scaled homogeneous point `(d·x, d·y, d, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousPoint3D(pub Vector4<f64>);

impl HomogeneousPoint3D {
    pub fn new(a: f64, b: f64, c: f64, w: f64) -> Self {
        Self(Vector4::new(a, b, c, w))
    }
}

pub fn back_project(p: NormalizedPoint2D, depth: f64) -> Result<HomogeneousPoint3D> {
    if !(depth > 0.0 && depth.is_finite()) {
        return Err(Error::InvalidDepth(depth));
    }
    Ok(HomogeneousPoint3D::new(
        depth * p.x,
        depth * p.y,
        depth,
        1.0,
    ))
}

/// Matched image locations, `pairs[i] = (point in r, point in q)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<(NormalizedPoint2D, NormalizedPoint2D)>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<(NormalizedPoint2D, NormalizedPoint2D)>) -> Result<Self> {
        for (i, (r, q)) in pairs.iter().enumerate() {
            let ok = [r.x, r.y, q.x, q.y]
                .iter()
                .all(|c| c.is_finite() && c.abs() <= 1.0);
            if !ok {
                return Err(Error::domain(format!(
                    "correspondence {i} has coordinates outside [-1, 1]"
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The same matches seen from q to r.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(r, q)| (q, r)).collect(),
        }
    }

    /// Parses `{"pairs": [[xr, yr, xq, yq], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Doc {
            pairs: Vec<[f64; 4]>,
        }
        let doc: Doc =
            serde_json::from_str(text).map_err(|e| Error::format("correspondence JSON", e))?;
        Self::new(
            doc.pairs
                .into_iter()
                .map(|[a, b, c, d]| (NormalizedPoint2D::new(a, b), NormalizedPoint2D::new(c, d)))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let pairs: Vec<[f64; 4]> = self
            .pairs
            .iter()
            .map(|(r, q)| [r.x, r.y, q.x, q.y])
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "pairs": pairs }))
            .expect("plain arrays serialize")
    }
}
