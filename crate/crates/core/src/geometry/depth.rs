use crate::error::{Error, Result};

use super::NormalizedPoint2D;

/// Largest relative depth spread tolerated inside a bilinear neighborhood.
pub const DISCONTINUITY_RTOL: f64 = 0.10;

/// Row-major `height × width` depth grid in scene units.
///
/// Entries that were non-positive or non-finite at load time are stored as
/// `0.0` and reported invalid by the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    invalid: usize,
}

impl DepthMap {
    /// Strict constructor: every entry must be finite and positive.
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        if let Some(&bad) = values.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidDepth(bad));
        }
        Ok(Self {
            width,
            height,
            values,
            invalid: 0,
        })
    }

    /// Lenient constructor for sensor data: bad entries are flagged invalid.
    pub fn from_raw_masked(width: usize, height: usize, mut values: Vec<f64>) -> Result<Self> {
        check_dims(width, height, values.len())?;
        let mut invalid = 0;
        for d in &mut values {
            if !(*d > 0.0 && d.is_finite()) {
                *d = 0.0;
                invalid += 1;
            }
        }
        Ok(Self {
            width,
            height,
            values,
            invalid,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::new(width, height, vec![depth; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn invalid_count(&self) -> usize {
        self.invalid
    }

    /// Valid depth at column `u`, row `v`; `None` when masked or out of
    /// range.
    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let d = self.values[v * self.width + u];
        (d > 0.0).then_some(d)
    }

    /// Depth at the pixel nearest to `p`.
    pub fn sample_nearest(&self, p: NormalizedPoint2D) -> Option<f64> {
        let (u, v) = p.to_pixel_index(self.width, self.height)?;
        self.get(u, v)
    }

    /// Bilinear depth at a subpixel location.
    ///
    /// Returns `None` outside the image, when a neighbor is invalid, or when
    /// the four neighbors spread by more than [`DISCONTINUITY_RTOL`].
    pub fn sample_bilinear(&self, p: NormalizedPoint2D) -> Option<f64> {
        if !p.is_in_frame() {
            return None;
        }
        let (u, v) = p.to_pixel(self.width, self.height);
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        let (u0, v0) = (u.floor() as usize, v.floor() as usize);
        let u1 = (u0 + 1).min(self.width - 1);
        let v1 = (v0 + 1).min(self.height - 1);
        let (fu, fv) = (u - u0 as f64, v - v0 as f64);
        let d00 = self.get(u0, v0)?;
        let d10 = self.get(u1, v0)?;
        let d01 = self.get(u0, v1)?;
        let d11 = self.get(u1, v1)?;
        let lo = d00.min(d10).min(d01).min(d11);
        let hi = d00.max(d10).max(d01).max(d11);
        if hi - lo > DISCONTINUITY_RTOL * lo {
            return None;
        }
        let top = d00 * (1.0 - fu) + d10 * fu;
        let bottom = d01 * (1.0 - fu) + d11 * fu;
        Some(top * (1.0 - fv) + bottom * fv)
    }
}

fn check_dims(width: usize, height: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::domain("depth map dimensions must be positive"));
    }
    if len != width * height {
        return Err(Error::domain(format!(
            "depth map {width}x{height} needs {} values, got {len}",
            width * height
        )));
    }
    Ok(())
}
