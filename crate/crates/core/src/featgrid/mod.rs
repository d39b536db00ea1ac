//! Feature grids, lifting to warped point clouds and soft splat rendering.

mod io;
mod lift;
mod render;

pub use io::{read_feature_grid, write_feature_grid};
pub use lift::{downsample_depth, lift_features, Warp};
pub use render::{render_linearity_check, splat_render, RenderConfig, Rendered};

use crate::error::{Error, Result};

/// `c × h × w` feature map stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::domain("feature grid dimensions must be positive"));
        }
        if data.len() != channels * height * width {
            return Err(Error::domain(format!(
                "{channels}x{height}x{width} grid needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("feature grid has non-finite values"));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Per-pixel L2 norm across channels, row-major.
    pub fn channel_norm(&self) -> Vec<f32> {
        let n = self.height * self.width;
        let mut acc = vec![0.0f64; n];
        for c in 0..self.channels {
            for (a, &v) in acc.iter_mut().zip(self.channel(c)) {
                *a += (v as f64) * (v as f64);
            }
        }
        acc.into_iter().map(|s| s.sqrt() as f32).collect()
    }
}

/// Soft per-pixel visibility in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMask {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl VisibilityMask {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::domain("mask size does not match dimensions"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("mask values must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }
}

/// Warped points, each carrying a feature vector.
///
/// Positions are stored as `(x, y, z)`: the normalized image location in
/// the target view and the depth there.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePointCloud {
    channels: usize,
    positions: Vec<[f64; 3]>,
    features: Vec<f32>,
    source_dims: (usize, usize),
    dropped: usize,
}

impl FeaturePointCloud {
    pub fn new(
        channels: usize,
        positions: Vec<[f64; 3]>,
        features: Vec<f32>,
        source_dims: (usize, usize),
    ) -> Result<Self> {
        if channels == 0 {
            return Err(Error::domain("point cloud needs at least one channel"));
        }
        if features.len() != positions.len() * channels {
            return Err(Error::domain("feature buffer does not match point count"));
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::domain("point positions must be finite"));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("point features must be finite"));
        }
        Ok(Self {
            channels,
            positions,
            features,
            source_dims,
            dropped: 0,
        })
    }

    pub fn empty(channels: usize) -> Self {
        Self {
            channels,
            positions: Vec::new(),
            features: Vec::new(),
            source_dims: (0, 0),
            dropped: 0,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f32] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    /// Cells that could not be lifted (invalid depth, behind the target
    /// camera, or at infinity).
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    /// Same geometry with a different feature buffer.
    pub fn with_features(&self, channels: usize, features: Vec<f32>) -> Result<Self> {
        let mut pc = Self::new(channels, self.positions.clone(), features, self.source_dims)?;
        pc.dropped = self.dropped;
        Ok(pc)
    }
}
