//! Deterministic multi-scale features standing in for a learned encoder.
//!
//! Per blur scale, level 0 carries Gaussian-smoothed RGB (3 channels) and
//! gradient responses (magnitude plus 4 soft-binned orientation channels).
//! Channels are standardized over the image interior. Each deeper level is
//! a 2×2 area average of the previous one, smoothed again.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featgrid::FeatureGrid;
use crate::image::RgbImage;

const ORIENTATION_BINS: usize = 4;
/// Blur applied after each 2× reduction, in pixels of the coarser level.
const LEVEL_SMOOTH_SIGMA: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub levels: usize,
    pub gaussian_sigmas: Vec<f64>,
    pub include_color: bool,
    pub include_gradients: bool,
    /// Scale applied to the standardized gradient channels. Gradient
    /// orientation changes under perspective, so these channels are noisier
    /// across views than color.
    pub gradient_weight: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            levels: 3,
            gaussian_sigmas: vec![1.0],
            include_color: true,
            include_gradients: true,
            gradient_weight: 0.1,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 {
            return Err(Error::domain("feature levels must be >= 1"));
        }
        if !(self.include_color || self.include_gradients) {
            return Err(Error::domain("enable color or gradient channels"));
        }
        if self.gaussian_sigmas.is_empty() {
            return Err(Error::domain("at least one blur scale is required"));
        }
        if self
            .gaussian_sigmas
            .iter()
            .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return Err(Error::domain("blur scales must be finite and >= 0"));
        }
        if !(self.gradient_weight > 0.0 && self.gradient_weight.is_finite()) {
            return Err(Error::domain("gradient_weight must be > 0"));
        }
        Ok(())
    }

    /// Channels per level implied by this configuration (8 for the default).
    pub fn channel_count(&self) -> usize {
        let per_sigma = 3 * usize::from(self.include_color)
            + (1 + ORIENTATION_BINS) * usize::from(self.include_gradients);
        per_sigma * self.gaussian_sigmas.len()
    }

    /// Smallest side length the pyramid accepts.
    pub fn min_side(&self) -> usize {
        (1usize << (self.levels - 1)) * 8
    }
}

/// Feature grids at resolutions `(H/2^ℓ, W/2^ℓ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub levels: Vec<FeatureGrid>,
}

impl FeaturePyramid {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

pub fn extract_pyramid(image: &RgbImage, cfg: &FeatureConfig) -> Result<FeaturePyramid> {
    check_size(image, cfg)?;
    let raw = raw_channels(image, cfg);
    let stats = channel_stats(&[&raw], image.width(), image.height(), border(cfg));
    build_pyramid(raw, &stats, image.width(), image.height(), cfg)
}

/// Pyramids of two images standardized with statistics pooled over both,
/// so that the same surface maps to the same features in either view.
pub fn extract_pyramid_pair(
    img1: &RgbImage,
    img2: &RgbImage,
    cfg: &FeatureConfig,
) -> Result<(FeaturePyramid, FeaturePyramid)> {
    check_size(img1, cfg)?;
    check_size(img2, cfg)?;
    if (img1.width(), img1.height()) != (img2.width(), img2.height()) {
        return Err(Error::domain("images must have the same size"));
    }
    let (w, h) = (img1.width(), img1.height());
    let (raw1, raw2) = rayon::join(|| raw_channels(img1, cfg), || raw_channels(img2, cfg));
    let stats = channel_stats(&[&raw1, &raw2], w, h, border(cfg));
    let (p1, p2) = rayon::join(
        || build_pyramid(raw1, &stats, w, h, cfg),
        || build_pyramid(raw2, &stats, w, h, cfg),
    );
    Ok((p1?, p2?))
}

fn check_size(image: &RgbImage, cfg: &FeatureConfig) -> Result<()> {
    cfg.validate()?;
    let (h, w) = (image.height(), image.width());
    let min = cfg.min_side();
    if h < min || w < min {
        return Err(Error::domain(format!(
            "image {w}x{h} is smaller than {min}x{min} needed for {} levels",
            cfg.levels
        )));
    }
    Ok(())
}

fn border(cfg: &FeatureConfig) -> usize {
    cfg.gaussian_sigmas
        .iter()
        .fold(0.0f64, |a, &s| a.max(s))
        .ceil() as usize
}

fn build_pyramid(
    raw: Vec<Vec<f32>>,
    stats: &[(f64, f64)],
    w: usize,
    h: usize,
    cfg: &FeatureConfig,
) -> Result<FeaturePyramid> {
    let mut levels = Vec::with_capacity(cfg.levels);
    levels.push(base_level(raw, stats, w, h, cfg)?);
    for _ in 1..cfg.levels {
        let prev = levels.last().expect("level 0 exists");
        levels.push(reduce(prev)?);
    }
    Ok(FeaturePyramid { levels })
}

/// Unstandardized level-0 channels in output order.
fn raw_channels(image: &RgbImage, cfg: &FeatureConfig) -> Vec<Vec<f32>> {
    let (h, w) = (image.height(), image.width());
    let planes: Vec<Vec<f32>> = (0..3)
        .map(|c| image.data().iter().skip(c).step_by(3).copied().collect())
        .collect();

    let per_sigma: Vec<Vec<Vec<f32>>> = cfg
        .gaussian_sigmas
        .par_iter()
        .map(|&sigma| {
            let blurred: Vec<Vec<f32>> = planes
                .iter()
                .map(|p| gaussian_blur(p, w, h, sigma))
                .collect();
            let mut out = Vec::new();
            if cfg.include_gradients {
                let gray: Vec<f32> = (0..w * h)
                    .map(|i| 0.299 * blurred[0][i] + 0.587 * blurred[1][i] + 0.114 * blurred[2][i])
                    .collect();
                let (mag, bins) = gradient_channels(&gray, w, h);
                if cfg.include_color {
                    out.extend(blurred);
                }
                out.push(mag);
                out.extend(bins);
            } else {
                out.extend(blurred);
            }
            out
        })
        .collect();
    per_sigma.into_iter().flatten().collect()
}

/// Per-channel `(mean, std)` over pixels at least `border` away from the
/// image edge, pooled over all given channel sets.
fn channel_stats(sets: &[&Vec<Vec<f32>>], w: usize, h: usize, border: usize) -> Vec<(f64, f64)> {
    let b = border.min((w - 1) / 2).min((h - 1) / 2);
    (0..sets[0].len())
        .map(|c| {
            let (mut sum, mut sum2, mut n) = (0.0f64, 0.0f64, 0usize);
            for set in sets {
                let ch = &set[c];
                for y in b..h - b {
                    for &v in &ch[y * w + b..y * w + w - b] {
                        sum += v as f64;
                        sum2 += (v as f64) * (v as f64);
                        n += 1;
                    }
                }
            }
            let mean = sum / n as f64;
            let var = (sum2 / n as f64 - mean * mean).max(0.0);
            (mean, var.sqrt())
        })
        .collect()
}

fn base_level(
    mut channels: Vec<Vec<f32>>,
    stats: &[(f64, f64)],
    w: usize,
    h: usize,
    cfg: &FeatureConfig,
) -> Result<FeatureGrid> {
    let per_sigma = cfg.channel_count() / cfg.gaussian_sigmas.len();
    let color = 3 * usize::from(cfg.include_color);
    let gw = cfg.gradient_weight;
    channels.par_iter_mut().enumerate().for_each(|(i, ch)| {
        let weight = if i % per_sigma >= color { gw } else { 1.0 };
        standardize(ch, stats[i], weight);
    });
    FeatureGrid::new(channels.len(), h, w, channels.concat())
}

/// Gradient magnitude and its soft assignment to 4 unsigned orientation
/// bins (0°, 45°, 90°, 135°), interpolating linearly between neighbors.
fn gradient_channels(gray: &[f32], w: usize, h: usize) -> (Vec<f32>, Vec<Vec<f32>>) {
    let mut mag = vec![0.0f32; w * h];
    let mut bins = vec![vec![0.0f32; w * h]; ORIENTATION_BINS];
    let at = |x: usize, y: usize| gray[y * w + x];
    for y in 0..h {
        for x in 0..w {
            let gx = 0.5 * (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y));
            let gy = 0.5 * (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1)));
            let m = (gx * gx + gy * gy).sqrt();
            let i = y * w + x;
            mag[i] = m;
            if m == 0.0 {
                continue;
            }
            let theta = gy.atan2(gx).rem_euclid(std::f32::consts::PI);
            let pos = theta / (std::f32::consts::PI / ORIENTATION_BINS as f32);
            let lo = (pos.floor() as usize) % ORIENTATION_BINS;
            let frac = pos - pos.floor();
            bins[lo][i] += m * (1.0 - frac);
            bins[(lo + 1) % ORIENTATION_BINS][i] += m * frac;
        }
    }
    (mag, bins)
}

/// Zero mean and unit variance, times `weight`. Near-constant channels
/// are only centered.
fn standardize(ch: &mut [f32], (mean, std): (f64, f64), weight: f64) {
    let scale = weight * if std > 1e-6 { 1.0 / std } else { 1.0 };
    for v in ch.iter_mut() {
        *v = ((*v as f64 - mean) * scale) as f32;
    }
}

fn reduce(prev: &FeatureGrid) -> Result<FeatureGrid> {
    let (h, w) = (prev.height() / 2, prev.width() / 2);
    let pw = prev.width();
    let channels: Vec<Vec<f32>> = (0..prev.channels())
        .into_par_iter()
        .map(|c| {
            let src = prev.channel(c);
            let down: Vec<f32> = (0..h)
                .flat_map(|y| {
                    (0..w).map(move |x| {
                        let i = 2 * y * pw + 2 * x;
                        0.25 * (src[i] + src[i + 1] + src[i + pw] + src[i + pw + 1])
                    })
                })
                .collect();
            gaussian_blur(&down, w, h, LEVEL_SMOOTH_SIGMA)
        })
        .collect();
    FeatureGrid::new(prev.channels(), h, w, channels.concat())
}

/// Separable Gaussian blur with clamp-to-edge borders.
pub(crate) fn gaussian_blur(src: &[f32], w: usize, h: usize, sigma: f64) -> Vec<f32> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32)
        .collect();
    let total: f32 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * row[clamp(x as isize + k as isize - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp[clamp(y as isize + k as isize - radius, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}
