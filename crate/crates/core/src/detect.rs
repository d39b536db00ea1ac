//! Heatmap fusion and box extraction on top of the difference pyramids.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dfrm::{
    build_plan, warp_and_difference, DifferenceConfig, DifferencePyramid, PlanDiagnostics,
    RegistrationStrategy,
};
use crate::error::{Error, Result};
use crate::features::{extract_pyramid_pair, FeatureConfig};
use crate::geometry::DepthMap;
use crate::image::RgbImage;

const NORMALIZE_PERCENTILE: f64 = 0.995;

/// Axis-aligned box in pixel edge coordinates: pixel `(u, v)` covers
/// `[u, u+1) × [v, v+1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        [self.x_min, self.y_min, self.x_max, self.y_max]
            .iter()
            .all(|v| v.is_finite())
            && self.x_min < self.x_max
            && self.y_min < self.y_max
    }

    pub fn clipped(&self, width: usize, height: usize) -> Self {
        Self::new(
            self.x_min.clamp(0.0, width as f64),
            self.y_min.clamp(0.0, height as f64),
            self.x_max.clamp(0.0, width as f64),
            self.y_max.clamp(0.0, height as f64),
        )
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x_min <= other.x_min
            && self.y_min <= other.y_min
            && self.x_max >= other.x_max
            && self.y_max >= other.y_max
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

impl Serialize for BBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [a, b, c, e] = <[f64; 4]>::deserialize(d)?;
        Ok(Self::new(a, b, c, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    pub bbox: BBox,
    pub score: f64,
}

/// Normalized change heat over a full-resolution image.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    height: usize,
    width: usize,
    values: Vec<f32>,
    raw_max: f64,
}

impl Heatmap {
    pub fn new(height: usize, width: usize, values: Vec<f32>, raw_max: f64) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::domain("heatmap size mismatch"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("heatmap values must lie in [0, 1]"));
        }
        if !(raw_max >= 0.0 && raw_max.is_finite()) {
            return Err(Error::domain("raw_max must be finite and >= 0"));
        }
        Ok(Self {
            height,
            width,
            values,
            raw_max,
        })
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

    pub fn raw_max(&self) -> f64 {
        self.raw_max
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    pub heat_threshold: f64,
    /// Minimum component size in pixels.
    pub min_area: usize,
    /// Square structuring element radius of the closing.
    pub morph_radius: usize,
    pub max_boxes: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            heat_threshold: 0.35,
            min_area: 16,
            morph_radius: 1,
            max_boxes: 100,
        }
    }
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.heat_threshold > 0.0 && self.heat_threshold < 1.0) {
            return Err(Error::domain("heat_threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Bilinear resize with pixel-center alignment and edge clamping.
fn upsample(src: &[f32], sh: usize, sw: usize, h: usize, w: usize) -> Vec<f32> {
    if (sh, sw) == (h, w) {
        return src.to_vec();
    }
    let coord = |t: usize, n_src: usize, n_dst: usize| -> (usize, usize, f32) {
        let s =
            ((t as f64 + 0.5) * n_src as f64 / n_dst as f64 - 0.5).clamp(0.0, (n_src - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n_src - 1);
        (i0, i1, (s - i0 as f64) as f32)
    };
    let xs: Vec<_> = (0..w).map(|x| coord(x, sw, w)).collect();
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let (y0, y1, fy) = coord(y, sh, h);
        for &(x0, x1, fx) in &xs {
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bot = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

/// Averages per-level difference magnitudes at full resolution and
/// normalizes by a high percentile.
pub fn fuse_heatmap(diff: &DifferencePyramid, target: (usize, usize)) -> Result<Heatmap> {
    let (h, w) = target;
    if diff.levels.is_empty() {
        return Err(Error::domain("difference pyramid has no levels"));
    }
    if h == 0 || w == 0 {
        return Err(Error::domain("heatmap target must be non-empty"));
    }
    let mut acc = vec![0.0f32; h * w];
    for level in &diff.levels {
        let (lh, lw) = level.difference.dims();
        let norm = level.difference.channel_norm();
        for (a, v) in acc.iter_mut().zip(upsample(&norm, lh, lw, h, w)) {
            *a += v;
        }
    }
    let n_levels = diff.levels.len() as f32;
    acc.iter_mut().for_each(|a| *a /= n_levels);

    let raw_max = acc.iter().fold(0.0f32, |m, &v| m.max(v)) as f64;
    if raw_max == 0.0 {
        return Heatmap::new(h, w, vec![0.0; h * w], 0.0);
    }
    let mut sorted = acc.clone();
    sorted.sort_by(f32::total_cmp);
    let rank =
        ((NORMALIZE_PERCENTILE * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let mut scale = sorted[rank - 1] as f64;
    if scale <= 0.0 {
        scale = raw_max;
    }
    let values = acc
        .iter()
        .map(|&v| ((v as f64 / scale) as f32).clamp(0.0, 1.0))
        .collect();
    Heatmap::new(h, w, values, raw_max)
}

fn dilate(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    morph(mask, h, w, r, false)
}

fn erode(mask: &[bool], h: usize, w: usize, r: usize) -> Vec<bool> {
    morph(mask, h, w, r, true)
}

/// Square-window min/max filter; outside pixels count as `outside`.
fn morph(mask: &[bool], h: usize, w: usize, r: usize, outside: bool) -> Vec<bool> {
    let erode = outside;
    let r = r as isize;
    let mut out = vec![false; h * w];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = erode;
            'win: for dy in -r..=r {
                for dx in -r..=r {
                    let (yy, xx) = (y + dy, x + dx);
                    let v = if yy < 0 || xx < 0 || yy >= h as isize || xx >= w as isize {
                        outside
                    } else {
                        mask[(yy as usize) * w + xx as usize]
                    };
                    if v != erode {
                        acc = v;
                        break 'win;
                    }
                }
            }
            out[(y as usize) * w + x as usize] = acc;
        }
    }
    out
}

/// Thresholds, closes, labels 8-connected components and scores them.
pub fn heatmap_to_boxes(heat: &Heatmap, cfg: &DetectConfig) -> Vec<ScoredBox> {
    let (h, w) = (heat.height, heat.width);
    let thr = cfg.heat_threshold as f32;
    let binary: Vec<bool> = heat.values.iter().map(|&v| v >= thr).collect();
    let closed = if cfg.morph_radius > 0 {
        erode(
            &dilate(&binary, h, w, cfg.morph_radius),
            h,
            w,
            cfg.morph_radius,
        )
    } else {
        binary
    };

    let calibration = heat.raw_max.min(1.0);
    let mut label = vec![false; h * w];
    let mut boxes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..h * w {
        if !closed[start] || label[start] {
            continue;
        }
        label[start] = true;
        queue.push_back(start);
        let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0, 0);
        let (mut area, mut sum) = (0usize, 0.0f64);
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            area += 1;
            sum += heat.values[i] as f64;
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
                        continue;
                    }
                    let j = yy as usize * w + xx as usize;
                    if closed[j] && !label[j] {
                        label[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if area < cfg.min_area {
            continue;
        }
        boxes.push(ScoredBox {
            bbox: BBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64),
            score: (sum / area as f64 * calibration).clamp(0.0, 1.0),
        });
    }
    // stable sort keeps raster order of discovery for equal scores
    boxes.sort_by(|a, b| b.score.total_cmp(&a.score));
    boxes.truncate(cfg.max_boxes);
    boxes
}

/// All stage configurations of the detection pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub difference: DifferenceConfig,
    pub detect: DetectConfig,
    /// Return empty predictions instead of an error when registration fails.
    pub registration_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image1: Vec<ScoredBox>,
    pub image2: Vec<ScoredBox>,
    pub heat1: Option<Heatmap>,
    pub heat2: Option<Heatmap>,
    pub diagnostics: PlanDiagnostics,
}

/// Features, registration, differencing, fusion and boxes for both images.
pub fn detect_changes(
    img1: &RgbImage,
    img2: &RgbImage,
    depth1: Option<&DepthMap>,
    depth2: Option<&DepthMap>,
    strategy: &RegistrationStrategy,
    cfg: &PipelineConfig,
) -> Result<Detection> {
    cfg.detect.validate()?;
    cfg.difference.validate()?;
    cfg.features.validate()?;
    if (img1.width(), img1.height()) != (img2.width(), img2.height()) {
        return Err(Error::domain("images must have the same size"));
    }
    let dims = (img1.height(), img1.width());
    for d in [depth1, depth2].into_iter().flatten() {
        if d.dims() != dims {
            return Err(Error::domain(format!(
                "depth map {}x{} does not match image {}x{}",
                d.width(),
                d.height(),
                dims.1,
                dims.0
            )));
        }
    }

    let plan = match build_plan(strategy, depth1, depth2) {
        Ok(p) => p,
        Err(e) if e.is_registration_failure() && cfg.registration_fallback => {
            log::warn!("registration failed, emitting no predictions: {e}");
            return Ok(Detection {
                image1: Vec::new(),
                image2: Vec::new(),
                heat1: None,
                heat2: None,
                diagnostics: PlanDiagnostics {
                    strategy: strategy.name().to_string(),
                    ..Default::default()
                },
            });
        }
        Err(e) => return Err(e),
    };
    let (pyr1, pyr2) = extract_pyramid_pair(img1, img2, &cfg.features)?;
    let (h1, h2) = warp_and_difference(&pyr1, &pyr2, depth1, depth2, &plan, &cfg.difference)?;
    let heat1 = fuse_heatmap(&h1, dims)?;
    let heat2 = fuse_heatmap(&h2, dims)?;
    Ok(Detection {
        image1: heatmap_to_boxes(&heat1, &cfg.detect),
        image2: heatmap_to_boxes(&heat2, &cfg.detect),
        heat1: Some(heat1),
        heat2: Some(heat2),
        diagnostics: plan.diagnostics,
    })
}
