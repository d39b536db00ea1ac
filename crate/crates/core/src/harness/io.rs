//! File formats: PNG images, PFM and 16-bit PNG depth, sample directories
//! and prediction JSON.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detect::{BBox, ScoredBox};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, CorrespondenceSet, DepthMap};
use crate::image::RgbImage;
use crate::synthgen::{ChangePairSample, GeneratorConfig, GtBox};

pub fn read_rgb_png(path: &Path) -> Result<RgbImage> {
    let img = image::open(path)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?
        .to_rgb8();
    Ok(RgbImage::from_rgb8(&img))
}

pub fn write_rgb_png(path: &Path, img: &RgbImage) -> Result<()> {
    img.to_rgb8()
        .save(path)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

/// Single-channel PFM (`Pf`), little-endian, rows stored bottom to top.
pub fn write_pfm(path: &Path, depth: &DepthMap) -> Result<()> {
    let (h, w) = depth.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for row in (0..h).rev() {
        for &v in &depth.values()[row * w..(row + 1) * w] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a single-channel PFM; non-positive or non-finite values become
/// invalid depth.
pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let bad = |d: &str| Error::format(path.display().to_string(), d.to_string());
    let mut line = String::new();
    let mut next_line = |r: &mut BufReader<fs::File>| -> Result<String> {
        line.clear();
        r.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        Ok(line.trim().to_string())
    };
    if next_line(&mut reader)? != "Pf" {
        return Err(bad("expected single-channel 'Pf' header"));
    }
    let dims = next_line(&mut reader)?;
    let mut it = dims.split_whitespace().map(str::parse::<usize>);
    let (w, h) = match (it.next(), it.next()) {
        (Some(Ok(w)), Some(Ok(h))) if w > 0 && h > 0 => (w, h),
        _ => return Err(bad("bad dimensions line")),
    };
    let scale: f64 = next_line(&mut reader)?
        .parse()
        .map_err(|_| bad("bad scale line"))?;
    let mut payload = vec![0u8; 4 * w * h];
    reader
        .read_exact(&mut payload)
        .map_err(|_| bad("truncated payload"))?;
    let mut values = vec![0.0; w * h];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let b: [u8; 4] = chunk.try_into().expect("chunks of four");
        let v = if scale < 0.0 {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (row, col) = (h - 1 - i / w, i % w);
        values[row * w + col] = v as f64;
    }
    DepthMap::from_raw_masked(w, h, values)
}

#[derive(Deserialize)]
struct DepthSidecar {
    units_per_step: f64,
}

/// 16-bit grayscale PNG depth with a JSON sidecar (same stem, `.json`)
/// holding `{"units_per_step": s}`; zero marks invalid pixels.
pub fn read_depth_png16(path: &Path) -> Result<DepthMap> {
    let sidecar = path.with_extension("json");
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let meta: DepthSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::format(sidecar.display().to_string(), e.to_string()))?;
    if !(meta.units_per_step > 0.0) {
        return Err(Error::format(
            sidecar.display().to_string(),
            "units_per_step must be > 0",
        ));
    }
    let img = image::open(path)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?
        .to_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = img
        .pixels()
        .map(|p| p.0[0] as f64 * meta.units_per_step)
        .collect();
    DepthMap::from_raw_masked(w, h, values)
}

/// Reads depth by extension: `.pfm` or 16-bit `.png`.
pub fn read_depth(path: &Path) -> Result<DepthMap> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => read_pfm(path),
        Some("png") => read_depth_png16(path),
        _ => Err(Error::format(
            path.display().to_string(),
            "depth must be .pfm or .png",
        )),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CamerasFile {
    pub cam1: CameraModel,
    pub cam2: CameraModel,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GtFile {
    pub image1: Vec<GtBox>,
    pub image2: Vec<GtBox>,
    #[serde(default)]
    pub excluded1: Vec<GtBox>,
    #[serde(default)]
    pub excluded2: Vec<GtBox>,
}

impl GtFile {
    pub fn boxes(&self) -> (Vec<BBox>, Vec<BBox>) {
        (
            self.image1.iter().map(|b| b.bbox).collect(),
            self.image2.iter().map(|b| b.bbox).collect(),
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub config_hash: String,
    pub height: usize,
    pub width: usize,
    pub removed: Vec<usize>,
}

pub fn config_hash(cfg: &GeneratorConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    hex::encode(Sha256::digest(json))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

pub fn sample_dir_name(seed: u64) -> String {
    format!("sample_{seed}")
}

/// Writes `sample_<seed>/` under `root` and returns its path.
pub fn write_sample(
    root: &Path,
    sample: &ChangePairSample,
    cfg: &GeneratorConfig,
) -> Result<PathBuf> {
    let dir = root.join(sample_dir_name(sample.seed));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_rgb_png(&dir.join("view1.png"), &sample.rgb1)?;
    write_rgb_png(&dir.join("view2.png"), &sample.rgb2)?;
    write_pfm(&dir.join("depth1.pfm"), &sample.depth1)?;
    write_pfm(&dir.join("depth2.pfm"), &sample.depth2)?;
    write_json(
        &dir.join("cameras.json"),
        &CamerasFile {
            cam1: sample.cam1,
            cam2: sample.cam2,
        },
    )?;
    let corr = dir.join("correspondences.json");
    fs::write(&corr, sample.gt_correspondences.to_json()).map_err(|e| Error::io(&corr, e))?;
    write_json(
        &dir.join("gt_boxes.json"),
        &GtFile {
            image1: sample.gt_boxes_1.clone(),
            image2: sample.gt_boxes_2.clone(),
            excluded1: sample.excluded_boxes_1.clone(),
            excluded2: sample.excluded_boxes_2.clone(),
        },
    )?;
    let (h, w) = sample.size();
    write_json(
        &dir.join("meta.json"),
        &SampleMeta {
            seed: sample.seed,
            config_hash: config_hash(cfg),
            height: h,
            width: w,
            removed: sample.removed.clone(),
        },
    )?;
    Ok(dir)
}

/// Inputs of one detection run; optional parts are loaded when present.
#[derive(Debug, Clone)]
pub struct PairInputs {
    pub name: String,
    pub rgb1: RgbImage,
    pub rgb2: RgbImage,
    pub depth1: Option<DepthMap>,
    pub depth2: Option<DepthMap>,
    pub cameras: Option<CamerasFile>,
    pub correspondences: Option<CorrespondenceSet>,
}

/// Explicit file paths for a pair outside the sample layout.
#[derive(Debug, Clone, Default)]
pub struct PairPaths {
    pub img1: PathBuf,
    pub img2: PathBuf,
    pub depth1: Option<PathBuf>,
    pub depth2: Option<PathBuf>,
    pub cameras: Option<PathBuf>,
    pub correspondences: Option<PathBuf>,
}

impl PairPaths {
    /// Paths of the standard sample layout; missing optional files are left
    /// out.
    pub fn from_sample_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        let depth =
            |stem: &str| opt(&format!("{stem}.pfm")).or_else(|| opt(&format!("{stem}.png")));
        Self {
            img1: dir.join("view1.png"),
            img2: dir.join("view2.png"),
            depth1: depth("depth1"),
            depth2: depth("depth2"),
            cameras: opt("cameras.json"),
            correspondences: opt("correspondences.json"),
        }
    }

    pub fn load(&self, name: &str) -> Result<PairInputs> {
        let corr = match &self.correspondences {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Some(CorrespondenceSet::from_json(&text)?)
            }
            None => None,
        };
        Ok(PairInputs {
            name: name.to_string(),
            rgb1: read_rgb_png(&self.img1)?,
            rgb2: read_rgb_png(&self.img2)?,
            depth1: self.depth1.as_deref().map(read_depth).transpose()?,
            depth2: self.depth2.as_deref().map(read_depth).transpose()?,
            cameras: self.cameras.as_deref().map(read_json).transpose()?,
            correspondences: corr,
        })
    }
}

/// Sample directories directly under `root`, or `root` itself when it is
/// one; sorted by name.
pub fn list_sample_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join("view1.png").exists() {
        return Ok(vec![root.to_path_buf()]);
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        if path.is_dir() && path.join("view1.png").exists() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::domain(format!(
            "no sample directories under {}",
            root.display()
        )));
    }
    Ok(dirs)
}

/// Prediction JSON with every number printed with six decimals.
pub fn predictions_json(image1: &[ScoredBox], image2: &[ScoredBox]) -> String {
    let list = |boxes: &[ScoredBox]| {
        let items: Vec<String> = boxes
            .iter()
            .map(|b| {
                let [x0, y0, x1, y1] = b.bbox.to_array();
                format!(
                    "    {{\"bbox\": [{x0:.6}, {y0:.6}, {x1:.6}, {y1:.6}], \"score\": {:.6}}}",
                    b.score
                )
            })
            .collect();
        if items.is_empty() {
            "[]".to_string()
        } else {
            format!("[\n{}\n  ]", items.join(",\n"))
        }
    };
    format!(
        "{{\n  \"image1\": {},\n  \"image2\": {}\n}}\n",
        list(image1),
        list(image2)
    )
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PredictionsFile {
    pub image1: Vec<ScoredBox>,
    pub image2: Vec<ScoredBox>,
}

pub fn write_predictions(path: &Path, image1: &[ScoredBox], image2: &[ScoredBox]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(predictions_json(image1, image2).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Draws box outlines, brighter for higher scores.
pub fn draw_overlay(img: &RgbImage, boxes: &[ScoredBox]) -> RgbImage {
    let mut out = img.clone();
    let (w, h) = (img.width(), img.height());
    for b in boxes {
        let s = b.score.clamp(0.0, 1.0) as f32;
        let color = [1.0, 1.0 - s, 0.0];
        let x0 = (b.bbox.x_min.floor().max(0.0) as usize).min(w - 1);
        let y0 = (b.bbox.y_min.floor().max(0.0) as usize).min(h - 1);
        let x1 = ((b.bbox.x_max.ceil() as usize).saturating_sub(1)).min(w - 1);
        let y1 = ((b.bbox.y_max.ceil() as usize).saturating_sub(1)).min(h - 1);
        for x in x0..=x1 {
            out.set_pixel(x, y0, color);
            out.set_pixel(x, y1, color);
        }
        for y in y0..=y1 {
            out.set_pixel(x0, y, color);
            out.set_pixel(x1, y, color);
        }
    }
    out
}

/// Grayscale PNG of `values` scaled so that `max` maps to white.
pub fn write_gray_png(
    path: &Path,
    width: usize,
    height: usize,
    values: &[f32],
    max: f32,
) -> Result<()> {
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let bytes: Vec<u8> = values
        .iter()
        .map(|v| (v * scale).clamp(0.0, 255.0).round() as u8)
        .collect();
    image::GrayImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| Error::domain("gray image size mismatch"))?
        .save(path)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}
