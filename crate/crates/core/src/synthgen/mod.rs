//! Synthetic two-view change pairs with exact geometry.
//!
//! A scene is a value-noise textured ground plane `z = 0` (world z up) with
//! axis-aligned boxes and spheres resting on it. Two cameras are drawn on a
//! cylinder around the scene; view 1 sees the full scene and view 2 sees it
//! after some objects were removed.

mod raycast;
mod texture;

use std::collections::HashSet;

use nalgebra::Vector3;
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detect::BBox;
use crate::error::{Error, Result};
use crate::geometry::{
    relative_pose_transform, CameraModel, CorrespondenceSet, DepthMap, Homography2D,
    NormalizedPoint2D,
};
use crate::image::RgbImage;

use raycast::{
    cast, pixel_ray_world, projected_extent, render_present, visibility_fraction, Surface,
};

pub use raycast::FAR_DEPTH;

const PLACEMENT_ATTEMPTS: usize = 10_000;
const CAMERA_ATTEMPTS: usize = 50;
const MIN_CORRESPONDENCES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Shape {
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub center: [f64; 3],
    pub albedo: [f64; 3],
    pub texture_seed: u64,
}

impl ObjectSpec {
    /// Radius of a vertical cylinder enclosing the object.
    pub fn footprint_radius(&self) -> f64 {
        match self.shape {
            Shape::Box { size } => 0.5 * size[0].hypot(size[1]),
            Shape::Sphere { radius } => radius,
        }
    }

    pub fn lowest_z(&self) -> f64 {
        match self.shape {
            Shape::Box { size } => self.center[2] - size[2] / 2.0,
            Shape::Sphere { radius } => self.center[2] - radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneSpec {
    pub base_color: [f64; 3],
    pub contrast: f64,
    pub texture_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub plane: PlaneSpec,
    pub objects: Vec<ObjectSpec>,
    /// Unit vector towards the light.
    pub light_dir: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraRig {
    /// Horizontal distance from the scene center, metres.
    pub radius_range: [f64; 2],
    pub height_range: [f64; 2],
    /// Half-width of the uniform look-at offset on the ground, metres.
    pub look_at_jitter: f64,
    /// Azimuth difference between the two views, degrees.
    pub azimuth_delta_range: [f64; 2],
    pub hfov_deg: f64,
}

impl Default for CameraRig {
    fn default() -> Self {
        Self {
            radius_range: [2.0, 4.0],
            height_range: [0.5, 2.5],
            look_at_jitter: 0.2,
            azimuth_delta_range: [15.0, 60.0],
            hfov_deg: 50.0,
        }
    }
}

/// Which removed objects a sample must contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalMode {
    /// Removed objects are visible in both views.
    #[default]
    CoVisible,
    /// Removed objects are visible in view 1 and project entirely outside
    /// view 2's frame.
    OutsideView2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// `(H, W)`.
    pub image_size: [usize; 2],
    pub object_count_range: [usize; 2],
    pub removal_count_range: [usize; 2],
    pub camera: CameraRig,
    pub texture_contrast: f64,
    pub box_size_range: [f64; 2],
    pub sphere_radius_range: [f64; 2],
    pub sphere_fraction: f64,
    /// Objects are placed inside `[-e, e]²`.
    pub footprint_half_extent: f64,
    pub min_separation: f64,
    pub visibility_threshold: f64,
    /// Smallest GT box side in pixels for removed objects.
    pub min_box_px: f64,
    pub removal_mode: RemovalMode,
    /// Flat boxes only; correspondences restricted to the ground plane.
    pub planar: bool,
    pub planar_height: f64,
    pub correspondence_count: usize,
    /// First seed used by batch generation.
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            image_size: [224, 224],
            object_count_range: [3, 6],
            removal_count_range: [1, 1],
            camera: CameraRig::default(),
            texture_contrast: 0.35,
            box_size_range: [0.15, 0.4],
            sphere_radius_range: [0.1, 0.2],
            sphere_fraction: 0.3,
            footprint_half_extent: 1.0,
            min_separation: 0.05,
            visibility_threshold: 0.25,
            min_box_px: 0.0,
            removal_mode: RemovalMode::CoVisible,
            planar: false,
            planar_height: 1e-4,
            correspondence_count: 256,
            seed: 0,
        }
    }
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, r: [T; 2]) -> Result<()> {
    if r[0] > r[1] {
        return Err(Error::domain(format!("{name} range {r:?} is empty")));
    }
    Ok(())
}

impl GeneratorConfig {
    /// Closer cameras, larger objects and removed objects at least 24 px
    /// on a side: the benchmark setting for detection quality.
    pub fn easy_suite() -> Self {
        Self {
            object_count_range: [3, 5],
            box_size_range: [0.25, 0.45],
            sphere_radius_range: [0.13, 0.22],
            camera: CameraRig {
                radius_range: [2.2, 3.0],
                height_range: [1.5, 2.3],
                azimuth_delta_range: [15.0, 45.0],
                ..CameraRig::default()
            },
            min_box_px: 24.0,
            ..Self::default()
        }
    }

    /// [`Self::easy_suite`] with flat objects, so a single plane
    /// homography relates the views.
    pub fn planar_suite() -> Self {
        Self {
            planar: true,
            ..Self::easy_suite()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [h, w] = self.image_size;
        if h < 8 || w < 8 {
            return Err(Error::domain("image_size must be at least 8x8"));
        }
        check_range("object_count", self.object_count_range)?;
        check_range("removal_count", self.removal_count_range)?;
        check_range("camera radius", self.camera.radius_range)?;
        check_range("camera height", self.camera.height_range)?;
        check_range("azimuth delta", self.camera.azimuth_delta_range)?;
        check_range("box size", self.box_size_range)?;
        check_range("sphere radius", self.sphere_radius_range)?;
        if self.removal_count_range[0] < 1 {
            return Err(Error::domain("at least one object must be removed"));
        }
        if self.removal_count_range[1] > self.object_count_range[0] {
            return Err(Error::domain(
                "removal count must not exceed the smallest object count",
            ));
        }
        if self.camera.height_range[0] <= 0.0 || self.camera.radius_range[0] <= 0.0 {
            return Err(Error::domain(
                "cameras must sit above the plane, off-center",
            ));
        }
        if !(self.camera.hfov_deg > 0.0 && self.camera.hfov_deg < 170.0) {
            return Err(Error::domain("hfov_deg must lie in (0, 170)"));
        }
        if self.box_size_range[0] <= 0.0 || self.sphere_radius_range[0] <= 0.0 {
            return Err(Error::domain("object sizes must be positive"));
        }
        if !(0.0..=1.0).contains(&self.sphere_fraction)
            || !(0.0..1.0).contains(&self.texture_contrast)
            || !(0.0..1.0).contains(&self.visibility_threshold)
        {
            return Err(Error::domain("fractions must lie in [0, 1)"));
        }
        if self.planar && self.planar_height <= 0.0 {
            return Err(Error::domain("planar_height must be positive"));
        }
        if self.correspondence_count < MIN_CORRESPONDENCES {
            return Err(Error::domain(format!(
                "correspondence_count must be at least {MIN_CORRESPONDENCES}"
            )));
        }
        Ok(())
    }

    pub fn size(&self) -> (usize, usize) {
        (self.image_size[0], self.image_size[1])
    }

    fn camera_intrinsics(&self) -> (f64, f64, f64, f64) {
        let (h, w) = self.size();
        let f = w as f64 / (2.0 * (self.camera.hfov_deg.to_radians() / 2.0).tan());
        (f, f, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

fn saturated_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let hue = rng.random_range(0.0..6.0f64);
    let s = rng.random_range(0.75..1.0);
    let v = rng.random_range(0.75..1.0);
    let c = v * s;
    let x = c * (1.0 - ((hue % 2.0) - 1.0).abs());
    let (r, g, b) = match hue as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

/// Samples a scene; placement is rejection-sampled until every pair of
/// objects keeps the configured horizontal gap.
pub fn generate_scene(cfg: &GeneratorConfig, seed: u64) -> Result<SceneSpec> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.random_range(cfg.object_count_range[0]..=cfg.object_count_range[1]);
    let gray = rng.random_range(0.4..0.6);
    let tint = [0; 3].map(|_| gray + rng.random_range(-0.05..0.05));
    let plane = PlaneSpec {
        base_color: tint,
        contrast: cfg.texture_contrast,
        texture_seed: rng.random(),
    };
    let light_az = rng.random_range(0.0..std::f64::consts::TAU);
    let light = Vector3::new(0.6 * light_az.cos(), 0.6 * light_az.sin(), 1.0).normalize();

    let mut objects: Vec<ObjectSpec> = Vec::with_capacity(count);
    let mut attempts = 0;
    while objects.len() < count {
        attempts += 1;
        if attempts > PLACEMENT_ATTEMPTS {
            return Err(Error::GenerationFailure(format!(
                "placed {} of {count} objects after {PLACEMENT_ATTEMPTS} attempts",
                objects.len()
            )));
        }
        let shape = if !cfg.planar && rng.random_bool(cfg.sphere_fraction) {
            Shape::Sphere {
                radius: uniform(&mut rng, cfg.sphere_radius_range),
            }
        } else {
            let sx = uniform(&mut rng, cfg.box_size_range);
            let sy = uniform(&mut rng, cfg.box_size_range);
            let sz = if cfg.planar {
                cfg.planar_height
            } else {
                uniform(&mut rng, cfg.box_size_range)
            };
            Shape::Box { size: [sx, sy, sz] }
        };
        let z = match shape {
            Shape::Box { size } => size[2] / 2.0,
            Shape::Sphere { radius } => radius,
        };
        let e = cfg.footprint_half_extent;
        let candidate = ObjectSpec {
            shape,
            center: [rng.random_range(-e..e), rng.random_range(-e..e), z],
            albedo: saturated_color(&mut rng),
            texture_seed: rng.random(),
        };
        let fits = objects.iter().all(|o| {
            let d = (o.center[0] - candidate.center[0]).hypot(o.center[1] - candidate.center[1]);
            d - o.footprint_radius() - candidate.footprint_radius() >= cfg.min_separation
        });
        if fits {
            objects.push(candidate);
        }
    }
    Ok(SceneSpec {
        plane,
        objects,
        light_dir: [light.x, light.y, light.z],
    })
}

/// Renders every object of `scene`. RGB is quantized to 8 bits per channel.
pub fn render_view(
    scene: &SceneSpec,
    cam: &CameraModel,
    size: (usize, usize),
) -> (RgbImage, DepthMap) {
    render_present(scene, &vec![true; scene.objects.len()], cam, size)
}

/// Ground-truth box of one removed object in one view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub bbox: BBox,
    pub visibility: f64,
    pub object: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangePairSample {
    pub seed: u64,
    pub rgb1: RgbImage,
    pub rgb2: RgbImage,
    pub depth1: DepthMap,
    pub depth2: DepthMap,
    pub cam1: CameraModel,
    pub cam2: CameraModel,
    pub removed: Vec<usize>,
    pub gt_boxes_1: Vec<GtBox>,
    pub gt_boxes_2: Vec<GtBox>,
    /// Removed objects that are not co-visible, where they are seen at all.
    pub excluded_boxes_1: Vec<GtBox>,
    pub excluded_boxes_2: Vec<GtBox>,
    pub gt_correspondences: CorrespondenceSet,
    pub scene: SceneSpec,
}

impl ChangePairSample {
    pub fn size(&self) -> (usize, usize) {
        (self.rgb1.height(), self.rgb1.width())
    }

    /// Homography of the ground plane from view 1 to view 2.
    pub fn ground_plane_homography(&self) -> Homography2D {
        let (h, w) = self.size();
        relative_pose_transform(&self.cam1, &self.cam2, w, h)
            .expect("sample cameras are valid")
            .ground_plane_homography()
    }
}

/// Camera on the rig cylinder at `azimuth`. With `avoid`, the camera is
/// turned sideways so that this world point falls well outside the view.
fn sample_camera(
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
    azimuth: f64,
    avoid: Option<[f64; 3]>,
) -> Result<CameraModel> {
    let r = uniform(rng, cfg.camera.radius_range);
    let height = uniform(rng, cfg.camera.height_range);
    let j = cfg.camera.look_at_jitter;
    let mut jitter = || {
        if j > 0.0 {
            rng.random_range(-j..j)
        } else {
            0.0
        }
    };
    let mut target = Vector3::new(jitter(), jitter(), 0.0);
    let eye = Vector3::new(r * azimuth.cos(), r * azimuth.sin(), height);
    if let Some(p) = avoid {
        let half = cfg.camera.hfov_deg.to_radians() / 2.0;
        let turn = rng.random_range(1.4 * half..2.2 * half)
            * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let (dx, dy) = (p[0] - eye.x, p[1] - eye.y);
        let (s, c) = turn.sin_cos();
        target = Vector3::new(eye.x + c * dx - s * dy, eye.y + s * dx + c * dy, 0.0);
    }
    let (fx, fy, cx, cy) = cfg.camera_intrinsics();
    CameraModel::look_at(eye, target, Vector3::z(), fx, fy, cx, cy)
}

struct ObjectView {
    visibility: f64,
    extent: Option<BBox>,
}

impl ObjectView {
    fn clipped(&self, size: (usize, usize)) -> Option<BBox> {
        let b = self.extent?.clipped(size.1, size.0);
        b.is_valid().then_some(b)
    }

    fn outside_frame(&self, size: (usize, usize)) -> bool {
        let (h, w) = size;
        match self.extent {
            Some(b) => {
                b.x_max <= 0.0 || b.y_max <= 0.0 || b.x_min >= w as f64 || b.y_min >= h as f64
            }
            None => false,
        }
    }
}

/// Builds a scene, draws camera pairs until enough removal candidates are
/// found, renders view 1 before and view 2 after the removal, and samples
/// exact static-surface correspondences.
pub fn make_change_pair(cfg: &GeneratorConfig, seed: u64) -> Result<ChangePairSample> {
    let scene = generate_scene(cfg, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let size = cfg.size();
    let n = scene.objects.len();
    let all = vec![true; n];
    let thr = cfg.visibility_threshold;
    let big_enough = |b: Option<BBox>| {
        b.is_some_and(|b| b.width() >= cfg.min_box_px && b.height() >= cfg.min_box_px)
    };

    for _ in 0..CAMERA_ATTEMPTS {
        let k = rng.random_range(cfg.removal_count_range[0]..=cfg.removal_count_range[1]);
        let az1 = rng.random_range(0.0..std::f64::consts::TAU);
        let delta = uniform(&mut rng, cfg.camera.azimuth_delta_range).to_radians();
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let avoid = match cfg.removal_mode {
            RemovalMode::CoVisible => None,
            RemovalMode::OutsideView2 => Some(scene.objects[rng.random_range(0..n)].center),
        };
        let cam1 = sample_camera(cfg, &mut rng, az1, None)?;
        let cam2 = sample_camera(cfg, &mut rng, az1 + sign * delta, avoid)?;

        let views: Vec<[ObjectView; 2]> = (0..n)
            .map(|i| {
                [&cam1, &cam2].map(|cam| ObjectView {
                    visibility: visibility_fraction(&scene, &all, i, cam, size),
                    extent: projected_extent(&scene.objects[i].shape, scene.objects[i].center, cam),
                })
            })
            .collect();
        let candidates: Vec<usize> = (0..n)
            .filter(|&i| {
                let [v1, v2] = &views[i];
                match cfg.removal_mode {
                    RemovalMode::CoVisible => {
                        v1.visibility > thr
                            && v2.visibility > thr
                            && big_enough(v1.clipped(size))
                            && big_enough(v2.clipped(size))
                    }
                    RemovalMode::OutsideView2 => {
                        v1.visibility > thr
                            && big_enough(v1.clipped(size))
                            && v2.outside_frame(size)
                    }
                }
            })
            .collect();
        if candidates.len() < k {
            continue;
        }
        let mut removed: Vec<usize> = sample_indices(&mut rng, candidates.len(), k)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        removed.sort_unstable();

        let mut present = all.clone();
        for &i in &removed {
            present[i] = false;
        }
        let (rgb1, depth1) = render_present(&scene, &all, &cam1, size);
        let (rgb2, depth2) = render_present(&scene, &present, &cam2, size);
        let Some(corr) =
            sample_correspondences(cfg, &scene, &present, &cam1, &cam2, &depth2, &mut rng)
        else {
            continue;
        };

        let (mut gt1, mut gt2, mut ex1, mut ex2) = (vec![], vec![], vec![], vec![]);
        for &i in &removed {
            let [v1, v2] = &views[i];
            let covisible = v1.visibility > thr && v2.visibility > thr;
            for (view, gt, ex) in [(v1, &mut gt1, &mut ex1), (v2, &mut gt2, &mut ex2)] {
                let Some(bbox) = view.clipped(size) else {
                    continue;
                };
                let b = GtBox {
                    bbox,
                    visibility: view.visibility,
                    object: i,
                };
                if covisible {
                    gt.push(b);
                } else if view.visibility > 0.0 {
                    ex.push(b);
                }
            }
        }
        return Ok(ChangePairSample {
            seed,
            rgb1,
            rgb2,
            depth1,
            depth2,
            cam1,
            cam2,
            removed,
            gt_boxes_1: gt1,
            gt_boxes_2: gt2,
            excluded_boxes_1: ex1,
            excluded_boxes_2: ex2,
            gt_correspondences: corr,
            scene,
        });
    }
    Err(Error::GenerationFailure(format!(
        "no usable camera pair for seed {seed} after {CAMERA_ATTEMPTS} attempts"
    )))
}

/// Static-surface points seen at view-1 pixel centers and from view 2.
fn sample_correspondences(
    cfg: &GeneratorConfig,
    scene: &SceneSpec,
    present: &[bool],
    cam1: &CameraModel,
    cam2: &CameraModel,
    depth2: &DepthMap,
    rng: &mut ChaCha8Rng,
) -> Option<CorrespondenceSet> {
    let (h, w) = cfg.size();
    let all = vec![true; scene.objects.len()];
    let (o1, o2) = (cam1.center(), cam2.center());
    let mut used = HashSet::new();
    let mut pairs = Vec::with_capacity(cfg.correspondence_count);
    for _ in 0..cfg.correspondence_count * 60 {
        if pairs.len() == cfg.correspondence_count {
            break;
        }
        let (u, v) = (rng.random_range(0..w), rng.random_range(0..h));
        if !used.insert((u, v)) {
            continue;
        }
        let d1 = pixel_ray_world(cam1, u as f64, v as f64);
        let Some(hit) = cast(scene, &all, &o1, &d1) else {
            continue;
        };
        let static_surface = match hit.surface {
            Surface::Plane => true,
            Surface::Object(i) => present[i] && !cfg.planar,
        };
        if !static_surface {
            continue;
        }
        let x = o1 + d1 * hit.t;
        let Some((u2, v2, z2)) = cam2.project(&x) else {
            continue;
        };
        if !(u2 >= 1.0 && u2 <= w as f64 - 2.0 && v2 >= 1.0 && v2 <= h as f64 - 2.0) {
            continue;
        }
        let Some(hit2) = cast(scene, present, &o2, &pixel_ray_world(cam2, u2, v2)) else {
            continue;
        };
        if hit2.surface != hit.surface || (hit2.t - z2).abs() > 1e-6 * z2 {
            continue;
        }
        let q = NormalizedPoint2D::from_pixel(u2, v2, w, h);
        if depth2.sample_bilinear(q).is_none() {
            continue;
        }
        pairs.push((NormalizedPoint2D::from_pixel(u as f64, v as f64, w, h), q));
    }
    if pairs.len() < MIN_CORRESPONDENCES {
        return None;
    }
    CorrespondenceSet::new(pairs).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorConfig {
        GeneratorConfig {
            image_size: [64, 64],
            camera: CameraRig {
                radius_range: [2.2, 2.8],
                height_range: [1.5, 2.2],
                ..Default::default()
            },
            correspondence_count: 64,
            ..Default::default()
        }
    }

    #[test]
    fn scenes_are_deterministic() {
        let cfg = GeneratorConfig::default();
        assert_eq!(
            generate_scene(&cfg, 7).unwrap(),
            generate_scene(&cfg, 7).unwrap()
        );
        assert_ne!(
            generate_scene(&cfg, 7).unwrap(),
            generate_scene(&cfg, 8).unwrap()
        );
    }

    #[test]
    fn fixed_object_count() {
        let cfg = GeneratorConfig {
            object_count_range: [3, 3],
            ..Default::default()
        };
        for seed in 0..10 {
            assert_eq!(generate_scene(&cfg, seed).unwrap().objects.len(), 3);
        }
    }

    #[test]
    fn objects_rest_on_plane_and_keep_apart() {
        let cfg = GeneratorConfig::default();
        for seed in 0..100 {
            let scene = generate_scene(&cfg, seed).unwrap();
            for (i, a) in scene.objects.iter().enumerate() {
                assert!(a.lowest_z().abs() < 1e-9);
                for b in &scene.objects[i + 1..] {
                    // exact gap between footprints: rectangles and discs
                    let gap = footprint_gap(a, b);
                    assert!(gap >= 0.05 - 1e-12, "seed {seed}: gap {gap}");
                }
            }
        }
    }

    fn footprint_gap(a: &ObjectSpec, b: &ObjectSpec) -> f64 {
        let half = |o: &ObjectSpec| match o.shape {
            Shape::Box { size } => (size[0] / 2.0, size[1] / 2.0, false),
            Shape::Sphere { radius } => (radius, radius, true),
        };
        let (ax, ay, ar) = half(a);
        let (bx, by, br) = half(b);
        let dx = (a.center[0] - b.center[0]).abs();
        let dy = (a.center[1] - b.center[1]).abs();
        if ar && br {
            return dx.hypot(dy) - ax - bx;
        }
        // rectangle against rectangle, or rectangle against disc
        let (rx, ry, r) = match (ar, br) {
            (false, false) => (ax + bx, ay + by, 0.0),
            (true, false) => (bx, by, ax),
            _ => (ax, ay, bx),
        };
        (dx - rx).max(0.0).hypot((dy - ry).max(0.0)) - r
    }

    #[test]
    fn looking_down_on_empty_scene_sees_constant_depth() {
        let scene = SceneSpec {
            plane: PlaneSpec {
                base_color: [0.5; 3],
                contrast: 0.3,
                texture_seed: 1,
            },
            objects: vec![],
            light_dir: [0.0, 0.0, 1.0],
        };
        let cam = CameraModel::look_at(
            Vector3::new(0.0, 0.0, 1.7),
            Vector3::zeros(),
            Vector3::y(),
            30.0,
            30.0,
            15.5,
            15.5,
        )
        .unwrap();
        let (_, depth) = render_view(&scene, &cam, (32, 32));
        for v in depth.values() {
            assert!((v - 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn box_pixels_are_nearer_than_the_plane_behind() {
        let mut scene = generate_scene(&small(), 3).unwrap();
        scene.objects.truncate(1);
        scene.objects[0].center = [0.0, 0.0, 0.15];
        scene.objects[0].shape = Shape::Box {
            size: [0.3, 0.3, 0.3],
        };
        let cam = CameraModel::look_at(
            Vector3::new(2.0, 0.5, 1.5),
            Vector3::zeros(),
            Vector3::z(),
            60.0,
            60.0,
            31.5,
            31.5,
        )
        .unwrap();
        let (_, depth) = render_view(&scene, &cam, (64, 64));
        let origin = cam.center();
        let mut on_box = 0;
        for v in 0..64 {
            for u in 0..64 {
                let d = pixel_ray_world(&cam, u as f64, v as f64);
                let hit = cast(&scene, &[true], &origin, &d).unwrap();
                if hit.surface == Surface::Object(0) {
                    on_box += 1;
                    let plane_t = -origin.z / d.z;
                    assert!(depth.get(u, v).unwrap() < plane_t);
                }
                assert!(depth.get(u, v).unwrap() > 0.0);
            }
        }
        assert!(on_box > 20);
    }

    #[test]
    fn change_pairs_are_deterministic_and_consistent() {
        let cfg = small();
        let a = make_change_pair(&cfg, 11).unwrap();
        let b = make_change_pair(&cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.removed.len(), 1);
        assert_eq!(a.gt_boxes_1.len(), 1);
        assert_eq!(a.gt_boxes_2.len(), 1);
        assert!(a.gt_boxes_1[0].visibility > 0.25 && a.gt_boxes_2[0].visibility > 0.25);
        assert!(a.gt_correspondences.len() >= 64);
    }

    #[test]
    fn sphere_extent_touches_the_silhouette() {
        let cam = CameraModel::look_at(
            Vector3::new(2.5, -0.4, 1.2),
            Vector3::zeros(),
            Vector3::z(),
            80.0,
            80.0,
            39.5,
            39.5,
        )
        .unwrap();
        let center = [0.1, 0.2, 0.15];
        let radius = 0.15;
        let b = projected_extent(&Shape::Sphere { radius }, center, &cam).unwrap();
        // rim points project inside the box and reach each side
        let c = Vector3::from(center);
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let eye = cam.center();
        let axis = (c - eye).normalize();
        let e1 = axis.cross(&Vector3::z()).normalize();
        let e2 = axis.cross(&e1);
        let dist = (c - eye).norm();
        let rim_r = radius * (1.0 - (radius / dist).powi(2)).sqrt();
        let rim_c = c - axis * (radius * radius / dist);
        for i in 0..20000 {
            let a = i as f64 / 20000.0 * std::f64::consts::TAU;
            let p = rim_c + (e1 * a.cos() + e2 * a.sin()) * rim_r;
            let (u, v, _) = cam.project(&p).unwrap();
            assert!(u + 0.5 >= b.x_min - 1e-9 && u + 0.5 <= b.x_max + 1e-9);
            assert!(v + 0.5 >= b.y_min - 1e-9 && v + 0.5 <= b.y_max + 1e-9);
            x0 = x0.min(u + 0.5);
            x1 = x1.max(u + 0.5);
        }
        assert!((x0 - b.x_min).abs() < 1e-3 && (x1 - b.x_max).abs() < 1e-3);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cfg = GeneratorConfig {
            removal_count_range: [0, 1],
            ..Default::default()
        };
        assert!(generate_scene(&cfg, 0).is_err());
        let cfg = GeneratorConfig {
            object_count_range: [5, 3],
            ..Default::default()
        };
        assert!(generate_scene(&cfg, 0).is_err());
    }
}
