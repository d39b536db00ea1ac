//! Ray casting against the ground plane, boxes and spheres.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::detect::BBox;
use crate::geometry::{CameraModel, DepthMap};
use crate::image::RgbImage;

use super::texture::{plane_noise, value_noise_3d};
use super::{SceneSpec, Shape};

pub const FAR_DEPTH: f64 = 100.0;
pub(crate) const SKY: [f32; 3] = [0.72, 0.8, 0.92];
const AMBIENT: f64 = 0.2;
const T_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Surface {
    Plane,
    Object(usize),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Hit {
    pub t: f64,
    pub normal: Vector3<f64>,
    pub surface: Surface,
}

fn hit_plane(o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
    (d.z < 0.0 && o.z > 0.0).then(|| (-o.z / d.z, Vector3::z()))
}

fn hit_box(
    o: &Vector3<f64>,
    d: &Vector3<f64>,
    c: [f64; 3],
    size: [f64; 3],
) -> Option<(f64, Vector3<f64>)> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut axis = 0;
    for k in 0..3 {
        let (lo, hi) = (c[k] - size[k] / 2.0, c[k] + size[k] / 2.0);
        if d[k] == 0.0 {
            if o[k] < lo || o[k] > hi {
                return None;
            }
            continue;
        }
        let (mut a, mut b) = ((lo - o[k]) / d[k], (hi - o[k]) / d[k]);
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        if a > t0 {
            t0 = a;
            axis = k;
        }
        t1 = t1.min(b);
    }
    if t0 > t1 || t0 <= T_MIN {
        return None;
    }
    let mut n = Vector3::zeros();
    n[axis] = -d[axis].signum();
    Some((t0, n))
}

fn hit_sphere(
    o: &Vector3<f64>,
    d: &Vector3<f64>,
    c: [f64; 3],
    r: f64,
) -> Option<(f64, Vector3<f64>)> {
    let c = Vector3::from(c);
    let oc = o - c;
    let a = d.norm_squared();
    let b = oc.dot(d);
    let disc = b * b - a * (oc.norm_squared() - r * r);
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / a;
    (t > T_MIN).then(|| (t, (o + d * t - c) / r))
}

/// Nearest hit along `o + t·d` among the plane and the present objects.
pub(crate) fn cast(
    scene: &SceneSpec,
    present: &[bool],
    o: &Vector3<f64>,
    d: &Vector3<f64>,
) -> Option<Hit> {
    let mut best = hit_plane(o, d).map(|(t, normal)| Hit {
        t,
        normal,
        surface: Surface::Plane,
    });
    for (i, obj) in scene.objects.iter().enumerate() {
        if !present[i] {
            continue;
        }
        let hit = match obj.shape {
            Shape::Box { size } => hit_box(o, d, obj.center, size),
            Shape::Sphere { radius } => hit_sphere(o, d, obj.center, radius),
        };
        if let Some((t, normal)) = hit {
            if best.is_none_or(|b| t < b.t) {
                best = Some(Hit {
                    t,
                    normal,
                    surface: Surface::Object(i),
                });
            }
        }
    }
    best
}

/// World-frame ray through pixel `(u, v)`, scaled so that `t` equals the
/// camera-frame depth of the point reached.
pub(crate) fn pixel_ray_world(cam: &CameraModel, u: f64, v: f64) -> Vector3<f64> {
    cam.rotation.transpose() * cam.pixel_ray(u, v)
}

fn shade(scene: &SceneSpec, hit: &Hit, p: &Vector3<f64>) -> [f32; 3] {
    let light = Vector3::from(scene.light_dir);
    let lambert = AMBIENT + (1.0 - AMBIENT) * hit.normal.dot(&light).max(0.0);
    let color = match hit.surface {
        Surface::Plane => {
            let n = plane_noise(scene.plane.texture_seed, p.x, p.y);
            let m = 1.0 + scene.plane.contrast * (2.0 * n - 1.0);
            scene.plane.base_color.map(|c| c * m)
        }
        Surface::Object(i) => {
            let obj = &scene.objects[i];
            let n = value_noise_3d(obj.texture_seed, [p.x / 0.06, p.y / 0.06, p.z / 0.06]);
            let m = 1.0 + 0.3 * (2.0 * n - 1.0);
            obj.albedo.map(|c| c * m)
        }
    };
    color.map(|c| (c * lambert).clamp(0.0, 1.0) as f32)
}

pub(crate) fn render_present(
    scene: &SceneSpec,
    present: &[bool],
    cam: &CameraModel,
    size: (usize, usize),
) -> (RgbImage, DepthMap) {
    let (h, w) = size;
    let origin = cam.center();
    let rows: Vec<(Vec<f32>, Vec<f64>)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut rgb = Vec::with_capacity(3 * w);
            let mut depth = Vec::with_capacity(w);
            for u in 0..w {
                let d = pixel_ray_world(cam, u as f64, v as f64);
                match cast(scene, present, &origin, &d) {
                    Some(hit) => {
                        let p = origin + d * hit.t;
                        rgb.extend(shade(scene, &hit, &p));
                        depth.push(hit.t);
                    }
                    None => {
                        rgb.extend(SKY);
                        depth.push(FAR_DEPTH);
                    }
                }
            }
            (rgb, depth)
        })
        .collect();
    let (rgb, depth): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let image = RgbImage::new(w, h, rgb.concat()).expect("sized by construction");
    let depth = DepthMap::new(w, h, depth.concat()).expect("ray depths are positive");
    (image.quantized(), depth)
}

/// Surface samples with outward normals and area weights.
fn surface_samples(shape: &Shape, center: [f64; 3]) -> Vec<(Vector3<f64>, Vector3<f64>, f64)> {
    let c = Vector3::from(center);
    match *shape {
        Shape::Box { size } => {
            const N: usize = 10;
            let mut out = Vec::with_capacity(6 * N * N);
            for axis in 0..3 {
                let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                let cell = size[a] * size[b] / (N * N) as f64;
                for sign in [-1.0, 1.0] {
                    let mut n = Vector3::zeros();
                    n[axis] = sign;
                    for i in 0..N {
                        for j in 0..N {
                            let mut p = c;
                            p[axis] += sign * size[axis] / 2.0;
                            p[a] += ((i as f64 + 0.5) / N as f64 - 0.5) * size[a];
                            p[b] += ((j as f64 + 0.5) / N as f64 - 0.5) * size[b];
                            out.push((p, n, cell));
                        }
                    }
                }
            }
            out
        }
        Shape::Sphere { radius } => {
            const N: usize = 600;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..N)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / N as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    let n = Vector3::new(r * phi.cos(), r * phi.sin(), z);
                    (c + n * radius, n, 1.0)
                })
                .collect()
        }
    }
}

/// Area fraction of the camera-facing surface of object `idx` that is
/// unoccluded and inside the frame.
pub(crate) fn visibility_fraction(
    scene: &SceneSpec,
    present: &[bool],
    idx: usize,
    cam: &CameraModel,
    size: (usize, usize),
) -> f64 {
    let (h, w) = size;
    let obj = &scene.objects[idx];
    let origin = cam.center();
    let (mut facing, mut seen) = (0.0, 0.0);
    for (p, n, weight) in surface_samples(&obj.shape, obj.center) {
        if n.dot(&(origin - p)) <= 0.0 {
            continue;
        }
        facing += weight;
        let Some((u, v, z)) = cam.project(&p) else {
            continue;
        };
        if !(u >= -0.5 && u < w as f64 - 0.5 && v >= -0.5 && v < h as f64 - 0.5) {
            continue;
        }
        let d = (p - origin) / z;
        if let Some(hit) = cast(scene, present, &origin, &d) {
            if hit.surface == Surface::Object(idx) && (hit.t - z).abs() <= 1e-6 * z {
                seen += weight;
            }
        }
    }
    if facing > 0.0 {
        seen / facing
    } else {
        0.0
    }
}

/// Image-plane extent of an object in edge coordinates, before clipping.
/// `None` when any part of it lies behind the camera.
pub(crate) fn projected_extent(shape: &Shape, center: [f64; 3], cam: &CameraModel) -> Option<BBox> {
    match *shape {
        Shape::Box { size } => {
            let (mut x0, mut y0, mut x1, mut y1) = (
                f64::INFINITY,
                f64::INFINITY,
                f64::NEG_INFINITY,
                f64::NEG_INFINITY,
            );
            for corner in 0..8 {
                let p = Vector3::from_fn(|k, _| {
                    center[k] + if (corner >> k) & 1 == 1 { 0.5 } else { -0.5 } * size[k]
                });
                let (u, v, _) = cam.project(&p)?;
                x0 = x0.min(u);
                y0 = y0.min(v);
                x1 = x1.max(u);
                y1 = y1.max(v);
            }
            Some(BBox::new(x0 + 0.5, y0 + 0.5, x1 + 0.5, y1 + 0.5))
        }
        Shape::Sphere { radius } => {
            let c = cam.world_to_camera(&Vector3::from(center));
            let a = c.z * c.z - radius * radius;
            if c.z <= 0.0 || a <= 0.0 {
                return None;
            }
            let tangent = |m: f64| {
                let disc = (m * m + c.z * c.z - radius * radius).max(0.0).sqrt();
                ((m * c.z - radius * disc) / a, (m * c.z + radius * disc) / a)
            };
            let (sx0, sx1) = tangent(c.x);
            let (sy0, sy1) = tangent(c.y);
            Some(BBox::new(
                cam.fx * sx0 + cam.cx + 0.5,
                cam.fy * sy0 + cam.cy + 0.5,
                cam.fx * sx1 + cam.cx + 0.5,
                cam.fy * sy1 + cam.cy + 0.5,
            ))
        }
    }
}
