use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Homography2D, NormalizedPoint2D, Transform3D};

/// Pinhole camera with a world-to-camera pose `X_c = R·X_w + t`.
///
/// Camera axes: x right, y down, z forward. Pixel centers sit at integer
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraJson", into = "CameraJson")]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// On-disk form: `{"fx","fy","cx","cy","R" (9, row-major),"t" (3)}`.
#[derive(Serialize, Deserialize)]
struct CameraJson {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    #[serde(rename = "R")]
    r: Vec<f64>,
    t: Vec<f64>,
}

impl TryFrom<CameraJson> for CameraModel {
    type Error = Error;
    fn try_from(j: CameraJson) -> Result<Self> {
        if j.r.len() != 9 || j.t.len() != 3 {
            return Err(Error::format(
                "camera JSON",
                "R needs 9 values and t needs 3",
            ));
        }
        let cam = CameraModel {
            fx: j.fx,
            fy: j.fy,
            cx: j.cx,
            cy: j.cy,
            rotation: Matrix3::from_row_slice(&j.r),
            translation: Vector3::from_column_slice(&j.t),
        };
        cam.validate()?;
        Ok(cam)
    }
}

impl From<CameraModel> for CameraJson {
    fn from(c: CameraModel) -> Self {
        let mut r = Vec::with_capacity(9);
        for i in 0..3 {
            for j in 0..3 {
                r.push(c.rotation[(i, j)]);
            }
        }
        CameraJson {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            r,
            t: c.translation.iter().copied().collect(),
        }
    }
}

impl CameraModel {
    /// Camera at `eye` looking at `target`, with world `up` pointing to the
    /// top of the image.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::domain("eye and target coincide"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::domain("view direction parallel to up"))?;
        let down = forward.cross(&right);
        let rotation =
            Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation: -(rotation * eye),
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::domain("focal lengths must be positive"));
        }
        let all_finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .chain(self.rotation.iter())
            .chain(self.translation.iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::domain("camera has non-finite parameters"));
        }
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity())
            .abs()
            .max();
        if err > 1e-6 || self.rotation.determinant() < 0.0 {
            return Err(Error::domain(format!(
                "rotation is not orthonormal (deviation {err:e})"
            )));
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn world_to_camera(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    pub fn camera_to_world(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (x - self.translation)
    }

    /// Camera-frame ray through pixel `(u, v)`, scaled to unit depth.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Pixel coordinates and depth of a world point; `None` behind the camera.
    pub fn project(&self, x: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let c = self.world_to_camera(x);
        (c.z > 0.0).then(|| {
            (
                self.fx * c.x / c.z + self.cx,
                self.fy * c.y / c.z + self.cy,
                c.z,
            )
        })
    }

    /// World point seen at pixel `(u, v)` with depth `d`.
    pub fn back_project_pixel(&self, u: f64, v: f64, d: f64) -> Vector3<f64> {
        self.camera_to_world(&(self.pixel_ray(u, v) * d))
    }

    /// Maps depth-scaled normalized coordinates `(d·x, d·y, d)` of a
    /// `width × height` image to camera-frame coordinates.
    fn normalized_to_camera(&self, width: usize, height: usize) -> Matrix3<f64> {
        let (w, h) = (width as f64, height as f64);
        Matrix3::new(
            w / (2.0 * self.fx),
            0.0,
            (w - 1.0 - 2.0 * self.cx) / (2.0 * self.fx),
            0.0,
            h / (2.0 * self.fy),
            (h - 1.0 - 2.0 * self.cy) / (2.0 * self.fy),
            0.0,
            0.0,
            1.0,
        )
    }
}

/// Exact two-view warp from known poses: back-project with depth, move to
/// the other camera, project.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseWarp {
    pub cam_r: CameraModel,
    pub cam_q: CameraModel,
    pub width: usize,
    pub height: usize,
}

pub fn relative_pose_transform(
    cam_r: &CameraModel,
    cam_q: &CameraModel,
    width: usize,
    height: usize,
) -> Result<PoseWarp> {
    cam_r.validate()?;
    cam_q.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::domain("image dimensions must be positive"));
    }
    Ok(PoseWarp {
        cam_r: *cam_r,
        cam_q: *cam_q,
        width,
        height,
    })
}

impl PoseWarp {
    /// Pixel and depth in q of pixel `(u, v)` seen at depth `d` in r;
    /// `None` when the point falls behind camera q.
    pub fn warp_pixel(&self, u: f64, v: f64, d: f64) -> Option<(f64, f64, f64)> {
        let x = self.cam_r.back_project_pixel(u, v, d);
        self.cam_q.project(&x)
    }

    pub fn warp_normalized(
        &self,
        p: NormalizedPoint2D,
        d: f64,
    ) -> Option<(NormalizedPoint2D, f64)> {
        let (u, v) = p.to_pixel(self.width, self.height);
        let (uq, vq, dq) = self.warp_pixel(u, v, d)?;
        Some((
            NormalizedPoint2D::from_pixel(uq, vq, self.width, self.height),
            dq,
        ))
    }

    pub fn inverse(&self) -> Self {
        Self {
            cam_r: self.cam_q,
            cam_q: self.cam_r,
            ..*self
        }
    }

    /// The same warp as a 4×4 map on `(d·x, d·y, d, 1)`; its last row is
    /// `(0, 0, 0, 1)`.
    pub fn to_transform3d(&self) -> Transform3D {
        let m_r = self.cam_r.normalized_to_camera(self.width, self.height);
        let m_q_inv = self
            .cam_q
            .normalized_to_camera(self.width, self.height)
            .try_inverse()
            .expect("upper triangular with positive diagonal");
        let r_rel = self.cam_q.rotation * self.cam_r.rotation.transpose();
        let t_rel = self.cam_q.translation - r_rel * self.cam_r.translation;
        let a = m_q_inv * r_rel * m_r;
        let b = m_q_inv * t_rel;
        let mut t = Matrix4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(&a);
        t.fixed_view_mut::<3, 1>(0, 3).copy_from(&b);
        Transform3D(t)
    }

    /// Homography induced by the world plane `z = 0`, in normalized
    /// coordinates.
    pub fn ground_plane_homography(&self) -> Homography2D {
        let plane = |c: &CameraModel| {
            let mut m = Matrix3::zeros();
            m.set_column(0, &c.rotation.column(0));
            m.set_column(1, &c.rotation.column(1));
            m.set_column(2, &c.translation);
            c.intrinsics() * m
        };
        let (w, h) = (self.width as f64, self.height as f64);
        let to_norm = Matrix3::new(
            2.0 / w,
            0.0,
            (1.0 - w) / w,
            0.0,
            2.0 / h,
            (1.0 - h) / h,
            0.0,
            0.0,
            1.0,
        );
        let from_norm = to_norm.try_inverse().expect("diagonal scale");
        let h_pix = plane(&self.cam_q)
            * plane(&self.cam_r)
                .try_inverse()
                .unwrap_or_else(Matrix3::identity);
        Homography2D::normalized(to_norm * h_pix * from_norm)
    }
}
