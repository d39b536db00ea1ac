use nalgebra::{DMatrix, Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::HomogeneousPoint3D;

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

/// Smallest `|k|` accepted when dehomogenizing a transformed point.
pub const MIN_HOMOGENEOUS_SCALE: f64 = 1e-12;

/// 4×4 map acting on depth-scaled homogeneous points `(d·x, d·y, d, 1)`.
///
/// Serialized as 16 numbers in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Transform3D(pub Matrix4<f64>);

impl Transform3D {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_row_major(m: &[f64]) -> Result<Self> {
        if m.len() != 16 {
            return Err(Error::domain(format!(
                "4x4 transform needs 16 values, got {}",
                m.len()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("transform has non-finite entries"));
        }
        Ok(Self(Matrix4::from_row_slice(m)))
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let mut out = [0.0; 16];
        for r in 0..4 {
            for c in 0..4 {
                out[r * 4 + c] = self.0[(r, c)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Option<Self> {
        self.0.try_inverse().map(Self)
    }

    pub fn last_row(&self) -> [f64; 4] {
        [
            self.0[(3, 0)],
            self.0[(3, 1)],
            self.0[(3, 2)],
            self.0[(3, 3)],
        ]
    }

    /// Ratio of largest to smallest singular value.
    pub fn condition_number(&self) -> f64 {
        let sv = self.0.singular_values();
        let (lo, hi) = (sv.min(), sv.max());
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }
}

impl TryFrom<Vec<f64>> for Transform3D {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_row_major(&v)
    }
}

impl From<Transform3D> for Vec<f64> {
    fn from(t: Transform3D) -> Self {
        t.to_row_major().to_vec()
    }
}

/// Result of the closed-form fit, with the spectrum of the source matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqFit {
    pub transform: Transform3D,
    /// Singular values of the `n×4` source matrix, descending.
    pub singular_values: [f64; 4],
}

impl LsqFit {
    pub fn condition_number(&self) -> f64 {
        self.singular_values[0] / self.singular_values[3]
    }
}

/// Frobenius least-squares 4×4 map with `T·src_j ≈ dst_j`.
///
/// Computes `T = (P⁺ Q)ᵀ` where the rows of `P` and `Q` are the source and
/// destination points and `P⁺` is the SVD pseudoinverse.
pub fn estimate_transform_lsq(
    src: &[HomogeneousPoint3D],
    dst: &[HomogeneousPoint3D],
) -> Result<LsqFit> {
    if src.len() != dst.len() {
        return Err(Error::domain(format!(
            "source has {} points, destination {}",
            src.len(),
            dst.len()
        )));
    }
    let n = src.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let p = DMatrix::from_fn(n, 4, |i, j| src[i].0[j]);
    let q = DMatrix::from_fn(n, 4, |i, j| dst[i].0[j]);
    if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite point coordinates"));
    }

    let svd = p.svd(true, true);
    let mut singular_values = [0.0; 4];
    singular_values.copy_from_slice(svd.singular_values.as_slice());
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let cutoff = PINV_RTOL * singular_values[0];
    if !(singular_values[3] > cutoff) {
        return Err(Error::DegenerateConfiguration {
            singular_values: singular_values.to_vec(),
        });
    }

    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    // P⁺ Q = V Σ⁻¹ Uᵀ Q
    let mut ut_q = u.transpose() * &q;
    for (i, mut row) in ut_q.row_iter_mut().enumerate() {
        row /= svd.singular_values[i];
    }
    let pinv_q = v_t.transpose() * ut_q;
    let t = Matrix4::from_fn(|r, c| pinv_q[(c, r)]);
    Ok(LsqFit {
        transform: Transform3D(t),
        singular_values,
    })
}

/// `T·p` dehomogenized to `(x′/k, y′/k, z′/k)`; the last component is the
/// warped point's depth in the target view.
pub fn apply_transform(t: &Transform3D, p: &HomogeneousPoint3D) -> Result<[f64; 3]> {
    let out: Vector4<f64> = t.0 * p.0;
    let k = out[3];
    if !(k.abs() >= MIN_HOMOGENEOUS_SCALE) {
        return Err(Error::PointAtInfinity(k));
    }
    Ok([out[0] / k, out[1] / k, out[2] / k])
}
