use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{CorrespondenceSet, NormalizedPoint2D};

/// Relative singular-value floor used to flag degenerate DLT systems.
const DLT_RANK_RTOL: f64 = 1e-8;

/// Planar projective map on normalized image coordinates.
///
/// Scaled so the bottom-right entry is 1 whenever it is non-zero; serialized
/// as 9 numbers in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Homography2D(pub Matrix3<f64>);

impl Homography2D {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Rescales so `h₃₃ = 1`, or to unit Frobenius norm when `h₃₃ ≈ 0`.
    pub fn normalized(m: Matrix3<f64>) -> Self {
        let h33 = m[(2, 2)];
        if h33.abs() > 1e-12 * m.norm() {
            Self(m / h33)
        } else {
            Self(m / m.norm())
        }
    }

    pub fn from_row_major(v: &[f64]) -> Result<Self> {
        if v.len() != 9 || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("homography needs 9 finite values"));
        }
        Ok(Self::normalized(Matrix3::from_row_slice(v)))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.0[(r, c)];
            }
        }
        out
    }

    pub fn inverse(&self) -> Option<Self> {
        self.0.try_inverse().map(Self::normalized)
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    pub fn apply(&self, p: NormalizedPoint2D) -> Option<NormalizedPoint2D> {
        let h = self.0 * Vector3::new(p.x, p.y, 1.0);
        (h[2].abs() > 1e-12).then(|| NormalizedPoint2D::new(h[0] / h[2], h[1] / h[2]))
    }
}

impl TryFrom<Vec<f64>> for Homography2D {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::from_row_major(&v)
    }
}

impl From<Homography2D> for Vec<f64> {
    fn from(h: Homography2D) -> Self {
        h.to_row_major().to_vec()
    }
}

/// Similarity that moves the centroid to the origin and the mean distance
/// to √2.
fn hartley_normalizer(points: &[NormalizedPoint2D]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(ax, ay), p| (ax + p.x / n, ay + p.y / n));
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - mx).powi(2) + (p.y - my).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn is_collinear(points: &[Vector3<f64>]) -> bool {
    let m = DMatrix::from_fn(points.len(), 3, |i, j| points[i][j]);
    let sv = m.singular_values();
    let max = sv.max();
    sv.iter().filter(|s| **s > DLT_RANK_RTOL * max).count() < 3
}

/// Normalized direct linear transform on the correspondences.
pub fn estimate_homography_dlt(corr: &CorrespondenceSet) -> Result<Homography2D> {
    let n = corr.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let src: Vec<_> = corr.pairs.iter().map(|p| p.0).collect();
    let dst: Vec<_> = corr.pairs.iter().map(|p| p.1).collect();
    let ns = hartley_normalizer(&src);
    let nd = hartley_normalizer(&dst);
    let hs: Vec<Vector3<f64>> = src
        .iter()
        .map(|p| ns * Vector3::new(p.x, p.y, 1.0))
        .collect();
    let hd: Vec<Vector3<f64>> = dst
        .iter()
        .map(|p| nd * Vector3::new(p.x, p.y, 1.0))
        .collect();
    if is_collinear(&hs) || is_collinear(&hd) {
        return Err(Error::DegenerateConfiguration {
            singular_values: Vec::new(),
        });
    }

    // Padded to at least 9 rows so the thin SVD exposes the full right basis.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in hs.iter().zip(&hd).enumerate() {
        let (x, y) = (s[0], s[1]);
        let (u, v) = (d[0], d[1]);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * i, j)] = r0[j];
            a[(2 * i + 1, j)] = r1[j];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    // A unique solution needs a one-dimensional null space.
    if !(sv[7] > DLT_RANK_RTOL * sv[0]) {
        return Err(Error::DegenerateConfiguration {
            singular_values: sv,
        });
    }
    let h = v_t.row(order[8]);
    let hn = Matrix3::from_row_slice(h.transpose().as_slice());
    let nd_inv = nd.try_inverse().expect("similarity is invertible");
    Ok(Homography2D::normalized(nd_inv * hn * ns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_corr(h: &Matrix3<f64>, n: usize, seed: u64) -> CorrespondenceSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::new();
        while pairs.len() < n {
            let p =
                NormalizedPoint2D::new(rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9));
            let q = Homography2D(*h).apply(p).unwrap();
            if q.is_in_frame() {
                pairs.push((p, q));
            }
        }
        CorrespondenceSet::new(pairs).unwrap()
    }

    #[test]
    fn identity_case() {
        let corr = random_corr(&Matrix3::identity(), 8, 1);
        let h = estimate_homography_dlt(&corr).unwrap();
        assert!((h.0 - Matrix3::identity()).abs().max() < 1e-10);
    }

    #[test]
    fn recovers_sampled_homography() {
        let h0 = Matrix3::new(1.05, 0.08, 0.02, -0.04, 0.95, -0.03, 0.06, -0.05, 1.0);
        let corr = random_corr(&h0, 10, 2);
        let h = estimate_homography_dlt(&corr).unwrap();
        assert!((h.0 - h0).abs().max() < 1e-8);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pairs = (0..5)
            .map(|i| {
                let t = -0.8 + 0.4 * i as f64;
                let p = NormalizedPoint2D::new(t, 0.3 * t + 0.1);
                (p, p)
            })
            .collect();
        let corr = CorrespondenceSet::new(pairs).unwrap();
        assert!(matches!(
            estimate_homography_dlt(&corr),
            Err(Error::DegenerateConfiguration { .. })
        ));
    }

    #[test]
    fn inverse_round_trip() {
        let h =
            Homography2D::normalized(Matrix3::new(1.1, 0.0, 0.1, 0.05, 0.9, 0.0, 0.02, 0.0, 1.0));
        let p = NormalizedPoint2D::new(0.3, -0.4);
        let back = h.inverse().unwrap().apply(h.apply(p).unwrap()).unwrap();
        assert!((back.x - p.x).abs() < 1e-12 && (back.y - p.y).abs() < 1e-12);
    }
}
