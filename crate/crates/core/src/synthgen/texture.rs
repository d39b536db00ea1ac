//! Seeded value noise used for plane and object textures.

fn hash(seed: u64, coords: &[i64]) -> f64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &c in coords {
        h ^= (c as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = splitmix(h);
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Lattice value noise in `[0, 1)` with unit cell size.
pub(crate) fn value_noise_2d(seed: u64, x: f64, y: f64) -> f64 {
    let (ix, iy) = (x.floor(), y.floor());
    let (fx, fy) = (smooth(x - ix), smooth(y - iy));
    let (ix, iy) = (ix as i64, iy as i64);
    let v = |dx: i64, dy: i64| hash(seed, &[ix + dx, iy + dy]);
    let top = v(0, 0) * (1.0 - fx) + v(1, 0) * fx;
    let bot = v(0, 1) * (1.0 - fx) + v(1, 1) * fx;
    top * (1.0 - fy) + bot * fy
}

pub(crate) fn value_noise_3d(seed: u64, p: [f64; 3]) -> f64 {
    let i = p.map(f64::floor);
    let f = [
        smooth(p[0] - i[0]),
        smooth(p[1] - i[1]),
        smooth(p[2] - i[2]),
    ];
    let i = i.map(|v| v as i64);
    let mut acc = 0.0;
    for corner in 0..8 {
        let d = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
        let mut w = 1.0;
        for k in 0..3 {
            w *= if d[k] == 1 { f[k] } else { 1.0 - f[k] };
        }
        acc += w * hash(
            seed,
            &[i[0] + d[0] as i64, i[1] + d[1] as i64, i[2] + d[2] as i64],
        );
    }
    acc
}

/// Two-octave plane noise; cells of 0.25 m and 0.08 m.
pub(crate) fn plane_noise(seed: u64, x: f64, y: f64) -> f64 {
    0.6 * value_noise_2d(seed, x / 0.25, y / 0.25)
        + 0.4 * value_noise_2d(seed.wrapping_add(1), x / 0.08, y / 0.08)
}
