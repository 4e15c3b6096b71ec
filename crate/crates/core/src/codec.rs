//! Block transform, scalar quantization and sign-magnitude bitplanes.

use std::sync::OnceLock;

use crate::error::{invalid, Result};

const BASIS_BITS: u32 = 20;
const MID_BITS: u32 = 10;

pub const MAX_QP: u8 = 51;

struct Basis {
    n: usize,
    c: Vec<i64>,
}

fn basis(n: usize) -> &'static Basis {
    static CACHE: OnceLock<std::sync::Mutex<Vec<&'static Basis>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().unwrap();
    if let Some(b) = guard.iter().find(|b| b.n == n) {
        return b;
    }
    let scale = (1i64 << BASIS_BITS) as f64;
    let mut c = vec![0i64; n * n];
    for k in 0..n {
        let ck = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        for i in 0..n {
            let v = ck * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2 * n) as f64).cos();
            c[k * n + i] = (v * scale).round() as i64;
        }
    }
    let b: &'static Basis = Box::leak(Box::new(Basis { n, c }));
    guard.push(b);
    b
}

#[inline]
fn round_shift(v: i64, s: u32) -> i64 {
    (v + (1i64 << (s - 1))) >> s
}

fn block_dim(len: usize) -> usize {
    let n = (len as f64).sqrt().round() as usize;
    assert_eq!(n * n, len, "block must be square");
    n
}

/// 2D orthonormal DCT-II in fixed point.
pub fn forward_transform(block: &[i32]) -> Vec<i32> {
    let n = block_dim(block.len());
    let c = &basis(n).c;
    let mut tmp = vec![0i64; n * n];
    // columns: tmp[k][x] = sum_y C[k][y] p[y][x]
    for k in 0..n {
        for y in 0..n {
            let ck = c[k * n + y];
            let row = &block[y * n..(y + 1) * n];
            let t = &mut tmp[k * n..(k + 1) * n];
            for x in 0..n {
                t[x] += ck * row[x] as i64;
            }
        }
    }
    for v in tmp.iter_mut() {
        *v = round_shift(*v, BASIS_BITS - MID_BITS);
    }
    let mut out = vec![0i32; n * n];
    for k in 0..n {
        let t = &tmp[k * n..(k + 1) * n];
        for l in 0..n {
            let cl = &c[l * n..(l + 1) * n];
            let s: i64 = t.iter().zip(cl).map(|(&a, &b)| a * b).sum();
            out[k * n + l] = round_shift(s, BASIS_BITS + MID_BITS) as i32;
        }
    }
    out
}

/// Inverse of [`forward_transform`] (no clamping).
pub fn inverse_transform(coeffs: &[i32]) -> Vec<i32> {
    let n = block_dim(coeffs.len());
    let c = &basis(n).c;
    let mut tmp = vec![0i64; n * n];
    // rows first: tmp[k][x] = sum_l C[l][x] X[k][l]
    for k in 0..n {
        let row = &coeffs[k * n..(k + 1) * n];
        let t = &mut tmp[k * n..(k + 1) * n];
        for l in 0..n {
            let v = row[l] as i64;
            if v == 0 {
                continue;
            }
            let cl = &c[l * n..(l + 1) * n];
            for x in 0..n {
                t[x] += cl[x] * v;
            }
        }
    }
    for v in tmp.iter_mut() {
        *v = round_shift(*v, BASIS_BITS - MID_BITS);
    }
    let mut out = vec![0i64; n * n];
    // columns: p[y][x] = sum_k C[k][y] tmp[k][x]
    for k in 0..n {
        let t = &tmp[k * n..(k + 1) * n];
        for y in 0..n {
            let ck = c[k * n + y];
            let o = &mut out[y * n..(y + 1) * n];
            for x in 0..n {
                o[x] += ck * t[x];
            }
        }
    }
    out.into_iter().map(|v| round_shift(v, BASIS_BITS + MID_BITS) as i32).collect()
}

/// Quantizer step for `qp`: 2^((qp - 4) / 6).
pub fn step_size(qp: u8) -> f64 {
    2f64.powf((qp as f64 - 4.0) / 6.0)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantizedBlock {
    pub levels: Vec<i32>,
    pub qp: u8,
}

pub fn check_qp(qp: u8) -> Result<()> {
    if qp > MAX_QP {
        return Err(invalid(format!("qp {qp} outside 0..={MAX_QP}")));
    }
    Ok(())
}

/// Uniform quantizer, rounding half away from zero.
pub fn quantize(coeffs: &[i32], qp: u8) -> Result<QuantizedBlock> {
    check_qp(qp)?;
    let d = step_size(qp);
    let levels = coeffs
        .iter()
        .map(|&c| {
            let m = (c.unsigned_abs() as f64 / d + 0.5).floor() as i32;
            if c < 0 {
                -m
            } else {
                m
            }
        })
        .collect();
    Ok(QuantizedBlock { levels, qp })
}

/// `level * step`, rounded to integer transform coefficients.
pub fn dequantize(q: &QuantizedBlock) -> Vec<i32> {
    let d = step_size(q.qp);
    q.levels.iter().map(|&l| (l as f64 * d).round() as i32).collect()
}

/// Pixels from quantized levels, clamped to 8 bits.
pub fn reconstruct(q: &QuantizedBlock) -> Vec<u8> {
    inverse_transform(&dequantize(q)).into_iter().map(|v| v.clamp(0, 255) as u8).collect()
}

/// Transform and quantize 8-bit pixels.
pub fn encode_pixels(px: &[u8], qp: u8) -> Result<QuantizedBlock> {
    let x: Vec<i32> = px.iter().map(|&v| v as i32).collect();
    quantize(&forward_transform(&x), qp)
}

/// Plane count for the largest magnitude: one sign plane plus at least one
/// magnitude plane.
pub fn plane_count(max_abs_level: u32) -> usize {
    let bits = 32 - max_abs_level.leading_zeros() as usize;
    1 + bits.max(1)
}

/// Largest magnitude representable with `planes` planes.
pub fn max_magnitude(planes: usize) -> i32 {
    ((1u32 << (planes - 1)) - 1) as i32
}

/// Sign-magnitude split: magnitude planes MSB first, then the sign plane.
/// Magnitudes beyond the plane budget are clamped.
pub fn bitplane_split(levels: &[i32], planes: usize) -> Vec<Vec<u8>> {
    let mags = planes - 1;
    let cap = max_magnitude(planes);
    let mut out = vec![vec![0u8; levels.len()]; planes];
    for (i, &l) in levels.iter().enumerate() {
        let m = l.abs().min(cap) as u32;
        for p in 0..mags {
            let bit = mags - 1 - p;
            out[p][i] = ((m >> bit) & 1) as u8;
        }
        out[mags][i] = (l < 0 && m != 0) as u8;
    }
    out
}

/// Inverse of [`bitplane_split`].
pub fn bitplane_join(planes: &[Vec<u8>]) -> Vec<i32> {
    let mags = planes.len() - 1;
    let n = planes[0].len();
    (0..n)
        .map(|i| {
            let mut m = 0i32;
            for p in planes.iter().take(mags) {
                m = (m << 1) | p[i] as i32;
            }
            if planes[mags][i] == 1 {
                -m
            } else {
                m
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dct_oracle(x: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                let mut s = 0.0;
                for y in 0..n {
                    for xx in 0..n {
                        let ck = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                        let cl = if l == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                        s += ck
                            * cl
                            * x[y * n + xx]
                            * (std::f64::consts::PI * (2 * y + 1) as f64 * k as f64 / (2 * n) as f64).cos()
                            * (std::f64::consts::PI * (2 * xx + 1) as f64 * l as f64 / (2 * n) as f64).cos();
                    }
                }
                out[k * n + l] = s;
            }
        }
        out
    }

    #[test]
    fn zero_and_constant_blocks() {
        assert!(forward_transform(&vec![0; 1024]).iter().all(|&c| c == 0));
        for c in [1, 77, 128, 255] {
            let f = forward_transform(&vec![c; 1024]);
            assert!((f[0] - c * 32).abs() <= 1, "dc {} for {c}", f[0]);
            assert!(f[1..].iter().all(|&v| v.abs() <= 1));
        }
    }

    #[test]
    fn forward_matches_float_oracle() {
        let n = 8;
        let x: Vec<i32> = (0..64).map(|i| ((i * 37) % 256) as i32).collect();
        let f = forward_transform(&x);
        let o = dct_oracle(&x.iter().map(|&v| v as f64).collect::<Vec<_>>(), n);
        for (a, b) in f.iter().zip(&o) {
            assert!((*a as f64 - b).abs() <= 1.0, "{a} vs {b}");
        }
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(step_size(4), 1.0);
        assert!((step_size(22) - 8.0).abs() < 1e-12);
        assert_eq!(quantize(&[12, -12, 11, 4, -4, 3], 22).unwrap().levels, vec![2, -2, 1, 1, -1, 0]);
        assert_eq!(quantize(&[5, -7], 4).unwrap().levels, vec![5, -7]);
        assert!(quantize(&[0], 52).is_err());
    }

    #[test]
    fn bitplane_examples() {
        assert_eq!(plane_count(0), 2);
        assert_eq!(plane_count(1), 2);
        assert_eq!(plane_count(2), 3);
        let planes = bitplane_split(&[0; 16], 2);
        assert_eq!(planes.len(), 2);
        assert!(planes.iter().all(|p| p.iter().all(|&b| b == 0)));
        let planes = bitplane_split(&[-1, 0, 1], 2);
        assert_eq!(planes[0], vec![1, 0, 1]);
        assert_eq!(planes[1], vec![1, 0, 0]);
    }

    #[test]
    fn join_split_random_ten_thousand() {
        let mut s = 0x9e3779b97f4a7c15u64;
        for _ in 0..10_000 {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            let p = 2 + (s % 14) as usize;
            let cap = max_magnitude(p);
            let levels: Vec<i32> = (0..16)
                .map(|i| {
                    let r = (s.rotate_left(i * 4) % (2 * cap as u64 + 1)) as i32;
                    r - cap
                })
                .collect();
            assert_eq!(bitplane_join(&bitplane_split(&levels, p)), levels);
        }
    }

    #[test]
    fn dequantize_is_idempotent_on_levels() {
        let q = QuantizedBlock { levels: (0..64).map(|i| i - 32).collect(), qp: 27 };
        let again = quantize(&dequantize(&q), 27).unwrap();
        assert_eq!(again, q);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inverse_forward_within_one(px in proptest::collection::vec(0i32..256, 1024)) {
            let back = inverse_transform(&forward_transform(&px));
            for (a, b) in back.iter().zip(&px) {
                prop_assert!((a - b).abs() <= 1);
            }
        }

        #[test]
        fn reconstruction_depends_on_levels_only(px in proptest::collection::vec(0u8..=255, 64), qp in 0u8..52) {
            let q = encode_pixels(&px, qp).unwrap();
            let r1 = reconstruct(&q);
            let r2 = reconstruct(&QuantizedBlock { levels: q.levels.clone(), qp });
            prop_assert_eq!(r1, r2);
        }
    }
}
