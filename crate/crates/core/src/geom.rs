//! Sphere/plane mapping, gnomonic viewports, viewport distortion and usefulness.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{invalid, Error, Result};
use crate::image::PlaneImage;

/// A gaze direction. Longitude lies in [-pi, pi), latitude in [-pi/2, pi/2].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    pub longitude: f64,
    pub latitude: f64,
}

/// Wraps an angle into [-pi, pi).
pub fn wrap_longitude(lon: f64) -> f64 {
    let mut l = (lon + PI).rem_euclid(TAU) - PI;
    if l >= PI {
        l -= TAU;
    }
    l
}

impl Direction {
    /// Normalizes longitude and clamps latitude.
    pub fn new(longitude: f64, latitude: f64) -> Self {
        Self { longitude: wrap_longitude(longitude), latitude: latitude.clamp(-FRAC_PI_2, FRAC_PI_2) }
    }

    pub fn from_degrees(lon: f64, lat: f64) -> Self {
        Self::new(lon.to_radians(), lat.to_radians())
    }

    fn unit(&self) -> [f64; 3] {
        let (sl, cl) = self.longitude.sin_cos();
        let (sp, cp) = self.latitude.sin_cos();
        [cp * cl, cp * sl, sp]
    }

    /// Great-circle distance in radians.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let a = self.unit();
        let b = other.unit();
        let d = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
        d.acos()
    }
}

/// Maps a direction to continuous equirectangular pixel coordinates.
pub fn sphere_to_pixel(d: Direction, w: usize, h: usize) -> (f64, f64) {
    let lon = wrap_longitude(d.longitude);
    let mut x = (lon + PI) / TAU * w as f64;
    if x >= w as f64 {
        x -= w as f64;
    }
    let y = (FRAC_PI_2 - d.latitude) / PI * h as f64;
    (x, y)
}

/// Inverse of [`sphere_to_pixel`].
pub fn pixel_to_sphere(x: f64, y: f64, w: usize, h: usize) -> Direction {
    Direction { longitude: wrap_longitude(x / w as f64 * TAU - PI), latitude: FRAC_PI_2 - y / h as f64 * PI }
}

/// Gaze direction, fields of view (radians) and viewport resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewportSpec {
    pub direction: Direction,
    pub fov_h: f64,
    pub fov_v: f64,
    pub vp_width: usize,
    pub vp_height: usize,
}

impl ViewportSpec {
    pub fn new(direction: Direction, fov_h: f64, fov_v: f64, vp_width: usize, vp_height: usize) -> Result<Self> {
        let s = Self { direction, fov_h, fov_v, vp_width, vp_height };
        s.validate()?;
        Ok(s)
    }

    /// 90 x 90 degrees at 256 x 256 pixels.
    pub fn default_at(direction: Direction) -> Self {
        Self { direction, fov_h: PI / 2.0, fov_v: PI / 2.0, vp_width: 256, vp_height: 256 }
    }

    /// Degenerate viewport that sees the whole sphere.
    pub fn full_sphere() -> Self {
        Self { direction: Direction::new(0.0, 0.0), fov_h: TAU, fov_v: PI, vp_width: 1, vp_height: 1 }
    }

    pub fn with_direction(&self, direction: Direction) -> Self {
        Self { direction, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vp_width == 0 || self.vp_height == 0 {
            return Err(invalid("viewport resolution must be positive"));
        }
        if self.is_full_sphere() {
            return Ok(());
        }
        if !(self.fov_h > 0.0 && self.fov_h < PI && self.fov_v > 0.0 && self.fov_v < PI) {
            return Err(invalid(format!("fov must lie in (0, pi), got {} x {}", self.fov_h, self.fov_v)));
        }
        Ok(())
    }

    pub fn is_full_sphere(&self) -> bool {
        self.fov_h >= PI || self.fov_v >= PI
    }

    fn basis(&self) -> [[f64; 3]; 3] {
        let (sl, cl) = self.direction.longitude.sin_cos();
        let (sp, cp) = self.direction.latitude.sin_cos();
        let f = [cp * cl, cp * sl, sp];
        let r = [-sl, cl, 0.0];
        let u = [-sp * cl, -sp * sl, cp];
        [f, r, u]
    }

    /// Continuous source-pixel coordinates of the back-projection of every
    /// viewport pixel, row-major.
    pub fn for_each_source_point(&self, w: usize, h: usize, mut visit: impl FnMut(usize, usize, f64, f64)) {
        let [f, r, u] = self.basis();
        let th = (self.fov_h / 2.0).tan();
        let tv = (self.fov_v / 2.0).tan();
        let a: Vec<f64> =
            (0..self.vp_width).map(|i| (2.0 * (i as f64 + 0.5) / self.vp_width as f64 - 1.0) * th).collect();
        for v in 0..self.vp_height {
            let b = (1.0 - 2.0 * (v as f64 + 0.5) / self.vp_height as f64) * tv;
            let base = [f[0] + b * u[0], f[1] + b * u[1], f[2] + b * u[2]];
            for (i, &ai) in a.iter().enumerate() {
                let x = base[0] + ai * r[0];
                let y = base[1] + ai * r[1];
                let z = base[2] + ai * r[2];
                let norm = (x * x + y * y + z * z).sqrt();
                let lon = y.atan2(x);
                let lat = (z / norm).clamp(-1.0, 1.0).asin();
                let (px, py) = sphere_to_pixel(Direction { longitude: lon, latitude: lat }, w, h);
                visit(i, v, px, py);
            }
        }
    }

    /// Forward projection of a direction to the nearest viewport pixel, if visible.
    pub fn project(&self, d: Direction) -> Option<(usize, usize)> {
        let [f, r, u] = self.basis();
        let p = d.unit();
        let df = dot(p, f);
        if df <= 1e-12 {
            return None;
        }
        let a = dot(p, r) / df / (self.fov_h / 2.0).tan();
        let b = dot(p, u) / df / (self.fov_v / 2.0).tan();
        let px = (a + 1.0) / 2.0 * self.vp_width as f64 - 0.5;
        let py = (1.0 - b) / 2.0 * self.vp_height as f64 - 0.5;
        let (px, py) = (px.round(), py.round());
        if px < 0.0 || py < 0.0 || px >= self.vp_width as f64 || py >= self.vp_height as f64 {
            return None;
        }
        Some((px as usize, py as usize))
    }

    /// Source coordinates of a single viewport pixel.
    pub fn source_point(&self, i: usize, v: usize, w: usize, h: usize) -> (f64, f64) {
        // same operation order as for_each_source_point, so results are bit-identical
        let [f, r, u] = self.basis();
        let a = (2.0 * (i as f64 + 0.5) / self.vp_width as f64 - 1.0) * (self.fov_h / 2.0).tan();
        let b = (1.0 - 2.0 * (v as f64 + 0.5) / self.vp_height as f64) * (self.fov_v / 2.0).tan();
        let base = [f[0] + b * u[0], f[1] + b * u[1], f[2] + b * u[2]];
        let x = base[0] + a * r[0];
        let y = base[1] + a * r[1];
        let z = base[2] + a * r[2];
        let norm = (x * x + y * y + z * z).sqrt();
        let lon = y.atan2(x);
        let lat = (z / norm).clamp(-1.0, 1.0).asin();
        sphere_to_pixel(Direction { longitude: lon, latitude: lat }, w, h)
    }
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Integer source pixel holding a continuous coordinate.
#[inline]
pub fn pixel_of(x: f64, y: f64, w: usize, h: usize) -> (usize, usize) {
    let xi = (x.floor() as i64).rem_euclid(w as i64) as usize;
    let yi = (y.floor() as i64).clamp(0, h as i64 - 1) as usize;
    (xi, yi)
}

/// Block index containing a continuous coordinate.
#[inline]
pub fn block_of(x: f64, y: f64, w: usize, h: usize, block_size: usize) -> usize {
    let (xi, yi) = pixel_of(x, y, w, h);
    (yi / block_size) * (w / block_size) + xi / block_size
}

/// Blocks hit by at least one viewport pixel, ascending.
pub fn viewport_footprint(spec: &ViewportSpec, w: usize, h: usize, block_size: usize) -> Result<Vec<usize>> {
    if block_size == 0 || w % block_size != 0 || h % block_size != 0 {
        return Err(Error::NonDivisible { width: w, height: h, block_size });
    }
    let n = (w / block_size) * (h / block_size);
    if spec.is_full_sphere() {
        return Ok((0..n).collect());
    }
    let mut hit = vec![false; n];
    spec.for_each_source_point(w, h, |_, _, x, y| hit[block_of(x, y, w, h, block_size)] = true);
    Ok(hit.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect())
}

/// Finds a viewport pixel whose back-projection lands in block `b` by
/// projecting a few points of the block forward.
fn has_witness(spec: &ViewportSpec, w: usize, h: usize, block_size: usize, b: usize) -> bool {
    let cols = w / block_size;
    let (bx, by) = ((b % cols) * block_size, (b / cols) * block_size);
    let s = block_size as f64;
    for (fx, fy) in [(0.5, 0.5), (0.2, 0.2), (0.8, 0.2), (0.2, 0.8), (0.8, 0.8)] {
        let c = pixel_to_sphere(bx as f64 + fx * s, by as f64 + fy * s, w, h);
        if let Some((i, v)) = spec.project(c) {
            let (x, y) = spec.source_point(i, v, w, h);
            if block_of(x, y, w, h, block_size) == b {
                return true;
            }
        }
    }
    false
}

/// Whether block `b` is in the footprint. Tries the block centre's
/// forward projection before scanning the whole viewport.
pub fn footprint_contains(spec: &ViewportSpec, w: usize, h: usize, block_size: usize, b: usize) -> bool {
    if spec.is_full_sphere() {
        return true;
    }
    if has_witness(spec, w, h, block_size, b) {
        return true;
    }
    let mut found = false;
    spec.for_each_source_point(w, h, |_, _, x, y| {
        if !found && block_of(x, y, w, h, block_size) == b {
            found = true;
        }
    });
    found
}

/// Whether any block flagged in `set` is in the footprint. Fast path per
/// member, then a single full scan.
pub fn footprint_intersects(spec: &ViewportSpec, w: usize, h: usize, block_size: usize, set: &[bool]) -> bool {
    if spec.is_full_sphere() {
        return set.iter().any(|&b| b);
    }
    for (b, _) in set.iter().enumerate().filter(|(_, &m)| m) {
        if has_witness(spec, w, h, block_size, b) {
            return true;
        }
    }
    let mut found = false;
    spec.for_each_source_point(w, h, |_, _, x, y| {
        if !found && set[block_of(x, y, w, h, block_size)] {
            found = true;
        }
    });
    found
}

/// Block containing the source pixel under the viewport centre.
pub fn center_block(spec: &ViewportSpec, w: usize, h: usize, block_size: usize) -> usize {
    let (x, y) = sphere_to_pixel(spec.direction, w, h);
    block_of(x, y, w, h, block_size)
}

/// Per-block availability mask used when rendering from a partial decode.
#[derive(Clone, Copy)]
pub struct BlockMask<'a> {
    pub decoded: &'a [bool],
    pub block_size: usize,
}

impl BlockMask<'_> {
    #[inline]
    fn has(&self, x: usize, y: usize, w: usize) -> bool {
        self.decoded[(y / self.block_size) * (w / self.block_size) + x / self.block_size]
    }
}

/// Gnomonic viewport render with bilinear sampling (horizontal wrap,
/// vertical clamp). Luma of colour inputs is used.
pub fn render_viewport(img: &PlaneImage, spec: &ViewportSpec) -> PlaneImage {
    render_viewport_masked(img, spec, None)
}

/// As [`render_viewport`], but bilinear taps that fall in blocks not flagged
/// in `mask` are replaced by the nearest sample.
pub fn render_viewport_masked(img: &PlaneImage, spec: &ViewportSpec, mask: Option<BlockMask<'_>>) -> PlaneImage {
    let luma;
    let img = if img.channels == 1 {
        img
    } else {
        luma = img.to_luma();
        &luma
    };
    let (w, h) = (img.width, img.height);
    let mut out = vec![0u8; spec.vp_width * spec.vp_height];
    spec.for_each_source_point(w, h, |i, v, x, y| {
        let fx = x - 0.5;
        let fy = y - 0.5;
        let x0f = fx.floor();
        let y0f = fy.floor();
        let tx = fx - x0f;
        let ty = fy - y0f;
        let x0 = (x0f as i64).rem_euclid(w as i64) as usize;
        let x1 = (x0 + 1) % w;
        let y0 = (y0f as i64).clamp(0, h as i64 - 1) as usize;
        let y1 = (y0f as i64 + 1).clamp(0, h as i64 - 1) as usize;
        if let Some(m) = mask {
            if !(m.has(x0, y0, w) && m.has(x1, y0, w) && m.has(x0, y1, w) && m.has(x1, y1, w)) {
                let (nx, ny) = pixel_of(x, y, w, h);
                out[v * spec.vp_width + i] = img.get(nx, ny);
                return;
            }
        }
        let p00 = img.get(x0, y0) as f64;
        let p10 = img.get(x1, y0) as f64;
        let p01 = img.get(x0, y1) as f64;
        let p11 = img.get(x1, y1) as f64;
        let val = (1.0 - ty) * ((1.0 - tx) * p00 + tx * p10) + ty * ((1.0 - tx) * p01 + tx * p11);
        out[v * spec.vp_width + i] = val.round().clamp(0.0, 255.0) as u8;
    });
    PlaneImage { width: spec.vp_width, height: spec.vp_height, channels: 1, data: out }
}

/// Mean squared error over luma.
pub fn viewport_mse(v: &PlaneImage, v_hat: &PlaneImage) -> Result<f64> {
    if v.width != v_hat.width || v.height != v_hat.height {
        return Err(Error::DimensionMismatch(format!("{}x{} vs {}x{}", v.width, v.height, v_hat.width, v_hat.height)));
    }
    let a = v.to_luma();
    let b = v_hat.to_luma();
    let sum: u64 = a.data.iter().zip(&b.data).map(|(&p, &q)| (p as i64 - q as i64).pow(2) as u64).sum();
    Ok(sum as f64 / a.data.len() as f64)
}

/// PSNR in dB with peak 255; identical inputs give `f64::INFINITY`.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

pub fn viewport_psnr(v: &PlaneImage, v_hat: &PlaneImage) -> Result<f64> {
    Ok(psnr_from_mse(viewport_mse(v, v_hat)?))
}

/// Fraction of decoded pixels that are displayed.
pub fn usefulness(displayed_px: usize, decoded_px: usize) -> Result<f64> {
    if decoded_px == 0 {
        return Err(invalid("usefulness undefined with zero decoded pixels"));
    }
    if displayed_px > decoded_px {
        return Err(invalid(format!("{displayed_px} displayed exceeds {decoded_px} decoded")));
    }
    Ok(displayed_px as f64 / decoded_px as f64)
}

/// Distinct source pixels (nearest sample) displayed by the viewport that
/// fall inside blocks flagged in `within`.
pub fn displayed_pixels(spec: &ViewportSpec, w: usize, h: usize, block_size: usize, within: &[bool]) -> usize {
    if spec.is_full_sphere() {
        return within.iter().filter(|&&b| b).count() * block_size * block_size;
    }
    let mut seen = vec![false; w * h];
    let mut count = 0;
    spec.for_each_source_point(w, h, |_, _, x, y| {
        let (xi, yi) = pixel_of(x, y, w, h);
        let idx = yi * w + xi;
        if !seen[idx] {
            seen[idx] = true;
            if within[(yi / block_size) * (w / block_size) + xi / block_size] {
                count += 1;
            }
        }
    });
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sphere_to_pixel_examples() {
        assert_eq!(sphere_to_pixel(Direction::new(0.0, 0.0), 512, 256), (256.0, 128.0));
        assert_eq!(sphere_to_pixel(Direction::new(-PI, FRAC_PI_2), 512, 256), (0.0, 0.0));
        let (x, y) = sphere_to_pixel(Direction::new(PI - 1e-9, 0.0), 512, 256);
        assert!(x > 511.99 && x < 512.0);
        assert_eq!(y, 128.0);
        assert_eq!(sphere_to_pixel(Direction::new(PI, 0.0), 512, 256).0, 0.0);
    }

    #[test]
    fn pixel_round_trip_all_pixels() {
        let (w, h) = (64, 32);
        for y in 0..h {
            for x in 0..w {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let d = pixel_to_sphere(px, py, w, h);
                let (qx, qy) = sphere_to_pixel(d, w, h);
                let back = pixel_to_sphere(qx, qy, w, h);
                assert!((back.longitude - d.longitude).abs() < 1e-9);
                assert!((back.latitude - d.latitude).abs() < 1e-9);
                assert!((qx - px).abs() < 1e-9 && (qy - py).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn full_sphere_footprint_is_everything() {
        let fp = viewport_footprint(&ViewportSpec::full_sphere(), 512, 256, 32).unwrap();
        assert_eq!(fp, (0..128).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_bad_fov() {
        assert!(ViewportSpec::new(Direction::new(0.0, 0.0), 0.0, 1.0, 8, 8).is_err());
        assert!(ViewportSpec::new(Direction::new(0.0, 0.0), 1.0, 1.0, 8, 8).is_ok());
    }

    /// Slow, self-contained footprint: per-pixel rotation matrix applied to
    /// the camera-frame ray.
    fn oracle_footprint(spec: &ViewportSpec, w: usize, h: usize, bs: usize) -> Vec<usize> {
        let (lam, phi) = (spec.direction.longitude, spec.direction.latitude);
        let mut set = std::collections::BTreeSet::new();
        for v in 0..spec.vp_height {
            for i in 0..spec.vp_width {
                let cx = (i as f64 + 0.5) / spec.vp_width as f64 * 2.0 - 1.0;
                let cy = 1.0 - (v as f64 + 0.5) / spec.vp_height as f64 * 2.0;
                // camera frame: forward x, right y, up z
                let cam = [1.0, cx * (spec.fov_h / 2.0).tan(), cy * (spec.fov_v / 2.0).tan()];
                // rotate by pitch about -y then yaw about z
                let x1 = cam[0] * phi.cos() - cam[2] * phi.sin();
                let z1 = cam[0] * phi.sin() + cam[2] * phi.cos();
                let y1 = cam[1];
                let x2 = x1 * lam.cos() - y1 * lam.sin();
                let y2 = x1 * lam.sin() + y1 * lam.cos();
                let r = (x2 * x2 + y2 * y2 + z1 * z1).sqrt();
                let lon = y2.atan2(x2);
                let lat = (z1 / r).asin();
                let mut px = (lon + PI) / (2.0 * PI) * w as f64;
                if px >= w as f64 {
                    px -= w as f64;
                }
                let py = (PI / 2.0 - lat) / PI * h as f64;
                let xi = (px.floor() as usize) % w;
                let yi = (py.floor() as usize).min(h - 1);
                set.insert((yi / bs) * (w / bs) + xi / bs);
            }
        }
        set.into_iter().collect()
    }

    #[test]
    fn tiny_fov_at_equator() {
        // one block spans 22.5 degrees; a 5 degree viewport straddling a corner
        let spec = ViewportSpec::new(Direction::from_degrees(0.0, 0.0), 0.09, 0.09, 16, 16).unwrap();
        let fp = viewport_footprint(&spec, 512, 256, 32).unwrap();
        assert_eq!(fp, oracle_footprint(&spec, 512, 256, 32));
        assert!((1..=4).contains(&fp.len()));
        assert_eq!(fp, vec![55, 56, 71, 72]);
    }

    #[test]
    fn pole_footprint_spans_top_row() {
        let spec = ViewportSpec::new(Direction::from_degrees(10.0, 85.0), 1.2, 1.2, 64, 64).unwrap();
        let fp = viewport_footprint(&spec, 512, 256, 32).unwrap();
        assert_eq!(fp, oracle_footprint(&spec, 512, 256, 32));
        for b in 0..16 {
            assert!(fp.contains(&b));
        }
    }

    #[test]
    fn render_constant_and_deterministic() {
        let img = PlaneImage::filled(128, 64, 77);
        let spec = ViewportSpec::default_at(Direction::new(0.3, 0.2));
        let spec = ViewportSpec { vp_width: 32, vp_height: 32, ..spec };
        let v = render_viewport(&img, &spec);
        assert!(v.data.iter().all(|&p| p == 77));
        let tex = PlaneImage::from_fn(128, 64, |x, y| ((x * 7) ^ (y * 13)) as u8);
        assert_eq!(render_viewport(&tex, &spec), render_viewport(&tex, &spec));
    }

    #[test]
    fn render_matches_nearest_oracle_on_smooth_image() {
        // smooth image at high resolution with a small fov: bilinear and nearest
        // agree within one level
        let (w, h) = (2048, 1024);
        let img = PlaneImage::from_fn(w, h, |x, y| ((x as f64 / 16.0) as usize % 200 + y / 64) as u8);
        let spec = ViewportSpec::new(Direction::new(0.0, 0.0), 0.05, 0.05, 24, 24).unwrap();
        let v = render_viewport(&img, &spec);
        for vy in 0..24 {
            for vx in 0..24 {
                let a = (2.0 * (vx as f64 + 0.5) / 24.0 - 1.0) * (0.025f64).tan();
                let b = (1.0 - 2.0 * (vy as f64 + 0.5) / 24.0) * (0.025f64).tan();
                let lon = a.atan2(1.0);
                let lat = (b / (1.0 + a * a + b * b).sqrt()).asin();
                let px = (lon + PI) / (2.0 * PI) * w as f64;
                let py = (PI / 2.0 - lat) / PI * h as f64;
                let nearest = img.get(px.floor() as usize, py.floor() as usize) as i32;
                assert!((v.data[vy * 24 + vx] as i32 - nearest).abs() <= 1, "{vx},{vy}");
            }
        }
    }

    #[test]
    fn psnr_examples() {
        let a = PlaneImage::filled(16, 16, 100);
        assert_eq!(viewport_psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = PlaneImage::filled(16, 16, 116);
        let expect = 10.0 * (255.0f64 * 255.0 / 256.0).log10();
        assert!((viewport_psnr(&a, &b).unwrap() - expect).abs() < 1e-12);
        assert!((expect - 24.05).abs() < 0.01);
        let mut c = PlaneImage::filled(16, 16, 0);
        c.data[5] = 255;
        let z = PlaneImage::filled(16, 16, 0);
        assert!((viewport_psnr(&z, &c).unwrap() - 10.0 * 256f64.log10()).abs() < 1e-12);
        assert!(viewport_psnr(&a, &PlaneImage::filled(8, 16, 0)).is_err());
    }

    #[test]
    fn usefulness_examples() {
        assert_eq!(usefulness(100, 100).unwrap(), 1.0);
        assert_eq!(usefulness(100, 400).unwrap(), 0.25);
        assert!(usefulness(1, 0).is_err());
        assert!(usefulness(5, 4).is_err());
    }

    #[test]
    fn fast_membership_agrees_with_footprint() {
        let spec = ViewportSpec { vp_width: 64, vp_height: 64, ..ViewportSpec::default_at(Direction::new(1.0, 0.4)) };
        let fp = viewport_footprint(&spec, 512, 256, 32).unwrap();
        for b in 0..128 {
            assert_eq!(footprint_contains(&spec, 512, 256, 32, b), fp.contains(&b), "block {b}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn footprint_matches_oracle(lon in -PI..PI, lat in -1.55f64..1.55, fh in 0.1f64..2.5, fv in 0.1f64..2.5,
                                    vw in 4usize..64, vh in 4usize..64) {
            let spec = ViewportSpec::new(Direction::new(lon, lat), fh, fv, vw, vh).unwrap();
            let fp = viewport_footprint(&spec, 512, 256, 32).unwrap();
            prop_assert!(!fp.is_empty());
            prop_assert_eq!(fp, oracle_footprint(&spec, 512, 256, 32));
        }

        #[test]
        fn footprint_shift_invariance(k in 0usize..16, base in -0.3f64..0.3, fov in 0.2f64..2.0) {
            let step = TAU / 16.0;
            // offset by a tenth of a block to stay clear of block edges
            let lon0 = base + 0.1 * step;
            let s0 = ViewportSpec::new(Direction::new(lon0, 0.0), fov, fov, 32, 32).unwrap();
            let s1 = s0.with_direction(Direction::new(lon0 + k as f64 * step, 0.0));
            let f0 = viewport_footprint(&s0, 512, 256, 32).unwrap();
            let mut shifted: Vec<usize> = f0.iter().map(|&b| (b / 16) * 16 + (b % 16 + k) % 16).collect();
            shifted.sort();
            prop_assert_eq!(viewport_footprint(&s1, 512, 256, 32).unwrap(), shifted);
        }

        #[test]
        fn usefulness_bounds(d in 1usize..1000, extra in 0usize..1000, more in 0usize..1000) {
            let u1 = usefulness(d, d + extra).unwrap();
            let u2 = usefulness(d, d + extra + more).unwrap();
            prop_assert!(u1 > 0.0 && u1 <= 1.0);
            prop_assert!(u2 <= u1);
        }
    }
}
