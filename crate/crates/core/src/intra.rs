//! Intra prediction from reconstructed neighbour borders.
//!
//! Every context is mapped to a canonical frame in which the available
//! references sit above and to the left of the block. Prediction happens in
//! that frame and is rotated back.

use crate::blocks::{BlockGrid, Context, Side};
use crate::error::{Error, Result};

pub const MODE_DC: u8 = 0;
pub const MODE_PLANAR: u8 = 1;
pub const NUM_MODES: u8 = 10;

/// (is_vertical, angle) for modes 2..=9, in 1/32 sample units.
const ANGULAR: [(bool, i32); 8] =
    [(false, 13), (false, 0), (false, -13), (false, -32), (true, -13), (true, 0), (true, 13), (true, 32)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Orientation {
    Identity,
    Rot180,
    TopRight,
    BottomLeft,
}

impl Orientation {
    fn of(ctx: Context) -> Self {
        match ctx {
            Context::L | Context::T | Context::Tl2 | Context::Tl3 | Context::Empty => Orientation::Identity,
            Context::R | Context::B | Context::Br2 | Context::Br3 => Orientation::Rot180,
            Context::Tr2 | Context::Tr3 => Orientation::TopRight,
            Context::Bl2 | Context::Bl3 => Orientation::BottomLeft,
        }
    }

    /// Canonical (x, y) to real block coordinates; both may be -1 or n.
    #[inline]
    fn map(self, x: i32, y: i32, n: i32) -> (i32, i32) {
        match self {
            Orientation::Identity => (x, y),
            Orientation::Rot180 => (n - 1 - x, n - 1 - y),
            Orientation::TopRight => (n - 1 - y, x),
            Orientation::BottomLeft => (y, n - 1 - x),
        }
    }
}

/// Canonical-frame availability: (top, left, corner).
fn canonical_availability(ctx: Context) -> (bool, bool, bool) {
    match ctx {
        Context::L | Context::R => (false, true, false),
        Context::T | Context::B => (true, false, false),
        Context::Tl2 | Context::Tr2 | Context::Bl2 | Context::Br2 => (true, true, false),
        Context::Tl3 | Context::Tr3 | Context::Bl3 | Context::Br3 => (true, true, true),
        Context::Empty => (false, false, false),
    }
}

/// Reference samples in the canonical frame. `top[0]`/`left[0]` hold the
/// corner; indices 1..=2n hold the side samples, extended by replication.
struct References {
    top: Vec<i32>,
    left: Vec<i32>,
}

fn gather<'a>(
    grid: &BlockGrid,
    b: usize,
    ctx: Context,
    recon: &dyn Fn(usize) -> Option<&'a [u8]>,
) -> Result<References> {
    let n = grid.block_size as i32;
    let orient = Orientation::of(ctx);
    let (has_top, has_left, has_corner) = canonical_availability(ctx);
    let fetch = |cx: i32, cy: i32| -> Result<i32> {
        let (x, y) = orient.map(cx, cy, n);
        let mut blk = b;
        let (mut lx, mut ly) = (x, y);
        if y < 0 {
            blk = grid.neighbor(blk, Side::Top).ok_or(Error::MissingNeighbor { block: b, what: "top" })?;
            ly = n - 1;
        } else if y >= n {
            blk = grid.neighbor(blk, Side::Bottom).ok_or(Error::MissingNeighbor { block: b, what: "bottom" })?;
            ly = 0;
        }
        if x < 0 {
            blk = grid.neighbor(blk, Side::Left).ok_or(Error::MissingNeighbor { block: b, what: "left" })?;
            lx = n - 1;
        } else if x >= n {
            blk = grid.neighbor(blk, Side::Right).ok_or(Error::MissingNeighbor { block: b, what: "right" })?;
            lx = 0;
        }
        let px = recon(blk).ok_or(Error::MissingNeighbor { block: b, what: "reconstructed" })?;
        Ok(px[(ly * n + lx) as usize] as i32)
    };
    let nu = n as usize;
    let mut top = vec![0i32; 2 * nu + 1];
    let mut left = vec![0i32; 2 * nu + 1];
    if has_top {
        for i in 0..n {
            top[i as usize + 1] = fetch(i, -1)?;
        }
    }
    if has_left {
        for j in 0..n {
            left[j as usize + 1] = fetch(-1, j)?;
        }
    }
    let corner = if has_corner {
        fetch(-1, -1)?
    } else if has_top && has_left {
        (top[1] + left[1] + 1) >> 1
    } else if has_top {
        top[1]
    } else if has_left {
        left[1]
    } else {
        128
    };
    top[0] = corner;
    left[0] = corner;
    if !has_top {
        top[1..=nu].fill(corner);
    }
    if !has_left {
        left[1..=nu].fill(corner);
    }
    for i in nu + 1..=2 * nu {
        top[i] = top[nu];
        left[i] = left[nu];
    }
    Ok(References { top, left })
}

fn predict_canonical(refs: &References, mode: u8, n: usize, has_top: bool, has_left: bool) -> Vec<i32> {
    let mut out = vec![0i32; n * n];
    let log2n = n.trailing_zeros();
    match mode {
        MODE_DC => {
            let mut sum = 0i32;
            let mut cnt = 0i32;
            if has_top {
                sum += refs.top[1..=n].iter().sum::<i32>();
                cnt += n as i32;
            }
            if has_left {
                sum += refs.left[1..=n].iter().sum::<i32>();
                cnt += n as i32;
            }
            let dc = if cnt == 0 { refs.top[0] } else { (sum + cnt / 2) / cnt };
            out.fill(dc);
        }
        MODE_PLANAR => {
            let tr = refs.top[n + 1];
            let bl = refs.left[n + 1];
            for y in 0..n {
                for x in 0..n {
                    let v = (n - 1 - x) as i32 * refs.left[y + 1]
                        + (x + 1) as i32 * tr
                        + (n - 1 - y) as i32 * refs.top[x + 1]
                        + (y + 1) as i32 * bl
                        + n as i32;
                    out[y * n + x] = v >> (log2n + 1);
                }
            }
        }
        m => {
            let (vertical, angle) = ANGULAR[(m - 2) as usize];
            let (main_src, side_src) = if vertical { (&refs.top, &refs.left) } else { (&refs.left, &refs.top) };
            // ref_main[k + n] corresponds to reference index k, k in -n..=2n
            let mut ref_main = vec![0i32; 3 * n + 1];
            for k in 0..=2 * n {
                ref_main[k + n] = main_src[k];
            }
            if angle < 0 {
                let inv = (-8192 + angle / 2) / angle; // rounded 8192/|angle|
                let last = (n as i32 * angle) >> 5;
                for k in last..=-1 {
                    let idx = ((-k * inv + 128) >> 8) as usize;
                    ref_main[(k + n as i32) as usize] = side_src[idx.min(2 * n)];
                }
            }
            for j in 0..n {
                let pos = (j as i32 + 1) * angle;
                let ip = pos >> 5;
                let f = pos & 31;
                for i in 0..n {
                    let base = (i as i32 + ip + 1 + n as i32) as usize;
                    let v = if f == 0 {
                        ref_main[base]
                    } else {
                        ((32 - f) * ref_main[base] + f * ref_main[base + 1] + 16) >> 5
                    };
                    // vertical: j is row, i column; horizontal: transposed
                    if vertical {
                        out[j * n + i] = v;
                    } else {
                        out[i * n + j] = v;
                    }
                }
            }
        }
    }
    out
}

/// Prediction of block `b` for context `ctx` and intra `mode`.
/// `recon` returns the reconstruction of a decoded block.
pub fn predict<'a>(
    grid: &BlockGrid,
    b: usize,
    ctx: Context,
    mode: u8,
    recon: &dyn Fn(usize) -> Option<&'a [u8]>,
) -> Result<Vec<u8>> {
    if ctx == Context::Empty {
        return Err(Error::InvalidArgument("EMPTY context has no prediction".into()));
    }
    if mode >= NUM_MODES {
        return Err(Error::InvalidArgument(format!("intra mode {mode} out of range")));
    }
    let refs = gather(grid, b, ctx, recon)?;
    let (has_top, has_left, _) = canonical_availability(ctx);
    let n = grid.block_size;
    let canon = predict_canonical(&refs, mode, n, has_top, has_left);
    let orient = Orientation::of(ctx);
    let mut out = vec![0u8; n * n];
    for y in 0..n {
        for x in 0..n {
            let (rx, ry) = orient.map(x as i32, y as i32, n as i32);
            out[ry as usize * n + rx as usize] = canon[y * n + x].clamp(0, 255) as u8;
        }
    }
    Ok(out)
}

/// Mode minimizing the SSE against `original` (lowest id on ties).
pub fn best_mode<'a>(
    grid: &BlockGrid,
    b: usize,
    ctx: Context,
    original: &[u8],
    recon: &dyn Fn(usize) -> Option<&'a [u8]>,
) -> Result<(u8, Vec<u8>)> {
    let mut best: Option<(u64, u8, Vec<u8>)> = None;
    for mode in 0..NUM_MODES {
        let p = predict(grid, b, ctx, mode, recon)?;
        let sse: u64 = p.iter().zip(original).map(|(&a, &o)| (a as i64 - o as i64).pow(2) as u64).sum();
        if best.as_ref().map_or(true, |(s, _, _)| sse < *s) {
            best = Some((sse, mode, p));
        }
    }
    let (_, m, p) = best.expect("at least one mode");
    Ok((m, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::ALL_CONTEXTS;
    use proptest::prelude::*;

    fn grid() -> BlockGrid {
        BlockGrid::new(64, 48, 16).unwrap()
    }

    fn recon_all<'a>(blocks: &'a [Vec<u8>]) -> impl Fn(usize) -> Option<&'a [u8]> + 'a {
        move |b| Some(blocks[b].as_slice())
    }

    #[test]
    fn dc_of_constant_neighbours() {
        let g = grid();
        let blocks = vec![vec![93u8; 256]; g.len()];
        let r = recon_all(&blocks);
        for ctx in &ALL_CONTEXTS[..12] {
            let p = predict(&g, g.index(1, 1), *ctx, MODE_DC, &r).unwrap();
            assert!(p.iter().all(|&v| v == 93), "{ctx}");
        }
    }

    #[test]
    fn pure_horizontal_extends_left_column() {
        let g = grid();
        let mut blocks = vec![vec![0u8; 256]; g.len()];
        let left = g.index(1, 0);
        for y in 0..16 {
            for x in 0..16 {
                blocks[left][y * 16 + x] = (x * 10 + y) as u8;
            }
        }
        let r = recon_all(&blocks);
        let p = predict(&g, g.index(1, 1), Context::L, 3, &r).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(p[y * 16 + x], blocks[left][y * 16 + 15]);
            }
        }
    }

    #[test]
    fn pure_vertical_from_bottom_is_rotated() {
        let g = grid();
        let mut blocks = vec![vec![0u8; 256]; g.len()];
        let below = g.index(2, 1);
        for x in 0..16 {
            blocks[below][x] = (x * 9 + 3) as u8;
        }
        let r = recon_all(&blocks);
        let p = predict(&g, g.index(1, 1), Context::B, 7, &r).unwrap();
        for y in 0..16 {
            for x in 0..16 {
                assert_eq!(p[y * 16 + x], blocks[below][x]);
            }
        }
    }

    /// Direct planar formula on real-frame references for the top-left case.
    #[test]
    fn planar_type3_matches_formula() {
        let g = grid();
        let mut blocks = vec![vec![0u8; 256]; g.len()];
        for (k, blk) in blocks.iter_mut().enumerate() {
            for (i, v) in blk.iter_mut().enumerate() {
                *v = ((i * 37 + k * 11) % 251) as u8;
            }
        }
        let b = g.index(1, 1);
        let top = &blocks[g.index(0, 1)];
        let left = &blocks[g.index(1, 0)];
        let r = recon_all(&blocks);
        let p = predict(&g, b, Context::Tl3, MODE_PLANAR, &r).unwrap();
        let n = 16i32;
        let t = |x: i32| top[(15 * 16 + x.min(15)) as usize] as i32;
        let l = |y: i32| left[(y.min(15) * 16 + 15) as usize] as i32;
        for y in 0..n {
            for x in 0..n {
                let v = ((n - 1 - x) * l(y) + (x + 1) * t(n) + (n - 1 - y) * t(x) + (y + 1) * l(n) + n) >> 5;
                assert_eq!(p[(y * n + x) as usize] as i32, v);
            }
        }
    }

    #[test]
    fn missing_neighbour_is_error() {
        let g = grid();
        let blocks = vec![vec![0u8; 256]; g.len()];
        let r = recon_all(&blocks);
        assert!(predict(&g, g.index(0, 1), Context::T, 0, &r).is_err());
        let none = |_b: usize| -> Option<&[u8]> { None };
        assert!(predict(&g, g.index(1, 1), Context::L, 0, &none).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn prediction_within_reference_range(seed in any::<u64>(), ctx_i in 0usize..12, mode in 0u8..10) {
            let g = grid();
            let mut s = seed | 1;
            let mut blocks = vec![vec![0u8; 256]; g.len()];
            for blk in blocks.iter_mut() {
                for v in blk.iter_mut() {
                    s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                    *v = (s % 256) as u8;
                }
            }
            let ctx = ALL_CONTEXTS[ctx_i];
            let b = g.index(1, 2);
            let r = recon_all(&blocks);
            let p1 = predict(&g, b, ctx, mode, &r).unwrap();
            let p2 = predict(&g, b, ctx, mode, &r).unwrap();
            prop_assert_eq!(&p1, &p2);
            // every border pixel of every required neighbour bounds the prediction
            let mut lo = 255i32;
            let mut hi = 0i32;
            for nb in ctx.required_blocks(&g, b).unwrap() {
                for &v in &blocks[nb] {
                    lo = lo.min(v as i32);
                    hi = hi.max(v as i32);
                }
            }
            for &v in &p1 {
                prop_assert!(v as i32 >= lo - 1 && v as i32 <= hi + 1);
            }
        }
    }
}
