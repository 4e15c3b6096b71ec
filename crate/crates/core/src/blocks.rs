//! Block partition, neighbour graph with horizontal wraparound, and the
//! side-information contexts.

use std::fmt;

use crate::error::{Error, Result};
use crate::image::PlaneImage;

pub const DEFAULT_BLOCK_SIZE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockGrid {
    pub rows: usize,
    pub cols: usize,
    pub block_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize, block_size: usize) -> Result<Self> {
        if block_size == 0 || width == 0 || height == 0 || width % block_size != 0 || height % block_size != 0 {
            return Err(Error::NonDivisible { width, height, block_size });
        }
        Ok(Self { rows: height / block_size, cols: width / block_size, block_size })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> usize {
        self.cols * self.block_size
    }

    pub fn height(&self) -> usize {
        self.rows * self.block_size
    }

    pub fn pixels_per_block(&self) -> usize {
        self.block_size * self.block_size
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn row_col(&self, b: usize) -> (usize, usize) {
        (b / self.cols, b % self.cols)
    }

    /// Adjacent block on one side; left/right wrap around the row.
    pub fn neighbor(&self, b: usize, side: Side) -> Option<usize> {
        let (r, c) = self.row_col(b);
        match side {
            Side::Left if self.cols > 1 => Some(self.index(r, (c + self.cols - 1) % self.cols)),
            Side::Right if self.cols > 1 => Some(self.index(r, (c + 1) % self.cols)),
            Side::Top if r > 0 => Some(self.index(r - 1, c)),
            Side::Bottom if r + 1 < self.rows => Some(self.index(r + 1, c)),
            _ => None,
        }
    }

    /// Distinct adjacent blocks, ascending.
    pub fn neighbors(&self, b: usize) -> Vec<usize> {
        let mut v: Vec<usize> = [Side::Left, Side::Right, Side::Top, Side::Bottom]
            .into_iter()
            .filter_map(|s| self.neighbor(b, s))
            .filter(|&n| n != b)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn is_horizontal_pair(&self, a: usize, b: usize) -> bool {
        self.neighbor(a, Side::Left) == Some(b) || self.neighbor(a, Side::Right) == Some(b)
    }

    /// Copies block `b` out of a single-channel image.
    pub fn extract_block(&self, img: &PlaneImage, b: usize) -> Vec<u8> {
        let (r, c) = self.row_col(b);
        let n = self.block_size;
        let mut out = Vec::with_capacity(n * n);
        for y in 0..n {
            let start = (r * n + y) * img.width + c * n;
            out.extend_from_slice(&img.data[start..start + n]);
        }
        out
    }

    /// Splits a luma image into row-major blocks.
    pub fn partition(&self, img: &PlaneImage) -> Result<Vec<Vec<u8>>> {
        if img.width != self.width() || img.height != self.height() || img.channels != 1 {
            return Err(Error::DimensionMismatch(format!(
                "image {}x{}x{} vs grid {}x{}",
                img.width,
                img.height,
                img.channels,
                self.width(),
                self.height()
            )));
        }
        Ok((0..self.len()).map(|b| self.extract_block(img, b)).collect())
    }

    /// Inverse of [`BlockGrid::partition`]; missing blocks are filled with `fill`.
    pub fn reassemble(&self, blocks: &[Option<Vec<u8>>], fill: u8) -> PlaneImage {
        let n = self.block_size;
        let w = self.width();
        let mut data = vec![fill; w * self.height()];
        for (b, blk) in blocks.iter().enumerate() {
            if let Some(px) = blk {
                let (r, c) = self.row_col(b);
                for y in 0..n {
                    let start = (r * n + y) * w + c * n;
                    data[start..start + n].copy_from_slice(&px[y * n..(y + 1) * n]);
                }
            }
        }
        PlaneImage { width: w, height: self.height(), channels: 1, data }
    }
}

/// One of the 12 neighbour configurations, or no side information.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Context {
    L,
    R,
    T,
    B,
    Tl2,
    Tr2,
    Bl2,
    Br2,
    Tl3,
    Tr3,
    Bl3,
    Br3,
    Empty,
}

/// Preference order used when several contexts are realizable.
pub const CONTEXT_PREFERENCE: [Context; 12] = [
    Context::Tl3,
    Context::Tr3,
    Context::Bl3,
    Context::Br3,
    Context::Tl2,
    Context::Tr2,
    Context::Bl2,
    Context::Br2,
    Context::L,
    Context::R,
    Context::T,
    Context::B,
];

pub const ALL_CONTEXTS: [Context; 13] = [
    Context::L,
    Context::R,
    Context::T,
    Context::B,
    Context::Tl2,
    Context::Tr2,
    Context::Bl2,
    Context::Br2,
    Context::Tl3,
    Context::Tr3,
    Context::Bl3,
    Context::Br3,
    Context::Empty,
];

impl Context {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<Self> {
        ALL_CONTEXTS.get(id as usize).copied()
    }

    /// 0 for EMPTY, else 1..=3.
    pub fn si_type(self) -> u8 {
        match self {
            Context::L | Context::R | Context::T | Context::B => 1,
            Context::Tl2 | Context::Tr2 | Context::Bl2 | Context::Br2 => 2,
            Context::Tl3 | Context::Tr3 | Context::Bl3 | Context::Br3 => 3,
            Context::Empty => 0,
        }
    }

    /// Sides whose adjacent blocks are read.
    pub fn sides(self) -> &'static [Side] {
        use Side::*;
        match self {
            Context::L => &[Left],
            Context::R => &[Right],
            Context::T => &[Top],
            Context::B => &[Bottom],
            Context::Tl2 | Context::Tl3 => &[Top, Left],
            Context::Tr2 | Context::Tr3 => &[Top, Right],
            Context::Bl2 | Context::Bl3 => &[Bottom, Left],
            Context::Br2 | Context::Br3 => &[Bottom, Right],
            Context::Empty => &[],
        }
    }

    pub fn is_horizontal_type1(self) -> bool {
        matches!(self, Context::L | Context::R)
    }

    pub fn is_vertical_type1(self) -> bool {
        matches!(self, Context::T | Context::B)
    }

    /// The blocks this context reads for block `b`, or `None` if one of them
    /// does not exist in the grid.
    pub fn required_blocks(self, grid: &BlockGrid, b: usize) -> Option<Vec<usize>> {
        let mut out = Vec::with_capacity(3);
        for &s in self.sides() {
            out.push(grid.neighbor(b, s)?);
        }
        if self.si_type() == 3 {
            let (v, h) = (self.sides()[0], self.sides()[1]);
            let vert = grid.neighbor(b, v)?;
            out.push(grid.neighbor(vert, h)?);
        }
        Some(out)
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Context::L => "L",
            Context::R => "R",
            Context::T => "T",
            Context::B => "B",
            Context::Tl2 => "TL2",
            Context::Tr2 => "TR2",
            Context::Bl2 => "BL2",
            Context::Br2 => "BR2",
            Context::Tl3 => "TL3",
            Context::Tr3 => "TR3",
            Context::Bl3 => "BL3",
            Context::Br3 => "BR3",
            Context::Empty => "EMPTY",
        };
        f.write_str(s)
    }
}

/// Best context realizable from the decoded blocks: highest type first, then
/// the fixed preference order; EMPTY when no neighbour is decoded.
pub fn available_contexts(grid: &BlockGrid, b: usize, decoded: &[bool]) -> Context {
    for ctx in CONTEXT_PREFERENCE {
        if let Some(req) = ctx.required_blocks(grid, b) {
            if req.iter().all(|&n| decoded[n]) {
                return ctx;
            }
        }
    }
    Context::Empty
}

/// Contexts the encoder stores for block `b`, in canonical (id) order.
pub fn context_set_for(grid: &BlockGrid, b: usize, is_access: bool) -> Vec<Context> {
    let mut v: Vec<Context> =
        ALL_CONTEXTS[..12].iter().copied().filter(|c| c.required_blocks(grid, b).is_some()).collect();
    if is_access {
        v.push(Context::Empty);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partition_sizes_and_wrap() {
        let g = BlockGrid::new(512, 256, 32).unwrap();
        assert_eq!((g.rows, g.cols, g.len()), (8, 16, 128));
        let g2 = BlockGrid::new(64, 32, 32).unwrap();
        assert_eq!(g2.len(), 2);
        assert_eq!(g2.neighbor(0, Side::Right), Some(1));
        assert_eq!(g2.neighbor(1, Side::Right), Some(0));
        assert!(BlockGrid::new(100, 50, 32).is_err());
    }

    #[test]
    fn reassemble_is_identity() {
        let img = PlaneImage::from_fn(128, 64, |x, y| (x * 3 + y * 7) as u8);
        let g = BlockGrid::new(128, 64, 32).unwrap();
        let blocks: Vec<_> = g.partition(&img).unwrap().into_iter().map(Some).collect();
        assert_eq!(g.reassemble(&blocks, 0), img);
    }

    #[test]
    fn available_context_examples() {
        let g = BlockGrid::new(512, 256, 32).unwrap();
        let b = g.index(3, 5);
        let mut dec = vec![false; g.len()];
        assert_eq!(available_contexts(&g, b, &dec), Context::Empty);
        dec[g.index(3, 4)] = true;
        assert_eq!(available_contexts(&g, b, &dec), Context::L);
        dec[g.index(2, 5)] = true;
        assert_eq!(available_contexts(&g, b, &dec), Context::Tl2);
        dec[g.index(2, 4)] = true;
        assert_eq!(available_contexts(&g, b, &dec), Context::Tl3);
    }

    /// Enumerates contexts by checking each needed neighbour by hand.
    fn oracle_context_count(rows: usize, row: usize) -> usize {
        let has_top = row > 0;
        let has_bottom = row + 1 < rows;
        let mut n = 2; // L, R
        if has_top {
            n += 1 + 2 + 2;
        }
        if has_bottom {
            n += 1 + 2 + 2;
        }
        n
    }

    #[test]
    fn context_sets() {
        let g = BlockGrid::new(512, 256, 32).unwrap();
        for b in 0..g.len() {
            let (r, _) = g.row_col(b);
            assert_eq!(context_set_for(&g, b, false).len(), oracle_context_count(g.rows, r));
        }
        assert_eq!(context_set_for(&g, g.index(4, 4), false).len(), 12);
        assert_eq!(context_set_for(&g, 3, false).len(), 7);
        let acc = context_set_for(&g, 3, true);
        assert_eq!(acc.len(), 8);
        assert_eq!(*acc.last().unwrap(), Context::Empty);
    }

    #[test]
    fn ids_round_trip() {
        for c in ALL_CONTEXTS {
            assert_eq!(Context::from_id(c.id()), Some(c));
        }
        assert_eq!(Context::Empty.id(), 12);
        assert_eq!(Context::from_id(13), None);
    }

    proptest! {
        #[test]
        fn neighbour_graph_symmetric(rows in 1usize..7, cols in 1usize..9) {
            let g = BlockGrid::new(cols * 8, rows * 8, 8).unwrap();
            for b in 0..g.len() {
                for n in g.neighbors(b) {
                    prop_assert!(g.neighbors(n).contains(&b));
                }
            }
        }

        #[test]
        fn rows_form_single_cycle(rows in 1usize..5, cols in 2usize..12, start in 0usize..12) {
            let g = BlockGrid::new(cols * 8, rows * 8, 8).unwrap();
            for r in 0..rows {
                let s = g.index(r, start % cols);
                let mut b = s;
                let mut steps = 0;
                loop {
                    b = g.neighbor(b, Side::Right).unwrap();
                    steps += 1;
                    if b == s { break; }
                    prop_assert!(steps < cols);
                }
                prop_assert_eq!(steps, cols);
            }
        }

        #[test]
        fn chosen_context_is_realizable(bits in proptest::collection::vec(any::<bool>(), 32), b in 0usize..32) {
            let g = BlockGrid::new(64, 32 * 4 / 2, 16).unwrap();
            let dec: Vec<bool> = bits[..g.len()].to_vec();
            let c = available_contexts(&g, b % g.len(), &dec);
            if c != Context::Empty {
                for n in c.required_blocks(&g, b % g.len()).unwrap() {
                    prop_assert!(dec[n]);
                }
            } else {
                prop_assert!(g.neighbors(b % g.len()).iter().all(|&n| !dec[n] || n == b % g.len()));
            }
        }
    }
}
