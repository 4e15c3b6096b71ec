//! Tile-based coders and the exhaustive-storage coder, built on the same
//! block machinery as the incremental coder so that comparisons isolate the
//! access scheme.

use std::fmt;

use crate::blocks::{BlockGrid, Context};
use crate::encoder::{encode_analysis, EncodedImage, EncoderConfig, SourceAnalysis};
use crate::error::{invalid, Error, Result};
use crate::geom::{viewport_footprint, ViewportSpec};
use crate::incremental::{encode_block, RateMode, StreamLayout};
use crate::ldpca::{LdpcaCode, DEFAULT_STEPS};
use crate::placement::{AccessBlockSet, AccessStrategy};

/// Rectangle of blocks, half-open on both axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TileRect {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

impl TileRect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.row0..self.row1).contains(&row) && (self.col0..self.col1).contains(&col)
    }

    /// Blocks in raster order.
    pub fn blocks(&self, grid: &BlockGrid) -> Vec<usize> {
        (self.row0..self.row1).flat_map(|r| (self.col0..self.col1).map(move |c| grid.index(r, c))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TileTag {
    /// `cols` x `rows` tiles of (near) equal size.
    Regular { cols: usize, rows: usize },
    /// Top quarter and bottom quarter one tile each, middle half in four
    /// columns.
    Opt,
    /// The whole image as one tile.
    Full,
}

impl fmt::Display for TileTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TileTag::Regular { cols, rows } => write!(f, "t{cols}x{rows}"),
            TileTag::Opt => f.write_str("topt"),
            TileTag::Full => f.write_str("t1x1"),
        }
    }
}

impl std::str::FromStr for TileTag {
    type Err = Error;
    /// `topt`, or `tNxM` with N tile columns and M tile rows (`t1x1` is the
    /// full image).
    fn from_str(s: &str) -> Result<Self> {
        if s == "topt" {
            return Ok(TileTag::Opt);
        }
        let body = s.strip_prefix('t').ok_or_else(|| invalid(format!("unknown tiling {s}")))?;
        let (a, b) = body.split_once('x').ok_or_else(|| invalid(format!("unknown tiling {s}")))?;
        let cols: usize = a.parse().map_err(|_| invalid(format!("bad tile count in {s}")))?;
        let rows: usize = b.parse().map_err(|_| invalid(format!("bad tile count in {s}")))?;
        if cols == 0 || rows == 0 {
            return Err(invalid(format!("tile counts must be positive in {s}")));
        }
        Ok(if cols == 1 && rows == 1 { TileTag::Full } else { TileTag::Regular { cols, rows } })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileLayout {
    pub tag: TileTag,
    pub tiles: Vec<TileRect>,
}

fn splits(len: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| i * len / parts).collect()
}

impl TileLayout {
    pub fn new(grid: &BlockGrid, tag: TileTag) -> Result<Self> {
        let tiles = match tag {
            TileTag::Full => vec![TileRect { row0: 0, row1: grid.rows, col0: 0, col1: grid.cols }],
            TileTag::Regular { cols, rows } => {
                if cols > grid.cols || rows > grid.rows {
                    return Err(invalid(format!("{tag} is finer than the {}x{} block grid", grid.cols, grid.rows)));
                }
                let (rs, cs) = (splits(grid.rows, rows), splits(grid.cols, cols));
                let mut t = Vec::with_capacity(rows * cols);
                for i in 0..rows {
                    for j in 0..cols {
                        t.push(TileRect { row0: rs[i], row1: rs[i + 1], col0: cs[j], col1: cs[j + 1] });
                    }
                }
                t
            }
            TileTag::Opt => {
                let q = grid.rows / 4;
                if q == 0 || grid.cols < 4 {
                    return Err(invalid("opt tiling needs at least 4 block rows and 4 block columns"));
                }
                let cs = splits(grid.cols, 4);
                let mut t = vec![TileRect { row0: 0, row1: q, col0: 0, col1: grid.cols }];
                for j in 0..4 {
                    t.push(TileRect { row0: q, row1: grid.rows - q, col0: cs[j], col1: cs[j + 1] });
                }
                t.push(TileRect { row0: grid.rows - q, row1: grid.rows, col0: 0, col1: grid.cols });
                t
            }
        };
        Ok(Self { tag, tiles })
    }

    pub fn tile_of(&self, grid: &BlockGrid, b: usize) -> usize {
        let (r, c) = grid.row_col(b);
        self.tiles.iter().position(|t| t.contains(r, c)).expect("layouts partition the grid")
    }

    /// Context of block `b` in its tile's raster scan: EMPTY for the first
    /// block, left neighbour along the first row, top neighbour down the first
    /// column, and top-left corner otherwise.
    pub fn raster_context(&self, grid: &BlockGrid, b: usize) -> Context {
        let t = &self.tiles[self.tile_of(grid, b)];
        let (r, c) = grid.row_col(b);
        match (r == t.row0, c == t.col0) {
            (true, true) => Context::Empty,
            (true, false) => Context::L,
            (false, true) => Context::T,
            (false, false) => Context::Tl3,
        }
    }

    /// Tiles intersecting the footprint of `spec`.
    pub fn request(&self, grid: &BlockGrid, spec: &ViewportSpec) -> Result<Vec<usize>> {
        let fp = viewport_footprint(spec, grid.width(), grid.height(), grid.block_size)?;
        let mut t: Vec<usize> = fp.iter().map(|&b| self.tile_of(grid, b)).collect();
        t.sort_unstable();
        t.dedup();
        Ok(t)
    }
}

/// Codes every tile independently in raster order, one context per block.
pub fn tile_encode(src: &SourceAnalysis, tag: TileTag, mode: RateMode, seed: u64) -> Result<EncodedImage> {
    let grid = src.grid;
    let layout = TileLayout::new(&grid, tag)?;
    let code = LdpcaCode::shared(grid.pixels_per_block(), DEFAULT_STEPS, seed);
    let firsts: Vec<usize> = layout.tiles.iter().map(|t| grid.index(t.row0, t.col0)).collect();
    let mut intra_modes = Vec::with_capacity(grid.len());
    let mut streams = Vec::with_capacity(grid.len());
    for b in 0..grid.len() {
        let ctx = layout.raster_context(&grid, b);
        let (m, si) = src.predict_planes(b, ctx)?;
        let mut modes = [0u8; 12];
        if ctx != Context::Empty {
            modes[ctx.id() as usize] = m;
        }
        intra_modes.push(modes);
        streams.push(encode_block(&code, &src.x_planes[b], &[ctx], &[si], mode, StreamLayout::Nested)?);
    }
    Ok(EncodedImage {
        grid,
        qp: src.qp,
        planes: src.planes,
        mode,
        layout: StreamLayout::Nested,
        seed,
        steps: DEFAULT_STEPS,
        access: AccessBlockSet::new(firsts, AccessStrategy::Fixed, grid.len()),
        prefer_horizontal: true,
        intra_modes,
        streams,
        transport: (mode == RateMode::Theoretical).then(|| src.x_planes.clone()),
        tiles: Some(layout),
    })
}

/// Bits sent for each tile: the sum over its blocks of their single stream.
pub fn tile_bits(enc: &EncodedImage) -> Result<Vec<usize>> {
    let layout = enc.tiles.as_ref().ok_or_else(|| invalid("not a tiled encoding"))?;
    Ok(layout
        .tiles
        .iter()
        .map(|t| t.blocks(&enc.grid).iter().map(|&b| enc.block_bits(b, enc.streams[b].contexts[0]).unwrap()).sum())
        .collect())
}

/// Exhaustive storage: one independent description per (block, context), so
/// any request is served at the matched rate but storage adds up.
pub fn es_encode(src: &SourceAnalysis, cfg: &EncoderConfig) -> Result<EncodedImage> {
    let mut c = cfg.clone();
    c.layout = StreamLayout::Separate;
    encode_analysis(src, &c)
}
