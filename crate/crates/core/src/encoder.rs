//! Whole-image encoding and per-block decoding.
//!
//! Every block is transformed and quantized once. For each context its
//! intra prediction goes through the same transform and quantizer, and the
//! bitplanes of the source are coded against the bitplanes of each
//! prediction. Reconstructions depend on the quantized levels only, so they
//! are identical whatever context a block is decoded with.

use std::sync::Arc;

use crate::baselines::TileLayout;
use crate::blocks::{context_set_for, BlockGrid, Context, DEFAULT_BLOCK_SIZE};
use crate::codec::{bitplane_join, bitplane_split, check_qp, encode_pixels, plane_count, reconstruct, QuantizedBlock};
use crate::error::{Error, Result};
use crate::geom::{Direction, ViewportSpec};
use crate::image::PlaneImage;
use crate::incremental::{
    decode_block, encode_block, estimate_crossover, theoretical_rate, transmitted_bits, BlockStream, RateMode,
    StreamLayout,
};
use crate::intra::{best_mode, predict};
use crate::ldpca::{LdpcaCode, DEFAULT_SEED, DEFAULT_STEPS};
use crate::placement::{place_content, place_fixed, AccessBlockSet, AccessStrategy, Sweep};

#[derive(Clone, Debug)]
pub struct EncoderConfig {
    pub block_size: usize,
    pub qp: u8,
    pub mode: RateMode,
    pub layout: StreamLayout,
    pub access: AccessStrategy,
    /// Viewport shape used for access-block placement.
    pub template: ViewportSpec,
    /// Placement sweep; defaults to a quarter of the field of view.
    pub sweep: Option<Sweep>,
    pub seed: u64,
    pub prefer_horizontal: bool,
}

impl EncoderConfig {
    pub fn new(qp: u8, mode: RateMode) -> Self {
        Self {
            block_size: DEFAULT_BLOCK_SIZE,
            qp,
            mode,
            layout: StreamLayout::Nested,
            access: AccessStrategy::Fixed,
            template: ViewportSpec::default_at(Direction::new(0.0, 0.0)),
            sweep: None,
            seed: DEFAULT_SEED,
            prefer_horizontal: true,
        }
    }
}

/// Everything the server stores for one image at one qp.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedImage {
    pub grid: BlockGrid,
    pub qp: u8,
    pub planes: usize,
    pub mode: RateMode,
    pub layout: StreamLayout,
    pub seed: u64,
    pub steps: usize,
    pub access: AccessBlockSet,
    pub prefer_horizontal: bool,
    /// Intra mode per block and context id (0..12); unused entries are 0.
    pub intra_modes: Vec<[u8; 12]>,
    pub streams: Vec<BlockStream>,
    /// Source bitplanes per block, carried beside the stream in theoretical
    /// mode where rates are only accounted.
    pub transport: Option<Vec<Vec<Vec<u8>>>>,
    /// Tile structure for tiled baselines; `None` for the incremental coder.
    pub tiles: Option<TileLayout>,
}

impl EncodedImage {
    pub fn code(&self) -> Arc<LdpcaCode> {
        LdpcaCode::shared(self.grid.pixels_per_block(), self.steps, self.seed)
    }

    /// Sum of the stored chunk bits of every block.
    pub fn payload_bits(&self) -> usize {
        self.streams.iter().map(BlockStream::stored_bits).sum()
    }

    /// Bits sent when block `b` is decoded with `ctx`.
    pub fn block_bits(&self, b: usize, ctx: Context) -> Option<usize> {
        transmitted_bits(&self.streams[b], ctx, self.mode)
    }

    pub fn intra_mode(&self, b: usize, ctx: Context) -> u8 {
        if ctx == Context::Empty {
            0
        } else {
            self.intra_modes[b][ctx.id() as usize]
        }
    }

    /// Reconstruction of block `b` from its decoded bitplanes.
    pub fn reconstruct_planes(&self, planes: &[Vec<u8>]) -> Vec<u8> {
        reconstruct(&QuantizedBlock { levels: bitplane_join(planes), qp: self.qp })
    }

    /// Decodes block `b` with `ctx`; `recon` gives the reconstructions of
    /// decoded blocks.
    pub fn decode_block<'a>(
        &self,
        b: usize,
        ctx: Context,
        recon: &dyn Fn(usize) -> Option<&'a [u8]>,
    ) -> Result<Vec<u8>> {
        let stream = &self.streams[b];
        let ex = stream.extract(b, ctx)?;
        let code = self.code();
        let si = match self.mode {
            RateMode::Practical => {
                Some(side_information(&self.grid, b, ctx, self.intra_mode(b, ctx), recon, self.qp, self.planes)?)
            }
            RateMode::Theoretical => None,
        };
        let transport = self.transport.as_ref().map(|t| t[b].as_slice());
        let planes = decode_block(&code, b, &ex, si.as_deref(), self.mode, transport)?;
        Ok(self.reconstruct_planes(&planes))
    }
}

/// Block sides the predictor and the rate ladder support: powers of two
/// from 8 to 64.
pub fn check_block_size(bs: usize) -> Result<()> {
    if !(8..=64).contains(&bs) || !bs.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("block size {bs} is not a power of two in 8..=64")));
    }
    Ok(())
}

/// Bitplanes of the prediction of block `b` for `ctx` with intra `mode`.
/// EMPTY predicts the mid-level constant an intra coder uses when no
/// reference sample exists.
pub fn side_information<'a>(
    grid: &BlockGrid,
    b: usize,
    ctx: Context,
    mode: u8,
    recon: &dyn Fn(usize) -> Option<&'a [u8]>,
    qp: u8,
    planes: usize,
) -> Result<Vec<Vec<u8>>> {
    let pred = if ctx == Context::Empty {
        vec![NO_REFERENCE_LEVEL; grid.pixels_per_block()]
    } else {
        predict(grid, b, ctx, mode, recon)?
    };
    Ok(bitplane_split(&encode_pixels(&pred, qp)?.levels, planes))
}

/// Sample value predicted when no neighbour is available.
pub const NO_REFERENCE_LEVEL: u8 = 128;

/// Quantized source of an image: what every coder in this crate shares.
#[derive(Clone, Debug)]
pub struct SourceAnalysis {
    pub grid: BlockGrid,
    pub qp: u8,
    pub planes: usize,
    pub originals: Vec<Vec<u8>>,
    pub levels: Vec<Vec<i32>>,
    pub recon: Vec<Vec<u8>>,
    pub x_planes: Vec<Vec<Vec<u8>>>,
}

impl SourceAnalysis {
    pub fn new(img: &PlaneImage, block_size: usize, qp: u8) -> Result<Self> {
        check_qp(qp)?;
        check_block_size(block_size)?;
        let luma = img.to_luma();
        let grid = BlockGrid::new(luma.width, luma.height, block_size)?;
        let originals = grid.partition(&luma)?;
        let quantized: Vec<QuantizedBlock> = originals.iter().map(|o| encode_pixels(o, qp)).collect::<Result<_>>()?;
        let max = quantized.iter().flat_map(|q| q.levels.iter()).map(|l| l.unsigned_abs()).max().unwrap_or(0);
        let planes = plane_count(max);
        let recon = quantized.iter().map(reconstruct).collect();
        let x_planes = quantized.iter().map(|q| bitplane_split(&q.levels, planes)).collect();
        let levels = quantized.into_iter().map(|q| q.levels).collect();
        Ok(Self { grid, qp, planes, originals, levels, recon, x_planes })
    }

    /// Reconstructed image.
    pub fn reconstruction(&self) -> PlaneImage {
        let blocks: Vec<Option<Vec<u8>>> = self.recon.iter().cloned().map(Some).collect();
        self.grid.reassemble(&blocks, 0)
    }

    /// Best intra mode and prediction bitplanes of block `b` for `ctx`.
    pub fn predict_planes(&self, b: usize, ctx: Context) -> Result<(u8, Vec<Vec<u8>>)> {
        let recon = |k: usize| Some(self.recon[k].as_slice());
        if ctx == Context::Empty {
            return Ok((0, side_information(&self.grid, b, ctx, 0, &recon, self.qp, self.planes)?));
        }
        let (mode, pred) = best_mode(&self.grid, b, ctx, &self.originals[b], &recon)?;
        Ok((mode, bitplane_split(&encode_pixels(&pred, self.qp)?.levels, self.planes)))
    }

    /// Theoretical cost of each block coded without side information.
    pub fn independent_costs(&self) -> Result<Vec<f64>> {
        let code_n = self.grid.pixels_per_block();
        (0..self.grid.len())
            .map(|b| {
                let (_, si) = self.predict_planes(b, Context::Empty)?;
                let mut bits = 0;
                for (x, y) in self.x_planes[b].iter().zip(&si) {
                    bits += theoretical_rate(estimate_crossover(x, y)?, code_n);
                }
                Ok(bits as f64)
            })
            .collect()
    }
}

/// Encodes an image once for every admissible context of every block.
pub fn encode_image(img: &PlaneImage, cfg: &EncoderConfig) -> Result<EncodedImage> {
    let src = SourceAnalysis::new(img, cfg.block_size, cfg.qp)?;
    encode_analysis(&src, cfg)
}

pub fn encode_analysis(src: &SourceAnalysis, cfg: &EncoderConfig) -> Result<EncodedImage> {
    let grid = src.grid;
    if src.qp != cfg.qp {
        return Err(Error::InvalidArgument(format!("analysis at qp {} for config qp {}", src.qp, cfg.qp)));
    }
    let sweep = cfg.sweep.unwrap_or_else(|| Sweep::for_template(&cfg.template));
    let access = match cfg.access {
        AccessStrategy::Fixed => place_fixed(&grid, &cfg.template, sweep)?,
        AccessStrategy::Content => place_content(&grid, &cfg.template, &src.independent_costs()?, sweep)?,
    };
    let n = grid.pixels_per_block();
    let code = LdpcaCode::shared(n, DEFAULT_STEPS, cfg.seed);
    let mut intra_modes = Vec::with_capacity(grid.len());
    let mut streams = Vec::with_capacity(grid.len());
    for b in 0..grid.len() {
        let contexts = context_set_for(&grid, b, access.contains(b));
        let mut modes = [0u8; 12];
        let mut si = Vec::with_capacity(contexts.len());
        for &ctx in &contexts {
            let (m, planes) = src.predict_planes(b, ctx)?;
            if ctx != Context::Empty {
                modes[ctx.id() as usize] = m;
            }
            si.push(planes);
        }
        streams.push(encode_block(&code, &src.x_planes[b], &contexts, &si, cfg.mode, cfg.layout)?);
        intra_modes.push(modes);
    }
    let transport = (cfg.mode == RateMode::Theoretical).then(|| src.x_planes.clone());
    Ok(EncodedImage {
        grid,
        qp: cfg.qp,
        planes: src.planes,
        mode: cfg.mode,
        layout: cfg.layout,
        seed: cfg.seed,
        steps: DEFAULT_STEPS,
        access,
        prefer_horizontal: cfg.prefer_horizontal,
        intra_modes,
        streams,
        transport,
        tiles: None,
    })
}
