//! Interactive sessions: per-request extraction, decoding, rendering and the
//! metrics of each request; and trace-driven simulation built on them.

use crate::baselines::tile_bits;
use crate::blocks::Context;
use crate::encoder::EncodedImage;
use crate::error::{Error, Result};
use crate::geom::{
    displayed_pixels, psnr_from_mse, render_viewport, render_viewport_masked, usefulness, viewport_footprint,
    viewport_mse, BlockMask, ViewportSpec,
};
use crate::image::PlaneImage;
use crate::ordering::{plan_navigation, OrderKind};
use crate::trace::HeadTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockReport {
    pub block: usize,
    pub context: Context,
    pub bits: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RequestReport {
    pub blocks: Vec<BlockReport>,
    /// Bits of this request, order signalling included.
    pub bits: usize,
    pub accumulated_bits: u64,
    /// Displayed pixels over the pixels of every block the view depends on:
    /// the footprint, or all intersecting tiles for a tiled encoding.
    pub usefulness: f64,
    /// Against the viewport rendered from the original; `None` without one.
    pub mse: Option<f64>,
    pub psnr_db: Option<f64>,
    pub viewport: PlaneImage,
}

/// Decoder state of one user: decoded blocks, their reconstructions and the
/// bits received so far. Requests never undo decoded blocks.
#[derive(Clone, Debug)]
pub struct Session<'a> {
    enc: &'a EncodedImage,
    reference: Option<&'a PlaneImage>,
    order: OrderKind,
    decoded: Vec<bool>,
    recon: Vec<Option<Vec<u8>>>,
    canvas: PlaneImage,
    sent_tiles: Vec<bool>,
    tile_bits: Vec<usize>,
    accumulated_bits: u64,
}

impl<'a> Session<'a> {
    /// `reference` is the original image (any channel count) used for
    /// distortion.
    pub fn new(enc: &'a EncodedImage, reference: Option<&'a PlaneImage>, order: OrderKind) -> Result<Self> {
        if let Some(r) = reference {
            if r.width != enc.grid.width() || r.height != enc.grid.height() {
                return Err(Error::DimensionMismatch(format!(
                    "reference {}x{} for a {}x{} encoding",
                    r.width,
                    r.height,
                    enc.grid.width(),
                    enc.grid.height()
                )));
            }
        }
        let tile_bits = if enc.tiles.is_some() { tile_bits(enc)? } else { Vec::new() };
        Ok(Self {
            enc,
            reference,
            order,
            decoded: vec![false; enc.grid.len()],
            recon: vec![None; enc.grid.len()],
            canvas: PlaneImage::filled(enc.grid.width(), enc.grid.height(), 0),
            sent_tiles: vec![false; tile_bits.len()],
            tile_bits,
            accumulated_bits: 0,
        })
    }

    pub fn decoded(&self) -> &[bool] {
        &self.decoded
    }

    pub fn accumulated_bits(&self) -> u64 {
        self.accumulated_bits
    }

    pub fn reconstruction(&self, b: usize) -> Option<&[u8]> {
        self.recon[b].as_deref()
    }

    /// Blocks to decode and their contexts, and the extra signalling bits.
    fn plan(&self, spec: &ViewportSpec) -> Result<(Vec<(usize, Context)>, usize)> {
        let enc = self.enc;
        match &enc.tiles {
            Some(layout) => {
                let mut steps = Vec::new();
                for t in layout.request(&enc.grid, spec)? {
                    if !self.sent_tiles[t] {
                        steps.extend(
                            layout.tiles[t].blocks(&enc.grid).into_iter().map(|b| (b, enc.streams[b].contexts[0])),
                        );
                    }
                }
                Ok((steps, 0))
            }
            None => {
                let rate = |b: usize, c: Context| enc.block_bits(b, c).unwrap_or(usize::MAX / 4);
                let plan = plan_navigation(
                    &enc.grid,
                    &self.decoded,
                    spec,
                    &enc.access,
                    self.order,
                    enc.prefer_horizontal,
                    &rate,
                )?;
                Ok((plan.steps.iter().map(|s| (s.block, s.context)).collect(), plan.signaling_bits))
            }
        }
    }

    /// Serves one viewport request. On error the session is unchanged.
    pub fn request(&mut self, spec: &ViewportSpec) -> Result<RequestReport> {
        spec.validate()?;
        let enc = self.enc;
        let grid = &enc.grid;
        let (steps, signaling) = self.plan(spec)?;
        let mut recon = self.recon.clone();
        let mut blocks = Vec::with_capacity(steps.len());
        let mut bits = signaling;
        for &(b, ctx) in &steps {
            let r = {
                let view = |k: usize| recon[k].as_deref();
                enc.decode_block(b, ctx, &view)?
            };
            recon[b] = Some(r);
            let block_bits = enc.block_bits(b, ctx).ok_or(Error::ContextNotStored { block: b, context: ctx.id() })?;
            bits += block_bits;
            blocks.push(BlockReport { block: b, context: ctx, bits: block_bits });
        }

        // commit
        for br in &blocks {
            self.decoded[br.block] = true;
            let (r, c) = grid.row_col(br.block);
            let bs = grid.block_size;
            let data = recon[br.block].as_ref().unwrap();
            for y in 0..bs {
                let row = (r * bs + y) * self.canvas.width + c * bs;
                self.canvas.data[row..row + bs].copy_from_slice(&data[y * bs..(y + 1) * bs]);
            }
        }
        self.recon = recon;
        let mut needed = vec![false; grid.len()];
        match &enc.tiles {
            Some(layout) => {
                for t in layout.request(grid, spec)? {
                    self.sent_tiles[t] = true;
                    for b in layout.tiles[t].blocks(grid) {
                        needed[b] = true;
                    }
                }
            }
            None => {
                for b in viewport_footprint(spec, grid.width(), grid.height(), grid.block_size)? {
                    needed[b] = true;
                }
            }
        }
        self.accumulated_bits += bits as u64;

        let shown = displayed_pixels(spec, grid.width(), grid.height(), grid.block_size, &needed);
        let count = needed.iter().filter(|&&d| d).count();
        let usefulness = usefulness(shown, count * grid.pixels_per_block())?;
        let viewport = render_viewport_masked(
            &self.canvas,
            spec,
            Some(BlockMask { decoded: &self.decoded, block_size: grid.block_size }),
        );
        let mse = match self.reference {
            Some(r) => Some(viewport_mse(&render_viewport(r, spec), &viewport)?),
            None => None,
        };
        Ok(RequestReport {
            blocks,
            bits,
            accumulated_bits: self.accumulated_bits,
            usefulness,
            mse,
            psnr_db: mse.map(psnr_from_mse),
            viewport,
        })
    }

    /// Bits a tile request would cost, for reporting.
    pub fn tile_bits(&self) -> &[usize] {
        &self.tile_bits
    }
}

/// One row of a simulation log.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct LogRow {
    pub user: String,
    pub request_idx: usize,
    pub bits: usize,
    pub accum_bits: u64,
    pub usefulness: f64,
    pub psnr_db: Option<f64>,
    /// Kept for curve aggregation; not written to logs.
    #[serde(skip)]
    pub mse: Option<f64>,
}

/// Replays every user of `trace` in a fresh session.
pub fn simulate(
    enc: &EncodedImage,
    reference: Option<&PlaneImage>,
    trace: &HeadTrace,
    template: &ViewportSpec,
    order: OrderKind,
) -> Result<Vec<LogRow>> {
    let mut rows = Vec::with_capacity(trace.len());
    for user in &trace.users {
        let mut s = Session::new(enc, reference, order)?;
        for (i, sample) in user.samples.iter().enumerate() {
            let rep = s.request(&template.with_direction(sample.direction))?;
            rows.push(LogRow {
                user: user.user.clone(),
                request_idx: i,
                bits: rep.bits,
                accum_bits: rep.accumulated_bits,
                usefulness: rep.usefulness,
                psnr_db: rep.psnr_db,
                mse: rep.mse,
            });
        }
    }
    Ok(rows)
}

/// Writes `user,request_idx,bits,accum_bits,usefulness,psnr_db`; PSNR is
/// left empty without a reference and written as `inf` when lossless.
pub fn write_log<W: std::io::Write>(rows: &[LogRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["user", "request_idx", "bits", "accum_bits", "usefulness", "psnr_db"]).map_err(csv_err)?;
    for r in rows {
        let u = format!("{:.6}", r.usefulness);
        let p = r.psnr_db.map(|v| if v.is_finite() { format!("{v:.4}") } else { "inf".into() }).unwrap_or_default();
        wtr.write_record([
            r.user.clone(),
            r.request_idx.to_string(),
            r.bits.to_string(),
            r.accum_bits.to_string(),
            u,
            p,
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
