//! Incremental multi-side-information coding of bitplanes.
//!
//! Each plane is described by a prefix of its accumulated-syndrome
//! transmission. The prefix length needed for a context is that context's
//! rate; all contexts share one stored sequence, so better side information
//! extracts a shorter prefix of the same bits.
//!
//! The EMPTY context of an access block is coded like any other, against the
//! prediction an intra coder makes with no reference at all. Its prefix is
//! what a decoder without decoded neighbours needs; for the worst stored
//! context it amounts to the completion beyond that context's rate.

use serde::{Deserialize, Serialize};

use crate::blocks::Context;
use crate::error::{Error, Result};
use crate::ldpca::{h2, LdpcaCode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    /// Information-theoretic rates; planes travel losslessly beside the stream.
    Theoretical,
    /// Closed-loop rates from trial decoding on the rate ladder.
    Practical,
}

impl RateMode {
    pub fn tag(self) -> u8 {
        match self {
            RateMode::Theoretical => 0,
            RateMode::Practical => 1,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(RateMode::Theoretical),
            1 => Some(RateMode::Practical),
            _ => None,
        }
    }
}

impl std::str::FromStr for RateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theoretical" => Ok(RateMode::Theoretical),
            "practical" => Ok(RateMode::Practical),
            _ => Err(Error::InvalidArgument(format!("unknown mode {s}"))),
        }
    }
}

pub const CHECKSUM_BITS: usize = 16;
pub const MODE_BITS: usize = 4;

const CRC16: crc::Crc<u16> = crc::Crc::<u16>::new(&crc::CRC_16_IBM_3740);

pub fn plane_checksum(plane: &[u8]) -> u16 {
    let mut packed = vec![0u8; plane.len().div_ceil(8)];
    for (i, &b) in plane.iter().enumerate() {
        packed[i / 8] |= (b & 1) << (7 - i % 8);
    }
    CRC16.checksum(&packed)
}

/// Hamming distance over length, clamped to [1/(2n), 0.5].
pub fn estimate_crossover(x: &[u8], y: &[u8]) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::DimensionMismatch(format!("planes of {} and {} bits", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let d = x.iter().zip(y).filter(|(a, b)| a != b).count() as f64;
    Ok((d / n).clamp(0.5 / n, 0.5))
}

/// ceil(n * H2(p)).
pub fn theoretical_rate(p: f64, n: usize) -> usize {
    let r = (n as f64 * h2(p)).ceil() as usize;
    r.min(n)
}

/// Bits needed to describe `x` given side information `y`.
pub fn required_rate(code: &LdpcaCode, x: &[u8], y: &[u8], mode: RateMode) -> Result<usize> {
    let theo = theoretical_rate(estimate_crossover(x, y)?, code.n);
    match mode {
        RateMode::Theoretical => Ok(theo),
        RateMode::Practical => {
            let tx = code.transmission(x);
            Ok(practical_rate(code, x, y, theo, &tx))
        }
    }
}

fn practical_rate(code: &LdpcaCode, x: &[u8], y: &[u8], theo: usize, tx: &[u8]) -> usize {
    code.min_decodable_rung(x, y, code.rung_for_bits(theo), tx) * code.bits_per_step()
}

/// How chunk bits are laid out for the stored contexts of a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamLayout {
    /// One shared sequence; each context reads a prefix.
    Nested,
    /// One independent prefix per context, concatenated in canonical order.
    Separate,
}

/// One bitplane's stored description.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlaneStream {
    /// Rate of each stored context, aligned with `BlockStream::contexts`.
    pub rates: Vec<u16>,
    /// Stored bits (0/1), see [`StreamLayout`].
    pub bits: Vec<u8>,
    /// Checksum of the plane (practical mode only).
    pub checksum: Option<u16>,
}

/// A contiguous run of stored bits owned by one context.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub context: Context,
    pub start: usize,
    pub end: usize,
}

/// The stored description of one block: per plane, the rates of every
/// stored context and the bits they share.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockStream {
    /// Stored contexts in canonical order; EMPTY (access blocks) last.
    pub contexts: Vec<Context>,
    pub access: bool,
    pub layout: StreamLayout,
    pub n: usize,
    pub planes: Vec<PlaneStream>,
}

/// Prefixes handed to the decoder for one context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Extraction {
    pub context: Context,
    pub planes: Vec<Vec<u8>>,
    pub checksums: Vec<Option<u16>>,
}

impl Extraction {
    pub fn bits(&self) -> usize {
        self.planes.iter().map(Vec::len).sum()
    }
}

impl BlockStream {
    fn position(&self, ctx: Context) -> Option<usize> {
        self.contexts.iter().position(|&c| c == ctx)
    }

    pub fn has_context(&self, ctx: Context) -> bool {
        self.position(ctx).is_some()
    }

    /// Bits of `plane` needed for `ctx`.
    pub fn rate(&self, plane: usize, ctx: Context) -> Option<usize> {
        self.position(ctx).map(|i| self.planes[plane].rates[i] as usize)
    }

    /// Sum of per-plane rates for `ctx`.
    pub fn total_rate(&self, ctx: Context) -> Option<usize> {
        (0..self.planes.len()).map(|p| self.rate(p, ctx)).sum()
    }

    /// Contexts of one plane sorted best to worst (rate, then id).
    pub fn order(&self, plane: usize) -> Vec<(Context, usize)> {
        let mut v: Vec<(Context, usize)> =
            self.contexts.iter().zip(&self.planes[plane].rates).map(|(&c, &r)| (c, r as usize)).collect();
        v.sort_by_key(|&(c, r)| (r, c.id()));
        v
    }

    /// Chunk list of a plane: rank order for the nested layout, where chunk
    /// `i` holds the bits between the rates of ranks `i - 1` and `i`;
    /// canonical order for the separate layout.
    pub fn chunks(&self, plane: usize) -> Vec<Chunk> {
        let mut out = Vec::new();
        match self.layout {
            StreamLayout::Nested => {
                let mut prev = 0;
                for (c, r) in self.order(plane) {
                    out.push(Chunk { context: c, start: prev, end: r });
                    prev = r;
                }
            }
            StreamLayout::Separate => {
                let mut off = 0;
                for (&c, &r) in self.contexts.iter().zip(&self.planes[plane].rates) {
                    out.push(Chunk { context: c, start: off, end: off + r as usize });
                    off += r as usize;
                }
            }
        }
        out
    }

    /// Stored chunk bits of a plane: the largest rate (nested) or the sum of
    /// rates (separate).
    pub fn stored_plane_bits(&self, plane: usize) -> usize {
        self.planes[plane].bits.len()
    }

    pub fn stored_bits(&self) -> usize {
        (0..self.planes.len()).map(|p| self.stored_plane_bits(p)).sum()
    }

    /// Bits read from storage for `ctx`.
    pub fn extract(&self, block: usize, ctx: Context) -> Result<Extraction> {
        if !self.has_context(ctx) {
            return Err(Error::ContextNotStored { block, context: ctx.id() });
        }
        let planes = (0..self.planes.len())
            .map(|p| {
                let bits = &self.planes[p].bits;
                match self.layout {
                    StreamLayout::Nested => bits[..self.rate(p, ctx).unwrap()].to_vec(),
                    StreamLayout::Separate => {
                        let ch = self.chunks(p).into_iter().find(|c| c.context == ctx).unwrap();
                        bits[ch.start..ch.end].to_vec()
                    }
                }
            })
            .collect();
        let checksums = self.planes.iter().map(|p| p.checksum).collect();
        Ok(Extraction { context: ctx, planes, checksums })
    }
}

/// Encodes the bitplanes of one block against the predictions of each stored
/// context. `si[i]` holds the prediction planes for `contexts[i]`; a block
/// storing EMPTY is an access block.
pub fn encode_block(
    code: &LdpcaCode,
    x_planes: &[Vec<u8>],
    contexts: &[Context],
    si: &[Vec<Vec<u8>>],
    mode: RateMode,
    layout: StreamLayout,
) -> Result<BlockStream> {
    if contexts.is_empty() {
        return Err(Error::InvalidArgument("block has no context to be decoded with".into()));
    }
    if contexts.len() != si.len() {
        return Err(Error::InvalidArgument("side information does not match contexts".into()));
    }
    for (i, c) in contexts.iter().enumerate() {
        if contexts[..i].contains(c) {
            return Err(Error::InvalidArgument(format!("context {c} listed twice")));
        }
    }
    let is_access = contexts.contains(&Context::Empty);
    let n = code.n;
    let mut planes = Vec::with_capacity(x_planes.len());
    for (p, x) in x_planes.iter().enumerate() {
        if x.len() != n {
            return Err(Error::DimensionMismatch(format!("plane of {} bits for code length {n}", x.len())));
        }
        let tx = code.transmission(x);
        let mut rates = Vec::with_capacity(contexts.len());
        for planes_for_ctx in si {
            let y = &planes_for_ctx[p];
            let theo = theoretical_rate(estimate_crossover(x, y)?, n);
            let r = match mode {
                RateMode::Theoretical => theo,
                RateMode::Practical => practical_rate(code, x, y, theo, &tx),
            };
            rates.push(r as u16);
        }
        let bits = match layout {
            StreamLayout::Nested => tx[..rates.iter().copied().max().unwrap_or(0) as usize].to_vec(),
            StreamLayout::Separate => {
                let mut b = Vec::new();
                for &r in &rates {
                    b.extend_from_slice(&tx[..r as usize]);
                }
                b
            }
        };
        let checksum = (mode == RateMode::Practical).then(|| plane_checksum(x));
        planes.push(PlaneStream { rates, bits, checksum });
    }
    Ok(BlockStream { contexts: contexts.to_vec(), access: is_access, layout, n, planes })
}

/// Recovers the bitplanes of a block from an extraction.
///
/// Practical mode runs belief propagation against `si` (a full-length
/// transmission is solved directly) and verifies checksums. Theoretical mode
/// returns the transported planes.
pub fn decode_block(
    code: &LdpcaCode,
    block: usize,
    ex: &Extraction,
    si: Option<&[Vec<u8>]>,
    mode: RateMode,
    transport: Option<&[Vec<u8>]>,
) -> Result<Vec<Vec<u8>>> {
    match mode {
        RateMode::Theoretical => transport.map(|t| t.to_vec()).ok_or_else(|| Error::DecodingFailure {
            block,
            plane: 0,
            reason: "theoretical mode needs the transported planes".into(),
        }),
        RateMode::Practical => {
            let step = code.bits_per_step();
            let mut out = Vec::with_capacity(ex.planes.len());
            for (p, prefix) in ex.planes.iter().enumerate() {
                let fail = |reason: String| Error::DecodingFailure { block, plane: p, reason };
                if prefix.len() % step != 0 || prefix.is_empty() || prefix.len() > code.n {
                    return Err(fail(format!("prefix of {} bits is not on the ladder", prefix.len())));
                }
                let k = prefix.len() / step;
                let plane = if k == code.steps {
                    code.solve(prefix)
                } else {
                    let y = si.and_then(|s| s.get(p)).ok_or_else(|| fail("missing side information".into()))?;
                    code.decode(k, prefix, y, crate::ldpca::decoder_crossover(code, k))
                        .ok_or_else(|| fail("belief propagation did not converge".into()))?
                };
                if let Some(Some(sum)) = ex.checksums.get(p) {
                    if plane_checksum(&plane) != *sum {
                        return Err(fail("checksum mismatch".into()));
                    }
                }
                out.push(plane);
            }
            Ok(out)
        }
    }
}

/// Bits sent for a block decoded with `ctx`: chunk prefixes, the intra mode
/// id for predicted contexts, and plane checksums in practical mode.
pub fn transmitted_bits(bs: &BlockStream, ctx: Context, mode: RateMode) -> Option<usize> {
    let payload = bs.total_rate(ctx)?;
    let mode_bits = if ctx == Context::Empty { 0 } else { MODE_BITS };
    let check = if mode == RateMode::Practical { CHECKSUM_BITS * bs.planes.len() } else { 0 };
    Some(payload + mode_bits + check)
}
