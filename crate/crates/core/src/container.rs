//! The `.oic` container: bit-exact persistence of an encoded image.
//!
//! Layout, integers little-endian:
//!
//! ```text
//! header   magic "OIC1", version, geometry, coding parameters, tiling,
//!          access set, section lengths in bits, CRC-32 of the sections
//! payload  per block: context count and ids, intra modes; per plane: the
//!          rate directory, a checksum (practical mode), the chunk bits
//! transport  theoretical mode only: the source bitplanes
//! ```
//!
//! Sections are bit-packed MSB first and padded to a byte. Storage counts
//! the header and the payload bits; padding and the transport section are
//! not part of it.

use std::path::Path;

use bitvec::prelude::*;

use crate::baselines::{TileLayout, TileTag};
use crate::blocks::{context_set_for, BlockGrid, Context};
use crate::codec::check_qp;
use crate::encoder::{check_block_size, EncodedImage};
use crate::error::{Error, Result};
use crate::incremental::{BlockStream, PlaneStream, RateMode, StreamLayout, CHECKSUM_BITS};
use crate::intra::NUM_MODES;
use crate::placement::{AccessBlockSet, AccessStrategy};

pub const MAGIC: &[u8; 4] = b"OIC1";
pub const VERSION: u16 = 1;

const CONTEXT_BITS: usize = 4;
const INTRA_BITS: usize = 4;
const CRC32: crc::Crc<u32> = crc::Crc::<u32>::new(&crc::CRC_32_ISO_HDLC);

type Bits = BitVec<u8, Msb0>;

/// Where the stored bits go.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StorageBreakdown {
    pub header_bits: usize,
    /// Context lists, intra modes, rate directories and checksums.
    pub side_bits: usize,
    /// Syndrome bits of every plane.
    pub chunk_bits: usize,
    /// Theoretical mode only; not part of storage.
    pub transport_bits: usize,
}

impl StorageBreakdown {
    /// Storage S in bits.
    pub fn total(&self) -> usize {
        self.header_bits + self.side_bits + self.chunk_bits
    }
}

/// Header fields, readable without the payload.
#[derive(Clone, Debug, PartialEq)]
pub struct ContainerInfo {
    pub width: usize,
    pub height: usize,
    pub block_size: usize,
    pub qp: u8,
    pub planes: usize,
    pub mode: RateMode,
    pub layout: StreamLayout,
    pub tiles: Option<TileTag>,
    pub seed: u64,
    pub steps: usize,
    pub access: AccessBlockSet,
    pub prefer_horizontal: bool,
    pub storage: StorageBreakdown,
}

fn cerr(msg: impl Into<String>) -> Error {
    Error::Container(msg.into())
}

fn bits_for(max: usize) -> usize {
    (usize::BITS - max.leading_zeros()) as usize
}

/// Width of one directory entry: a bit length up to the code length.
fn rate_field_bits(n: usize) -> usize {
    bits_for(n)
}

fn layout_tag(l: StreamLayout) -> u8 {
    match l {
        StreamLayout::Nested => 0,
        StreamLayout::Separate => 1,
    }
}

fn index_bits(num_blocks: usize) -> usize {
    bits_for(num_blocks.saturating_sub(1)).max(1)
}

fn header_bytes(enc: &EncodedImage) -> Vec<u8> {
    let g = &enc.grid;
    let mut h = Vec::with_capacity(64);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&VERSION.to_le_bytes());
    h.extend_from_slice(&(g.width() as u32).to_le_bytes());
    h.extend_from_slice(&(g.height() as u32).to_le_bytes());
    h.extend_from_slice(&(g.block_size as u16).to_le_bytes());
    h.push(enc.qp);
    h.push(enc.planes as u8);
    h.push(enc.mode.tag());
    h.push(layout_tag(enc.layout));
    let (kind, cols, rows) = match enc.tiles.as_ref().map(|t| t.tag) {
        None => (0u8, 0u16, 0u16),
        Some(TileTag::Regular { cols, rows }) => (1, cols as u16, rows as u16),
        Some(TileTag::Opt) => (2, 0, 0),
        Some(TileTag::Full) => (3, 0, 0),
    };
    h.push(kind);
    h.extend_from_slice(&cols.to_le_bytes());
    h.extend_from_slice(&rows.to_le_bytes());
    h.extend_from_slice(&enc.seed.to_le_bytes());
    h.extend_from_slice(&(enc.steps as u16).to_le_bytes());
    h.push(match enc.access.strategy {
        AccessStrategy::Fixed => 0,
        AccessStrategy::Content => 1,
    });
    h.push(enc.prefer_horizontal as u8);
    h.extend_from_slice(&(enc.access.len() as u32).to_le_bytes());
    let mut a = Bits::new();
    match enc.access.strategy {
        AccessStrategy::Fixed => {
            let mask = enc.access.mask(g.len());
            a.extend(mask.iter().copied());
        }
        AccessStrategy::Content => {
            let w = index_bits(g.len());
            for &b in &enc.access.blocks {
                push_uint(&mut a, b as u64, w);
            }
        }
    }
    h.extend_from_slice(a.as_raw_slice());
    h
}

/// Fixed-size tail of the header: payload bits, transport bits, CRC.
const TAIL_BYTES: usize = 8 + 8 + 4;

fn push_uint(v: &mut Bits, x: u64, width: usize) {
    for i in (0..width).rev() {
        v.push((x >> i) & 1 == 1);
    }
}

fn side_bits_of(enc: &EncodedImage, s: &BlockStream) -> usize {
    let predicted = s.contexts.iter().filter(|&&c| c != Context::Empty).count();
    let rw = rate_field_bits(s.n);
    let check = if enc.mode == RateMode::Practical { CHECKSUM_BITS } else { 0 };
    CONTEXT_BITS * (1 + s.contexts.len()) + INTRA_BITS * predicted + s.planes.len() * (s.contexts.len() * rw + check)
}

/// Storage of `enc` without serializing it.
pub fn storage(enc: &EncodedImage) -> StorageBreakdown {
    let header_bits = 8 * (header_bytes(enc).len() + TAIL_BYTES);
    let side_bits = enc.streams.iter().map(|s| side_bits_of(enc, s)).sum();
    let chunk_bits = enc.payload_bits();
    let transport_bits = enc.transport.as_ref().map_or(0, |t| t.iter().flatten().map(Vec::len).sum());
    StorageBreakdown { header_bits, side_bits, chunk_bits, transport_bits }
}

fn write_payload(enc: &EncodedImage) -> Result<Bits> {
    let mut v = Bits::new();
    let bps = enc.grid.pixels_per_block() / enc.steps;
    for (b, s) in enc.streams.iter().enumerate() {
        if s.contexts.is_empty() || s.contexts.len() > 13 {
            return Err(cerr(format!("block {b} stores {} contexts", s.contexts.len())));
        }
        push_uint(&mut v, s.contexts.len() as u64, CONTEXT_BITS);
        for &c in &s.contexts {
            push_uint(&mut v, c.id() as u64, CONTEXT_BITS);
        }
        for &c in &s.contexts {
            if c != Context::Empty {
                push_uint(&mut v, enc.intra_modes[b][c.id() as usize] as u64, INTRA_BITS);
            }
        }
        let rw = rate_field_bits(s.n);
        for (p, ps) in s.planes.iter().enumerate() {
            for &r in &ps.rates {
                if enc.mode == RateMode::Practical && r as usize % bps != 0 {
                    return Err(cerr(format!("block {b} plane {p}: rate {r} off the ladder")));
                }
                push_uint(&mut v, r as u64, rw);
            }
            if enc.mode == RateMode::Practical {
                let c = ps.checksum.ok_or_else(|| cerr(format!("block {b} plane {p}: missing checksum")))?;
                push_uint(&mut v, c as u64, CHECKSUM_BITS);
            }
            v.extend(ps.bits.iter().map(|&x| x != 0));
        }
    }
    Ok(v)
}

/// Serializes `enc` into container bytes.
pub fn serialize(enc: &EncodedImage) -> Result<Vec<u8>> {
    let payload = write_payload(enc)?;
    let mut transport = Bits::new();
    if let Some(t) = &enc.transport {
        for planes in t {
            for plane in planes {
                transport.extend(plane.iter().map(|&x| x != 0));
            }
        }
    }
    let mut body = payload.as_raw_slice().to_vec();
    body.extend_from_slice(transport.as_raw_slice());
    let mut out = header_bytes(enc);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&(transport.len() as u64).to_le_bytes());
    out.extend_from_slice(&CRC32.checksum(&body).to_le_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn save(enc: &EncodedImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serialize(enc)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<EncodedImage> {
    parse(&std::fs::read(path)?)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(cerr(format!("truncated {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

struct BitReader<'a> {
    bits: &'a BitSlice<u8, Msb0>,
    pos: usize,
}

impl BitReader<'_> {
    fn uint(&mut self, width: usize, what: &str) -> Result<u64> {
        Ok(self.slice(width, what)?.iter().fold(0u64, |acc, b| (acc << 1) | *b as u64))
    }
    fn slice(&mut self, width: usize, what: &str) -> Result<&BitSlice<u8, Msb0>> {
        if self.bits.len() - self.pos < width {
            return Err(cerr(format!("truncated {what}")));
        }
        let s = &self.bits[self.pos..self.pos + width];
        self.pos += width;
        Ok(s)
    }
}

struct Header {
    info: ContainerInfo,
    payload_bits: usize,
    transport_bits: usize,
    crc: u32,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(cerr("bad magic"));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(cerr(format!("unsupported version {version}")));
    }
    let width = c.u32("width")? as usize;
    let height = c.u32("height")? as usize;
    let block_size = c.u16("block size")? as usize;
    check_block_size(block_size).map_err(|e| cerr(e.to_string()))?;
    let grid = BlockGrid::new(width, height, block_size).map_err(|e| cerr(e.to_string()))?;
    let qp = c.u8("qp")?;
    check_qp(qp).map_err(|e| cerr(e.to_string()))?;
    let planes = c.u8("planes")? as usize;
    if !(2..=16).contains(&planes) {
        return Err(cerr(format!("{planes} planes")));
    }
    let mode = RateMode::from_tag(c.u8("mode")?).ok_or_else(|| cerr("unknown rate mode"))?;
    let layout = match c.u8("layout")? {
        0 => StreamLayout::Nested,
        1 => StreamLayout::Separate,
        t => return Err(cerr(format!("unknown layout {t}"))),
    };
    let kind = c.u8("tiling")?;
    let cols = c.u16("tile columns")? as usize;
    let rows = c.u16("tile rows")? as usize;
    let tiles = match kind {
        0 => None,
        1 => Some(TileTag::Regular { cols, rows }),
        2 => Some(TileTag::Opt),
        3 => Some(TileTag::Full),
        t => return Err(cerr(format!("unknown tiling {t}"))),
    };
    let seed = c.u64("seed")?;
    let steps = c.u16("steps")? as usize;
    let n = grid.pixels_per_block();
    if !steps.is_power_of_two() || n % steps != 0 {
        return Err(cerr(format!("{steps} steps for {n}-bit planes")));
    }
    let strategy = match c.u8("access strategy")? {
        0 => AccessStrategy::Fixed,
        1 => AccessStrategy::Content,
        t => return Err(cerr(format!("unknown access strategy {t}"))),
    };
    let prefer_horizontal = match c.u8("preference")? {
        0 => false,
        1 => true,
        t => return Err(cerr(format!("bad preference flag {t}"))),
    };
    let count = c.u32("access count")? as usize;
    if count > grid.len() {
        return Err(cerr(format!("{count} access blocks for {} blocks", grid.len())));
    }
    let blocks: Vec<usize> = match strategy {
        AccessStrategy::Fixed => {
            let raw = c.take(grid.len().div_ceil(8), "access bitmap")?;
            let bits = raw.view_bits::<Msb0>();
            (0..grid.len()).filter(|&b| bits[b]).collect()
        }
        AccessStrategy::Content => {
            let w = index_bits(grid.len());
            let raw = c.take((count * w).div_ceil(8), "access list")?;
            let mut r = BitReader { bits: raw.view_bits::<Msb0>(), pos: 0 };
            let mut v = Vec::with_capacity(count);
            for _ in 0..count {
                let b = r.uint(w, "access list")? as usize;
                if b >= grid.len() || v.last().is_some_and(|&p| p >= b) {
                    return Err(cerr(format!("bad access block {b}")));
                }
                v.push(b);
            }
            v
        }
    };
    if blocks.len() != count {
        return Err(cerr(format!("access bitmap holds {} blocks, header says {count}", blocks.len())));
    }
    let access = AccessBlockSet::new(blocks, strategy, grid.len());
    let payload_bits = c.u64("payload length")? as usize;
    let transport_bits = c.u64("transport length")? as usize;
    let crc = c.u32("checksum")?;
    // side and chunk bits are only known after the payload is read
    let storage = StorageBreakdown { header_bits: 8 * c.pos, side_bits: 0, chunk_bits: 0, transport_bits };
    let info = ContainerInfo {
        width,
        height,
        block_size,
        qp,
        planes,
        mode,
        layout,
        tiles,
        seed,
        steps,
        access,
        prefer_horizontal,
        storage,
    };
    Ok(Header { info, payload_bits, transport_bits, crc, body_offset: c.pos })
}

/// Reads the header and splits the payload into side and chunk bits.
pub fn info(bytes: &[u8]) -> Result<ContainerInfo> {
    let enc = parse(bytes)?;
    let mut info = parse_header(bytes)?.info;
    info.storage = storage(&enc);
    Ok(info)
}

/// Parses container bytes; any inconsistency is an error.
pub fn parse(bytes: &[u8]) -> Result<EncodedImage> {
    let Header { info, payload_bits, transport_bits, crc, body_offset } = parse_header(bytes)?;
    let body = &bytes[body_offset..];
    let expect = payload_bits.div_ceil(8) + transport_bits.div_ceil(8);
    if body.len() < expect {
        return Err(cerr(format!("truncated payload: {} of {expect} bytes", body.len())));
    }
    if body.len() > expect {
        return Err(cerr(format!("{} trailing bytes", body.len() - expect)));
    }
    if CRC32.checksum(body) != crc {
        return Err(cerr("payload checksum mismatch"));
    }
    let grid = BlockGrid::new(info.width, info.height, info.block_size)?;
    let n = grid.pixels_per_block();
    let bps = n / info.steps;
    let rw = rate_field_bits(n);
    let tiles = info.tiles.map(|t| TileLayout::new(&grid, t)).transpose().map_err(|e| cerr(e.to_string()))?;

    let payload = &body[..payload_bits.div_ceil(8)];
    let mut r = BitReader { bits: &payload.view_bits::<Msb0>()[..payload_bits], pos: 0 };
    let mut streams = Vec::with_capacity(grid.len());
    let mut intra_modes = Vec::with_capacity(grid.len());
    for b in 0..grid.len() {
        let dir = |msg: String| cerr(format!("block {b}: {msg}"));
        let count = r.uint(CONTEXT_BITS, "context count")? as usize;
        if count == 0 {
            return Err(dir("no contexts".into()));
        }
        let mut contexts = Vec::with_capacity(count);
        for _ in 0..count {
            let id = r.uint(CONTEXT_BITS, "context id")? as u8;
            let c = Context::from_id(id).ok_or_else(|| dir(format!("context id {id}")))?;
            if contexts.last().is_some_and(|p: &Context| p.id() >= id) {
                return Err(dir("contexts out of order".into()));
            }
            contexts.push(c);
        }
        let access = contexts.contains(&Context::Empty);
        if access != info.access.contains(b) {
            return Err(dir("EMPTY context disagrees with the access set".into()));
        }
        if tiles.is_none() && contexts != context_set_for(&grid, b, access) {
            return Err(dir("context list does not match the block position".into()));
        }
        let mut modes = [0u8; 12];
        for &c in &contexts {
            if c != Context::Empty {
                let m = r.uint(INTRA_BITS, "intra mode")? as u8;
                if m >= NUM_MODES {
                    return Err(dir(format!("intra mode {m}")));
                }
                modes[c.id() as usize] = m;
            }
        }
        let mut planes = Vec::with_capacity(info.planes);
        for p in 0..info.planes {
            let mut rates = Vec::with_capacity(count);
            for _ in 0..count {
                let rate = r.uint(rw, "rate directory")? as usize;
                if rate > n {
                    return Err(dir(format!("plane {p}: rate {rate} exceeds {n}")));
                }
                if info.mode == RateMode::Practical && rate % bps != 0 {
                    return Err(dir(format!("plane {p}: rate {rate} off the ladder")));
                }
                rates.push(rate as u16);
            }
            let checksum = match info.mode {
                RateMode::Practical => Some(r.uint(CHECKSUM_BITS, "plane checksum")? as u16),
                RateMode::Theoretical => None,
            };
            let len = match info.layout {
                StreamLayout::Nested => rates.iter().copied().max().unwrap() as usize,
                StreamLayout::Separate => rates.iter().map(|&x| x as usize).sum(),
            };
            let bits = r.slice(len, "chunk bits")?.iter().map(|x| *x as u8).collect();
            planes.push(PlaneStream { rates, bits, checksum });
        }
        intra_modes.push(modes);
        streams.push(BlockStream { contexts, access, layout: info.layout, n, planes });
    }
    if r.pos != payload_bits {
        return Err(cerr(format!("{} unread payload bits", payload_bits - r.pos)));
    }

    let transport = match info.mode {
        RateMode::Theoretical => {
            let need = grid.len() * info.planes * n;
            if transport_bits != need {
                return Err(cerr(format!("transport holds {transport_bits} bits, expected {need}")));
            }
            let raw = &body[payload_bits.div_ceil(8)..];
            let bits = &raw.view_bits::<Msb0>()[..need];
            Some(
                (0..grid.len())
                    .map(|b| {
                        (0..info.planes)
                            .map(|p| {
                                let o = (b * info.planes + p) * n;
                                bits[o..o + n].iter().map(|x| *x as u8).collect()
                            })
                            .collect()
                    })
                    .collect(),
            )
        }
        RateMode::Practical => {
            if transport_bits != 0 {
                return Err(cerr("practical container with a transport section"));
            }
            None
        }
    };

    Ok(EncodedImage {
        grid,
        qp: info.qp,
        planes: info.planes,
        mode: info.mode,
        layout: info.layout,
        seed: info.seed,
        steps: info.steps,
        access: info.access,
        prefer_horizontal: info.prefer_horizontal,
        intra_modes,
        streams,
        transport,
        tiles,
    })
}
