//! Block-DCT image codec.
//!
//! Container layout (all multi-byte fields little-endian, 22-byte header):
//!
//! ```text
//! magic         4   b"TDCT"
//! version       u8  1
//! channels      u8
//! height        u16
//! width         u16
//! q             f64
//! payload_bits  u32
//! payload       payload_bits bits, MSB-first
//! ```
//!
//! Each channel plane is edge-padded to multiples of 8, split into 8×8
//! blocks in raster order, and coded as:
//!
//! ```text
//! ue(nonempty_blocks)
//! per nonempty block:
//!   ue(skipped blocks since the previous nonempty block)
//!   se(DC − previous DC)
//!   ue(nonzero AC count)
//!   per nonzero AC in zig-zag order: ue(zero run) se(level)
//! ```
//!
//! A block is empty when its DC equals the previous block's DC and every AC
//! level is zero; skipped blocks decode as exactly that. Pixels map to
//! `255·p − 128` before an orthonormal 2-D DCT-II, and coefficient (u, v)
//! is quantized with step `q·T[u][v]`, T being the JPEG luminance table.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::baseline::bits::{BitReader, Bitstream};
use crate::error::{Error, Result};
use crate::types::ImageTensor;

pub const BLOCK: usize = 8;
pub const MAGIC: &[u8; 4] = b"TDCT";
pub const VERSION: u8 = 1;
pub const HEADER_BITS: usize = 22 * 8;

const LUMA: [f64; 64] = [
    16., 11., 10., 16., 24., 40., 51., 61., //
    12., 12., 14., 19., 26., 58., 60., 55., //
    14., 13., 16., 24., 40., 57., 69., 56., //
    14., 17., 22., 29., 51., 87., 80., 62., //
    18., 22., 37., 56., 68., 109., 103., 77., //
    24., 35., 55., 64., 81., 104., 113., 92., //
    49., 64., 78., 87., 103., 121., 120., 101., //
    72., 92., 95., 98., 112., 100., 103., 99.,
];

const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21,
    28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54,
    47, 55, 62, 63,
];

/// Quantization scale of the codec; larger q means coarser steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecQuality {
    q: f64,
}

impl CodecQuality {
    pub fn new(q: f64) -> Result<Self> {
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::Domain {
                op: "CodecQuality::new",
                value: q,
            });
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn block_size(&self) -> usize {
        BLOCK
    }
}

/// Encoded image with its size accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedImage {
    pub bits: Bitstream,
    pub header_bits: usize,
    pub payload_bits: usize,
    /// Coded bits over 8 bits per source intensity.
    pub ratio: f64,
}

fn basis() -> &'static [[f64; 8]; 8] {
    static B: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    B.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let a = if u == 0 {
                (1.0 / 8.0f64).sqrt()
            } else {
                (2.0 / 8.0f64).sqrt()
            };
            for (x, v) in row.iter_mut().enumerate() {
                *v = a * ((2 * x + 1) as f64 * u as f64 * PI / 16.0).cos();
            }
        }
        b
    })
}

/// Orthonormal 2-D DCT-II of a row-major 8×8 block.
pub fn dct2(block: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| b[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| b[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

pub fn idct2(coef: &[f64; 64]) -> [f64; 64] {
    let b = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| b[u][x] * coef[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| b[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

fn padded(n: usize) -> usize {
    n.div_ceil(BLOCK) * BLOCK
}

fn quantize_plane(plane: &[f64], h: usize, w: usize, q: f64) -> Vec<[i32; 64]> {
    let (ph, pw) = (padded(h), padded(w));
    let mut blocks = Vec::with_capacity(ph * pw / 64);
    for by in (0..ph).step_by(BLOCK) {
        for bx in (0..pw).step_by(BLOCK) {
            let mut blk = [0.0; 64];
            for y in 0..BLOCK {
                for x in 0..BLOCK {
                    let sy = (by + y).min(h - 1);
                    let sx = (bx + x).min(w - 1);
                    blk[y * 8 + x] = 255.0 * plane[sy * w + sx] - 128.0;
                }
            }
            let c = dct2(&blk);
            let mut lv = [0i32; 64];
            for i in 0..64 {
                lv[i] = (c[i] / (q * LUMA[i])).round() as i32;
            }
            blocks.push(lv);
        }
    }
    blocks
}

fn encode_plane(out: &mut Bitstream, blocks: &[[i32; 64]]) {
    let mut prev_dc = 0;
    let mut entries = Vec::new();
    let mut skipped = 0u32;
    for lv in blocks {
        let dc_diff = lv[0] - prev_dc;
        prev_dc = lv[0];
        let ac: Vec<(u32, i32)> = {
            let mut v = Vec::new();
            let mut run = 0u32;
            for &zi in &ZIGZAG[1..] {
                if lv[zi] == 0 {
                    run += 1;
                } else {
                    v.push((run, lv[zi]));
                    run = 0;
                }
            }
            v
        };
        if dc_diff == 0 && ac.is_empty() {
            skipped += 1;
        } else {
            entries.push((skipped, dc_diff, ac));
            skipped = 0;
        }
    }
    out.write_ue(entries.len() as u32);
    for (skip, dc, ac) in entries {
        out.write_ue(skip);
        out.write_se(dc);
        out.write_ue(ac.len() as u32);
        for (run, level) in ac {
            out.write_ue(run);
            out.write_se(level);
        }
    }
}

pub fn dct_encode(x: &ImageTensor, quality: CodecQuality) -> Result<EncodedImage> {
    let (c, h, w) = (x.channels(), x.height(), x.width());
    if c > u8::MAX as usize || h > u16::MAX as usize || w > u16::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "image {c}x{h}x{w} exceeds container limits"
        )));
    }
    let mut payload = Bitstream::new();
    for ch in 0..c {
        let blocks = quantize_plane(x.plane(ch), h, w, quality.q);
        encode_plane(&mut payload, &blocks);
    }
    let payload_bits =
        u32::try_from(payload.len()).map_err(|_| Error::InvalidArgument("payload exceeds 2^32 bits".into()))?;
    let mut bits = Bitstream::new();
    bits.push_bytes(MAGIC);
    bits.push_bytes(&[VERSION, c as u8]);
    bits.push_bytes(&(h as u16).to_le_bytes());
    bits.push_bytes(&(w as u16).to_le_bytes());
    bits.push_bytes(&quality.q.to_le_bytes());
    bits.push_bytes(&payload_bits.to_le_bytes());
    debug_assert_eq!(bits.len(), HEADER_BITS);
    bits.append(&payload);
    let ratio = bits.len() as f64 / (8.0 * x.len() as f64);
    Ok(EncodedImage {
        bits,
        header_bits: HEADER_BITS,
        payload_bits: payload_bits as usize,
        ratio,
    })
}

fn fail(msg: &str) -> Error {
    Error::DecodeFailure(msg.into())
}

pub fn dct_decode(bits: &Bitstream) -> Result<ImageTensor> {
    if bits.len() < HEADER_BITS {
        return Err(fail("stream shorter than header"));
    }
    let mut r = BitReader::new(bits);
    let mut header = [0u8; 22];
    for b in header.iter_mut() {
        *b = r.read_bits(8)? as u8;
    }
    if &header[..4] != MAGIC {
        return Err(fail("bad magic"));
    }
    if header[4] != VERSION {
        return Err(fail("unsupported version"));
    }
    let c = header[5] as usize;
    let h = u16::from_le_bytes([header[6], header[7]]) as usize;
    let w = u16::from_le_bytes([header[8], header[9]]) as usize;
    let q = f64::from_le_bytes(header[10..18].try_into().expect("8 bytes"));
    let payload_bits = u32::from_le_bytes(header[18..22].try_into().expect("4 bytes")) as usize;
    if c == 0 || h == 0 || w == 0 || !(q > 0.0) || !q.is_finite() {
        return Err(fail("invalid header fields"));
    }
    if bits.len() < HEADER_BITS + payload_bits {
        return Err(fail("truncated payload"));
    }
    let (ph, pw) = (padded(h), padded(w));
    let nblocks = ph * pw / 64;
    let mut data = Vec::with_capacity(c * h * w);
    for _ in 0..c {
        let mut levels = vec![[0i32; 64]; nblocks];
        let entries = r.read_ue()? as usize;
        if entries > nblocks {
            return Err(fail("block count exceeds image"));
        }
        let mut idx = 0usize;
        let mut prev_dc = 0i32;
        for _ in 0..entries {
            let skip = r.read_ue()? as usize;
            if idx + skip >= nblocks {
                return Err(fail("block index out of range"));
            }
            for blk in &mut levels[idx..idx + skip] {
                blk[0] = prev_dc;
            }
            idx += skip;
            let dc = prev_dc.checked_add(r.read_se()?).ok_or_else(|| fail("DC overflow"))?;
            levels[idx][0] = dc;
            prev_dc = dc;
            let count = r.read_ue()? as usize;
            if count > 63 {
                return Err(fail("too many AC coefficients"));
            }
            let mut pos = 1usize;
            for _ in 0..count {
                pos += r.read_ue()? as usize;
                if pos > 63 {
                    return Err(fail("AC position out of range"));
                }
                levels[idx][ZIGZAG[pos]] = r.read_se()?;
                pos += 1;
            }
            idx += 1;
        }
        for blk in &mut levels[idx..] {
            blk[0] = prev_dc;
        }
        let mut plane = vec![0.0; ph * pw];
        for (bi, lv) in levels.iter().enumerate() {
            let by = (bi / (pw / BLOCK)) * BLOCK;
            let bx = (bi % (pw / BLOCK)) * BLOCK;
            let mut coef = [0.0; 64];
            for i in 0..64 {
                coef[i] = lv[i] as f64 * q * LUMA[i];
            }
            let px = idct2(&coef);
            for y in 0..BLOCK {
                for x in 0..BLOCK {
                    plane[(by + y) * pw + bx + x] = px[y * 8 + x];
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                data.push(((plane[y * pw + x] + 128.0) / 255.0).clamp(0.0, 1.0));
            }
        }
    }
    if r.position() != HEADER_BITS + payload_bits {
        return Err(fail("payload length mismatch"));
    }
    ImageTensor::new(c, h, w, data)
}
