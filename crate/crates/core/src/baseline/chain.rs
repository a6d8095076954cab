//! End-to-end digital chain and coded BER measurement.
//!
//! dct_encode → zero-pad to whole LDPC blocks → seeded interleave →
//! ldpc_encode per block → QAM → √P scaling → channel → LLR demap →
//! BP decode → deinterleave → dct_decode. A block that fails to converge,
//! or a stream that fails to parse, replaces the whole image with constant
//! 0.5 gray.

use num_complex::Complex64;

use crate::baseline::bits::Bitstream;
use crate::baseline::dct::{dct_decode, dct_encode, CodecQuality};
use crate::baseline::ldpc::{ldpc_decode_bp, ldpc_encode, LdpcCode};
use crate::baseline::qam::{
    qam_demodulate_llr, qam_demodulate_llr_varying, qam_modulate_bits, Demapper, QamConstellation,
};
use crate::channel::{draw_noise, transmit_awgn, transmit_rayleigh};
use crate::error::{Error, Result};
use crate::rng::{stream_key, StreamRng};
use crate::types::{ChannelConfig, ChannelKind, ImageTensor, SymbolFrame};

pub const DEFAULT_BP_ITERS: usize = 50;
pub const FAILURE_GRAY: f64 = 0.5;

/// Seeded permutation of `len` positions.
pub fn interleaver(len: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    StreamRng::new(seed, stream_key(&[0x1E, len as u64])).shuffle(&mut p);
    p
}

/// out[i] = bits[perm[i]].
pub fn interleave(bits: &[u8], perm: &[usize]) -> Vec<u8> {
    perm.iter().map(|&p| bits[p]).collect()
}

pub fn deinterleave(bits: &[u8], perm: &[usize]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len()];
    for (i, &p) in perm.iter().enumerate() {
        out[p] = bits[i];
    }
    out
}

/// Everything the chain needs besides the image and channel.
#[derive(Debug, Clone)]
pub struct DigitalChain<'a> {
    pub quality: CodecQuality,
    pub code: &'a LdpcCode,
    pub constellation: &'a QamConstellation,
    pub max_iters: usize,
    pub interleaver_seed: u64,
    pub demapper: Demapper,
}

impl<'a> DigitalChain<'a> {
    pub fn new(quality: CodecQuality, code: &'a LdpcCode, constellation: &'a QamConstellation) -> Self {
        Self {
            quality,
            code,
            constellation,
            max_iters: DEFAULT_BP_ITERS,
            interleaver_seed: 0,
            demapper: Demapper::FullSum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainDiagnostics {
    pub source_bits: usize,
    pub blocks: usize,
    pub coded_bits: usize,
    pub failed_blocks: usize,
    pub bp_iterations: usize,
    /// Parse error from the source decoder, if any.
    pub stream_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutcome {
    pub image: ImageTensor,
    pub failed: bool,
    /// Emitted QAM symbols.
    pub channel_uses: usize,
    /// channel_uses / l.
    pub ratio: f64,
    pub diagnostics: ChainDiagnostics,
}

/// Source and channel accounting without transmitting anything.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainBudget {
    pub source_bits: usize,
    pub blocks: usize,
    pub coded_bits: usize,
    pub channel_uses: usize,
    pub ratio: f64,
}

pub fn chain_budget(x: &ImageTensor, chain: &DigitalChain) -> Result<ChainBudget> {
    let enc = dct_encode(x, chain.quality)?;
    Ok(budget_for(enc.bits.len(), x.len(), chain))
}

fn budget_for(source_bits: usize, l: usize, chain: &DigitalChain) -> ChainBudget {
    let blocks = source_bits.div_ceil(chain.code.k_info()).max(1);
    let coded_bits = blocks * chain.code.n();
    let channel_uses = coded_bits.div_ceil(chain.constellation.bits_per_symbol());
    ChainBudget {
        source_bits,
        blocks,
        coded_bits,
        channel_uses,
        ratio: channel_uses as f64 / l as f64,
    }
}

pub fn run_digital_chain(x: &ImageTensor, chain: &DigitalChain, channel: &ChannelConfig) -> Result<ChainOutcome> {
    let code = chain.code;
    let enc = dct_encode(x, chain.quality)?;
    let budget = budget_for(enc.bits.len(), x.len(), chain);
    let mut source = enc.bits.to_bits();
    source.resize(budget.blocks * code.k_info(), 0);
    let perm = interleaver(source.len(), chain.interleaver_seed);
    let shuffled = interleave(&source, &perm);

    let mut coded = Vec::with_capacity(budget.coded_bits);
    for msg in shuffled.chunks(code.k_info()) {
        coded.extend(ldpc_encode(code, msg)?);
    }
    let tx = qam_modulate_bits(&coded, chain.constellation);
    debug_assert_eq!(tx.symbols.len(), budget.channel_uses);

    let p = channel.power_budget;
    let gain = p.sqrt();
    let frame = SymbolFrame::new(tx.symbols.iter().map(|s| s * gain).collect(), p)?;
    let variance = channel.noise_variance()?;
    let llrs = match channel.kind {
        ChannelKind::Awgn => {
            let rx = transmit_awgn(&frame, channel)?;
            let r: Vec<Complex64> = rx.symbols().iter().map(|s| s / gain).collect();
            qam_demodulate_llr(&r, chain.constellation, variance / p, chain.demapper)
        }
        ChannelKind::Rayleigh => {
            let (rx, fading) = transmit_rayleigh(&frame, channel, true)?;
            let r: Vec<Complex64> = rx.symbols().iter().map(|s| s / gain).collect();
            let vars: Vec<f64> = fading
                .coefficients
                .iter()
                .map(|h| variance / p / h.norm_sqr())
                .collect();
            qam_demodulate_llr_varying(&r, chain.constellation, &vars, chain.demapper)
        }
    };

    let mut diagnostics = ChainDiagnostics {
        source_bits: budget.source_bits,
        blocks: budget.blocks,
        coded_bits: budget.coded_bits,
        ..Default::default()
    };
    let mut decoded = Vec::with_capacity(source.len());
    for block in llrs[..budget.coded_bits].chunks(code.n()) {
        let out = ldpc_decode_bp(code, block, chain.max_iters)?;
        diagnostics.bp_iterations += out.iterations;
        if !out.converged {
            diagnostics.failed_blocks += 1;
        }
        decoded.extend(out.message);
    }
    let failure = |diagnostics: ChainDiagnostics| -> Result<ChainOutcome> {
        Ok(ChainOutcome {
            image: ImageTensor::filled(x.channels(), x.height(), x.width(), FAILURE_GRAY)?,
            failed: true,
            channel_uses: budget.channel_uses,
            ratio: budget.ratio,
            diagnostics,
        })
    };
    if diagnostics.failed_blocks > 0 {
        return failure(diagnostics);
    }
    let restored = deinterleave(&decoded, &perm);
    let stream = Bitstream::from_bits(&restored[..budget.source_bits]);
    match dct_decode(&stream) {
        Ok(image) if image.dims() == x.dims() => Ok(ChainOutcome {
            image,
            failed: false,
            channel_uses: budget.channel_uses,
            ratio: budget.ratio,
            diagnostics,
        }),
        Ok(_) => {
            diagnostics.stream_error = Some("decoded dims differ".into());
            failure(diagnostics)
        }
        Err(e) => {
            diagnostics.stream_error = Some(e.to_string());
            failure(diagnostics)
        }
    }
}

/// Bisects q (log scale) so the mean chain ratio over `images` is as close
/// to `target` as possible without exceeding it.
pub fn calibrate_quality(images: &[ImageTensor], chain: &DigitalChain, target: f64) -> Result<(CodecQuality, f64)> {
    if images.is_empty() {
        return Err(Error::InvalidArgument("calibration needs images".into()));
    }
    let ratio_at = |q: f64| -> Result<f64> {
        let c = DigitalChain {
            quality: CodecQuality::new(q)?,
            ..chain.clone()
        };
        let mut s = 0.0;
        for x in images {
            s += chain_budget(x, &c)?.ratio;
        }
        Ok(s / images.len() as f64)
    };
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e4f64.ln());
    if ratio_at(hi.exp())? > target {
        let q = hi.exp();
        return Ok((CodecQuality::new(q)?, ratio_at(q)?));
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ratio_at(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = hi.exp();
    Ok((CodecQuality::new(q)?, ratio_at(q)?))
}

/// Signalling used for a BER measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulation {
    /// Antipodal ±1 on one real dimension; the x-axis is Eb/N0.
    Bpsk,
    /// Square QAM at unit power; the x-axis is SNR per complex symbol.
    Qam(QamConstellation),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockStats {
    pub bits: usize,
    pub errors: usize,
    pub failed: bool,
}

/// One random codeword through the modulation and AWGN at `x_db`.
/// The draw is fully determined by `(seed, block)`.
pub fn ber_block(
    code: &LdpcCode,
    modulation: &Modulation,
    x_db: f64,
    max_iters: usize,
    seed: u64,
    block: u64,
) -> Result<BlockStats> {
    let mut rng = StreamRng::new(seed, stream_key(&[0xBE, block]));
    let msg: Vec<u8> = (0..code.k_info()).map(|_| rng.bit() as u8).collect();
    let cw = ldpc_encode(code, &msg)?;
    let llrs = match modulation {
        Modulation::Bpsk => {
            let ebn0 = 10f64.powf(x_db / 10.0);
            let var = 1.0 / (2.0 * code.rate() * ebn0);
            cw.iter()
                .map(|&b| {
                    let s = if b == 0 { 1.0 } else { -1.0 };
                    2.0 * (s + var.sqrt() * rng.gaussian()) / var
                })
                .collect::<Vec<_>>()
        }
        Modulation::Qam(c) => {
            let var = 10f64.powf(-x_db / 10.0);
            let tx = qam_modulate_bits(&cw, c).symbols;
            let noise = draw_noise(&mut rng, tx.len(), var);
            let rx: Vec<Complex64> = tx.iter().zip(&noise).map(|(s, n)| s + n).collect();
            let mut l = qam_demodulate_llr(&rx, c, var, Demapper::FullSum);
            l.truncate(code.n());
            l
        }
    };
    let out = ldpc_decode_bp(code, &llrs, max_iters)?;
    let errors = out.message.iter().zip(&msg).filter(|(a, b)| a != b).count();
    Ok(BlockStats {
        bits: code.k_info(),
        errors,
        failed: !out.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub x_db: f64,
    pub bits: usize,
    pub errors: usize,
    pub blocks: usize,
    pub failed_blocks: usize,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.errors as f64 / self.bits as f64
    }

    pub fn block_error_rate(&self) -> f64 {
        self.failed_blocks as f64 / self.blocks as f64
    }
}

/// Sequential BER measurement over at least `min_bits` information bits.
pub fn ber_point(
    code: &LdpcCode,
    modulation: &Modulation,
    x_db: f64,
    min_bits: usize,
    max_iters: usize,
    seed: u64,
) -> Result<BerPoint> {
    let blocks = min_bits.div_ceil(code.k_info()).max(1);
    let mut p = BerPoint {
        x_db,
        bits: 0,
        errors: 0,
        blocks,
        failed_blocks: 0,
    };
    for b in 0..blocks {
        let s = ber_block(code, modulation, x_db, max_iters, seed, b as u64)?;
        p.bits += s.bits;
        p.errors += s.errors;
        p.failed_blocks += s.failed as usize;
    }
    Ok(p)
}
