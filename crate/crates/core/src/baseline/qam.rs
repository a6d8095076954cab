//! Gray-mapped square QAM with soft demapping.
//!
//! A symbol carries `b = log2 M` bits. The first b/2 bits select the
//! in-phase level and the last b/2 the quadrature level. Along each axis
//! level index `j` has amplitude `(√M − 1 − 2j)·s` and bit label
//! `j ^ (j >> 1)` (MSB first), with `s` chosen for unit average energy.
//! For QPSK this gives 00 → (+1 + i)/√2.

use num_complex::Complex64;

use crate::baseline::bits::Bitstream;
use crate::baseline::ldpc::LLR_CAP;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QamConstellation {
    order: usize,
    bits_per_axis: usize,
    scale: f64,
    /// Amplitude by Gray label.
    amplitude: Vec<f64>,
    points: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Demapper {
    #[default]
    FullSum,
    MaxLog,
}

fn gray(j: usize) -> usize {
    j ^ (j >> 1)
}

impl QamConstellation {
    pub fn new(order: usize) -> Result<Self> {
        let bits_per_axis = match order {
            4 => 1,
            16 => 2,
            64 => 3,
            _ => return Err(Error::InvalidArgument(format!("unsupported QAM order {order}"))),
        };
        let m = 1usize << bits_per_axis;
        // mean of (m−1−2j)² over j is (m²−1)/3 per axis
        let scale = 1.0 / (2.0 * (m * m - 1) as f64 / 3.0).sqrt();
        let mut amplitude = vec![0.0; m];
        for j in 0..m {
            amplitude[gray(j)] = (m as f64 - 1.0 - 2.0 * j as f64) * scale;
        }
        let points = (0..order)
            .map(|label| {
                let i = label >> bits_per_axis;
                let q = label & (m - 1);
                Complex64::new(amplitude[i], amplitude[q])
            })
            .collect();
        Ok(Self {
            order,
            bits_per_axis,
            scale,
            amplitude,
            points,
        })
    }

    pub fn qpsk() -> Self {
        Self::new(4).expect("QPSK")
    }

    pub fn qam16() -> Self {
        Self::new(16).expect("16-QAM")
    }

    pub fn qam64() -> Self {
        Self::new(64).expect("64-QAM")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Constellation point for a label whose MSB is the first transmitted bit.
    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Levels per axis, √M.
    pub fn side(&self) -> usize {
        1 << self.bits_per_axis
    }
}

/// Modulated symbols and the number of zero bits appended to fill the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulated {
    pub symbols: Vec<Complex64>,
    pub padding: usize,
}

pub fn qam_modulate(bits: &Bitstream, c: &QamConstellation) -> Modulated {
    let b = c.bits_per_symbol();
    let padding = (b - bits.len() % b) % b;
    let total = bits.len() + padding;
    let symbols = (0..total / b)
        .map(|s| {
            let label = (0..b).fold(0usize, |acc, i| {
                let idx = s * b + i;
                let bit = idx < bits.len() && bits.get(idx);
                (acc << 1) | bit as usize
            });
            c.point(label)
        })
        .collect();
    Modulated { symbols, padding }
}

/// Same as [`qam_modulate`] on unpacked 0/1 values.
pub fn qam_modulate_bits(bits: &[u8], c: &QamConstellation) -> Modulated {
    qam_modulate(&Bitstream::from_bits(bits), c)
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-axis LLRs. Square QAM factorizes, so the exact full-sum LLR of an
/// in-phase bit depends only on Re(r), and likewise for quadrature bits.
fn axis_llrs(r: f64, c: &QamConstellation, noise_variance: f64, demapper: Demapper, out: &mut Vec<f64>) {
    let m = c.side();
    let metric: Vec<f64> = (0..m)
        .map(|label| -(r - c.amplitude[label]).powi(2) / noise_variance)
        .collect();
    for bit in 0..c.bits_per_axis {
        let mask = 1 << (c.bits_per_axis - 1 - bit);
        let zero = (0..m).filter(|l| l & mask == 0).map(|l| metric[l]);
        let one = (0..m).filter(|l| l & mask != 0).map(|l| metric[l]);
        let llr = match demapper {
            Demapper::FullSum => log_sum_exp(zero) - log_sum_exp(one),
            Demapper::MaxLog => zero.fold(f64::NEG_INFINITY, f64::max) - one.fold(f64::NEG_INFINITY, f64::max),
        };
        out.push(llr.clamp(-LLR_CAP, LLR_CAP));
    }
}

/// LLR_b = ln(Σ_{s:b=0} e^{−|r−s|²/σ²} / Σ_{s:b=1} e^{−|r−s|²/σ²}), one per
/// bit in transmission order. σ² = 0 yields hard ±cap decisions.
pub fn qam_demodulate_llr(
    symbols: &[Complex64],
    c: &QamConstellation,
    noise_variance: f64,
    demapper: Demapper,
) -> Vec<f64> {
    let var = noise_variance.max(1e-300);
    let mut out = Vec::with_capacity(symbols.len() * c.bits_per_symbol());
    for r in symbols {
        axis_llrs(r.re, c, var, demapper, &mut out);
        axis_llrs(r.im, c, var, demapper, &mut out);
    }
    out
}

/// Per-symbol noise variances, as after zero-forcing a fading channel.
pub fn qam_demodulate_llr_varying(
    symbols: &[Complex64],
    c: &QamConstellation,
    variances: &[f64],
    demapper: Demapper,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(symbols.len() * c.bits_per_symbol());
    for (r, &v) in symbols.iter().zip(variances) {
        let v = v.max(1e-300);
        axis_llrs(r.re, c, v, demapper, &mut out);
        axis_llrs(r.im, c, v, demapper, &mut out);
    }
    out
}

/// Hard decisions from LLRs (negative means 1).
pub fn hard_decisions(llrs: &[f64]) -> Vec<u8> {
    llrs.iter().map(|&l| (l < 0.0) as u8).collect()
}
