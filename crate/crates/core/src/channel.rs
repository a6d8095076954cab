//! AWGN and Rayleigh block-fading channels over [`SymbolFrame`]s.
//!
//! Noise is circularly-symmetric complex Gaussian: with total variance σ²
//! per symbol, the real and imaginary parts are each drawn with variance
//! σ²/2. Draws come from the `(seed, stream)` ChaCha stream of the
//! [`ChannelConfig`]; a Rayleigh transmission draws all k fading
//! coefficients first, then all k noise samples, from that one stream.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::types::{ChannelConfig, ChannelKind, SymbolFrame};

/// Equalization is refused when |h| falls below this.
pub const DEEP_FADE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub noise: Vec<Complex64>,
    pub seed: u64,
    pub stream: u64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    pub coefficients: Vec<Complex64>,
    pub seed: u64,
    pub stream: u64,
}

/// Draws `k` samples of CN(0, variance).
pub fn draw_noise(rng: &mut StreamRng, k: usize, variance: f64) -> Vec<Complex64> {
    let s = (variance / 2.0).sqrt();
    (0..k)
        .map(|_| {
            let re = rng.gaussian();
            let im = rng.gaussian();
            Complex64::new(s * re, s * im)
        })
        .collect()
}

pub fn noise_draw(k: usize, config: &ChannelConfig) -> Result<NoiseDraw> {
    let variance = config.noise_variance()?;
    let mut rng = StreamRng::new(config.seed, config.stream);
    Ok(NoiseDraw {
        noise: draw_noise(&mut rng, k, variance),
        seed: config.seed,
        stream: config.stream,
        variance,
    })
}

/// ẑ = z̃ + n.
pub fn transmit_awgn(frame: &SymbolFrame, config: &ChannelConfig) -> Result<SymbolFrame> {
    if config.kind != ChannelKind::Awgn {
        return Err(Error::InvalidArgument("transmit_awgn needs an AWGN config".into()));
    }
    let draw = noise_draw(frame.len(), config)?;
    let rx = frame.symbols().iter().zip(&draw.noise).map(|(s, n)| s + n).collect();
    SymbolFrame::new(rx, frame.power_budget())
}

/// ẑ = h⊙z̃ + n, optionally followed by zero-forcing division by h.
pub fn transmit_rayleigh(
    frame: &SymbolFrame,
    config: &ChannelConfig,
    equalize: bool,
) -> Result<(SymbolFrame, FadingDraw)> {
    if config.kind != ChannelKind::Rayleigh {
        return Err(Error::InvalidArgument(
            "transmit_rayleigh needs a Rayleigh config".into(),
        ));
    }
    let variance = config.noise_variance()?;
    let mut rng = StreamRng::new(config.seed, config.stream);
    let fading = draw_noise(&mut rng, frame.len(), 1.0);
    let noise = draw_noise(&mut rng, frame.len(), variance);
    let rx = apply_fading(frame.symbols(), &fading, &noise, equalize)?;
    Ok((
        SymbolFrame::new(rx, frame.power_budget())?,
        FadingDraw {
            coefficients: fading,
            seed: config.seed,
            stream: config.stream,
        },
    ))
}

/// h⊙z + n, divided by h when `equalize` is set.
pub fn apply_fading(
    symbols: &[Complex64],
    fading: &[Complex64],
    noise: &[Complex64],
    equalize: bool,
) -> Result<Vec<Complex64>> {
    symbols
        .iter()
        .zip(fading)
        .zip(noise)
        .map(|((&s, &h), &n)| {
            let y = h * s + n;
            if equalize {
                let mag = h.norm();
                if mag < DEEP_FADE_GUARD {
                    return Err(Error::DeepFade(mag));
                }
                Ok(y / h)
            } else {
                Ok(y)
            }
        })
        .collect()
}

/// Dispatches on the channel kind; Rayleigh frames are equalized.
pub fn transmit(frame: &SymbolFrame, config: &ChannelConfig) -> Result<SymbolFrame> {
    match config.kind {
        ChannelKind::Awgn => transmit_awgn(frame, config),
        ChannelKind::Rayleigh => transmit_rayleigh(frame, config, true).map(|(f, _)| f),
    }
}

/// Fewest symbols accepted by [`measure_empirical_snr`].
pub const MIN_SNR_SYMBOLS: usize = 10_000;

/// 10·log10(mean‖sent‖² / mean‖received − sent‖²), +∞ when no noise was added.
pub fn measure_empirical_snr(sent: &[SymbolFrame], received: &[SymbolFrame]) -> Result<f64> {
    if sent.len() != received.len() {
        return Err(Error::DimensionMismatch {
            expected: sent.len(),
            actual: received.len(),
        });
    }
    let mut signal = 0.0;
    let mut noise = 0.0;
    let mut count = 0usize;
    for (s, r) in sent.iter().zip(received) {
        if s.len() != r.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                actual: r.len(),
            });
        }
        for (a, b) in s.symbols().iter().zip(r.symbols()) {
            signal += a.norm_sqr();
            noise += (b - a).norm_sqr();
        }
        count += s.len();
    }
    if count < MIN_SNR_SYMBOLS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SNR_SYMBOLS} symbols, got {count}"
        )));
    }
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}
