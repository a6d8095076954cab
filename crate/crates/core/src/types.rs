//! Shared domain types, SNR arithmetic and bandwidth accounting.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A C×H×W image with intensities in [0, 1], stored channel-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dims must be positive, got {channels}x{height}x{width}"
            )));
        }
        let expected = channels * height * width;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(&bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain {
                op: "ImageTensor::new",
                value: bad,
            });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    /// Builds an image by clamping every value into [0, 1]. NaN maps to 0.
    pub fn from_clamped(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let data = data
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self::new(channels, height, width, data)
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(channels, height, width, vec![value; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> ImageDims {
        ImageDims {
            channels: self.channels,
            height: self.height,
            width: self.width,
        }
    }

    /// Source bandwidth l = C·H·W.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// One channel plane as a row-major slice.
    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ImageDims {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ImageDims {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Vehicle state m: speed, last throttle/brake/steer, and navigation goal offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub speed: f64,
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
    pub goal_dx: f64,
    pub goal_dy: f64,
}

impl StateVector {
    pub const DIM: usize = 6;

    pub fn zero() -> Self {
        Self::from_array([0.0; Self::DIM])
    }

    pub fn to_array(&self) -> [f64; Self::DIM] {
        [
            self.speed,
            self.throttle,
            self.brake,
            self.steer,
            self.goal_dx,
            self.goal_dy,
        ]
    }

    pub fn from_array(v: [f64; Self::DIM]) -> Self {
        Self {
            speed: v[0],
            throttle: v[1],
            brake: v[2],
            steer: v[3],
            goal_dx: v[4],
            goal_dy: v[5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("StateVector"))
        }
    }
}

/// Control commands (steer, throttle, brake).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionVector {
    pub steer: f64,
    pub throttle: f64,
    pub brake: f64,
}

impl ActionVector {
    pub const DIM: usize = 3;

    pub fn new(steer: f64, throttle: f64, brake: f64) -> Self {
        Self { steer, throttle, brake }
    }

    /// Clamps each component into its valid range.
    pub fn clamped(steer: f64, throttle: f64, brake: f64) -> Self {
        Self {
            steer: steer.clamp(-1.0, 1.0),
            throttle: throttle.clamp(0.0, 1.0),
            brake: brake.clamp(0.0, 1.0),
        }
    }

    pub fn to_array(&self) -> [f64; Self::DIM] {
        [self.steer, self.throttle, self.brake]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != Self::DIM {
            return Err(Error::DimensionMismatch {
                expected: Self::DIM,
                actual: v.len(),
            });
        }
        Ok(Self::new(v[0], v[1], v[2]))
    }

    pub fn in_range(&self) -> bool {
        (-1.0..=1.0).contains(&self.steer) && (0.0..=1.0).contains(&self.throttle) && (0.0..=1.0).contains(&self.brake)
    }
}

/// Encoder output (μ, σ) of a diagonal Gaussian posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGaussian {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl LatentGaussian {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                actual: std.len(),
            });
        }
        if let Some(&bad) = std.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::Domain {
                op: "LatentGaussian::new",
                value: bad,
            });
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("LatentGaussian mean"));
        }
        Ok(Self { mean, std })
    }

    /// Standard-normal prior of dimension `d`.
    pub fn standard(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }
}

/// A block of complex channel symbols under an average-power budget P.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    symbols: Vec<Complex64>,
    power_budget: f64,
}

impl SymbolFrame {
    pub fn new(symbols: Vec<Complex64>, power_budget: f64) -> Result<Self> {
        if !(power_budget > 0.0) || !power_budget.is_finite() {
            return Err(Error::Domain {
                op: "SymbolFrame::new",
                value: power_budget,
            });
        }
        if symbols.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::NonFinite("SymbolFrame"));
        }
        Ok(Self { symbols, power_budget })
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<Complex64> {
        self.symbols
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// (1/k)·‖z‖².
    pub fn average_power(&self) -> f64 {
        if self.symbols.is_empty() {
            return 0.0;
        }
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Awgn,
    Rayleigh,
}

/// Channel dial. `stream` selects an independent RNG stream under `seed`
/// so every frame of an experiment draws reproducible, non-overlapping noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    pub kind: ChannelKind,
    pub snr_db: f64,
    pub power_budget: f64,
    pub seed: u64,
    pub stream: u64,
}

impl ChannelConfig {
    pub fn awgn(snr_db: f64, seed: u64) -> Self {
        Self {
            kind: ChannelKind::Awgn,
            snr_db,
            power_budget: 1.0,
            seed,
            stream: 0,
        }
    }

    pub fn rayleigh(snr_db: f64, seed: u64) -> Self {
        Self {
            kind: ChannelKind::Rayleigh,
            ..Self::awgn(snr_db, seed)
        }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    pub fn with_power(self, power_budget: f64) -> Self {
        Self { power_budget, ..self }
    }

    /// σ² = P·10^(−snr/10); an SNR of +∞ gives a noiseless channel.
    pub fn noise_variance(&self) -> Result<f64> {
        snr_to_noise_variance(self.snr_db, self.power_budget)
    }
}

/// Hyperparameters of the neural codec and its training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub latent_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub beta_c_rec: f64,
    pub latent_samples: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub power_budget: f64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            latent_dim: 32,
            hidden_dims: vec![256],
            beta_c_rec: 2048.0,
            latent_samples: 1,
            learning_rate: 1e-3,
            epochs: 20,
            batch_size: 16,
            seed: 0,
            power_budget: 1.0,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || !self.latent_dim.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "latent_dim must be even and positive, got {}",
                self.latent_dim
            )));
        }
        if self.latent_samples == 0 {
            return Err(Error::InvalidArgument("latent_samples must be >= 1".into()));
        }
        if !(self.beta_c_rec > 0.0) {
            return Err(Error::InvalidArgument("beta_c_rec must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(self.power_budget > 0.0) {
            return Err(Error::InvalidArgument("power_budget must be > 0".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer width must be > 0".into()));
        }
        Ok(())
    }

    /// Channel bandwidth k = d/2.
    pub fn channel_uses(&self) -> usize {
        self.latent_dim / 2
    }
}

/// σ² = P·10^(−snr_db/10), the total complex noise variance per symbol.
pub fn snr_to_noise_variance(snr_db: f64, power_budget: f64) -> Result<f64> {
    if !(power_budget > 0.0) || !power_budget.is_finite() {
        return Err(Error::Domain {
            op: "snr_to_noise_variance",
            value: power_budget,
        });
    }
    if snr_db.is_nan() {
        return Err(Error::Domain {
            op: "snr_to_noise_variance",
            value: snr_db,
        });
    }
    Ok(power_budget * 10f64.powf(-snr_db / 10.0))
}

/// 10·log10(P/σ²).
pub fn noise_variance_to_snr(variance: f64, power_budget: f64) -> Result<f64> {
    for v in [variance, power_budget] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain {
                op: "noise_variance_to_snr",
                value: v,
            });
        }
    }
    Ok(10.0 * (power_budget / variance).log10())
}

/// k/l.
pub fn compression_ratio(channel_bandwidth: usize, source_bandwidth: usize) -> Result<f64> {
    if source_bandwidth == 0 {
        return Err(Error::InvalidArgument("source bandwidth must be >= 1".into()));
    }
    if channel_bandwidth == 0 {
        return Err(Error::InvalidArgument("channel bandwidth must be >= 1".into()));
    }
    Ok(channel_bandwidth as f64 / source_bandwidth as f64)
}

/// One (image, state) training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: ImageTensor,
    pub state: StateVector,
}
