//! Dense encoder and decoder networks.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::jscc::ops::unpack_complex;
use crate::nn::{Activation, Mlp, MlpVars};
use crate::rng::stream_key;
use crate::types::{CodecConfig, ImageDims, ImageTensor, LatentGaussian, SymbolFrame};

/// Log-variance outputs are clamped to ±this before exponentiation.
pub const LOGVAR_BOUND: f64 = 30.0;

/// Initial bias of the log-variance head. Starting with σ well below 1
/// lets z carry μ from the first step instead of being swamped by ε.
pub const INIT_LOGVAR: f64 = -4.0;

const HIDDEN: Activation = Activation::Relu;

/// x (length l) → hidden → [μ | logvar] (length 2d).
#[derive(Debug, Clone, PartialEq)]
pub struct JsccEncoder {
    net: Mlp,
    latent_dim: usize,
}

impl JsccEncoder {
    pub fn new(input_dim: usize, hidden: &[usize], latent_dim: usize, seed: u64) -> Result<Self> {
        let mut widths = vec![input_dim];
        widths.extend_from_slice(hidden);
        widths.push(2 * latent_dim);
        let mut net = Mlp::new(&widths, HIDDEN, seed)?;
        let head = net.layers_mut().last_mut().expect("at least one layer");
        head.bias.value_mut().data_mut()[latent_dim..].fill(INIT_LOGVAR);
        Ok(Self { net, latent_dim })
    }

    pub(crate) fn from_net(net: Mlp) -> Result<Self> {
        let out = net.output_dim();
        if out == 0 || !out.is_multiple_of(2) {
            return Err(Error::Checkpoint(format!("encoder output width {out} is not 2d")));
        }
        Ok(Self {
            net,
            latent_dim: out / 2,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    /// Batched (μ, σ) for rows of `x`.
    pub fn forward_batch(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.cols(),
            });
        }
        let d = self.latent_dim;
        let h = self.net.forward(x)?;
        let mu = h.slice_cols(0, d)?;
        let sigma = h
            .slice_cols(d, 2 * d)?
            .clamp(-LOGVAR_BOUND, LOGVAR_BOUND)
            .scale(0.5)
            .exp();
        Ok((mu, sigma))
    }

    /// Tape version; returns (μ, logvar, σ).
    pub fn forward_tape(&self, tape: &mut Tape, vars: &MlpVars, x: Var) -> Result<(Var, Var, Var)> {
        let d = self.latent_dim;
        let h = self.net.forward_tape(tape, vars, x)?;
        let mu = tape.slice(h, 0, d)?;
        let raw = tape.slice(h, d, 2 * d)?;
        let logvar = tape.clamp(raw, -LOGVAR_BOUND, LOGVAR_BOUND)?;
        let half = tape.scale(logvar, 0.5)?;
        let sigma = tape.exp(half)?;
        Ok((mu, logvar, sigma))
    }
}

/// z (length d) → hidden → logistic output of length l.
#[derive(Debug, Clone, PartialEq)]
pub struct JsccDecoder {
    net: Mlp,
    dims: ImageDims,
}

impl JsccDecoder {
    pub fn new(latent_dim: usize, hidden: &[usize], dims: ImageDims, seed: u64) -> Result<Self> {
        let mut widths = vec![latent_dim];
        widths.extend(hidden.iter().rev());
        widths.push(dims.len());
        let mut net = Mlp::new(&widths, HIDDEN, seed)?;
        // an untrained decoder emits flat gray instead of z-driven clutter
        let out = net.layers_mut().last_mut().expect("at least one layer");
        out.weight.value_mut().data_mut().fill(0.0);
        Ok(Self { net, dims })
    }

    pub(crate) fn from_net(net: Mlp, dims: ImageDims) -> Result<Self> {
        if net.output_dim() != dims.len() {
            return Err(Error::Checkpoint(format!(
                "decoder output width {} does not match image size {}",
                net.output_dim(),
                dims.len()
            )));
        }
        Ok(Self { net, dims })
    }

    pub fn latent_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn forward_batch(&self, z: &Tensor) -> Result<Tensor> {
        if z.cols() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: z.cols(),
            });
        }
        Ok(self.net.forward(z)?.sigmoid())
    }

    pub fn forward_tape(&self, tape: &mut Tape, vars: &MlpVars, z: Var) -> Result<Var> {
        let h = self.net.forward_tape(tape, vars, z)?;
        tape.sigmoid(h)
    }
}

/// (μ, σ) for a single image.
pub fn encode(enc: &JsccEncoder, x: &ImageTensor) -> Result<LatentGaussian> {
    let (mu, sigma) = enc.forward_batch(&Tensor::row(x.data().to_vec()))?;
    LatentGaussian::new(mu.into_data(), sigma.into_data())
}

/// Reconstruction y from a received frame of k = d/2 symbols.
pub fn decode(dec: &JsccDecoder, frame: &SymbolFrame) -> Result<ImageTensor> {
    let z = unpack_complex(frame.symbols());
    if z.len() != dec.latent_dim() {
        return Err(Error::DimensionMismatch {
            expected: dec.latent_dim() / 2,
            actual: frame.len(),
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("received frame"));
    }
    let y = dec.forward_batch(&Tensor::row(z))?;
    let d = dec.dims;
    ImageTensor::new(d.channels, d.height, d.width, y.into_data())
}

/// Which loss a codec was (or is to be) trained against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Action discrepancy through the frozen agent, weighted by β_c-rec.
    Task,
    /// Pixel reconstruction error weighted by β_rec.
    Reconstruction { beta_rec: f64 },
}

/// Encoder, decoder and the configuration they were built from.
#[derive(Debug, Clone, PartialEq)]
pub struct JsccCodec {
    pub config: CodecConfig,
    pub objective: Objective,
    pub encoder: JsccEncoder,
    pub decoder: JsccDecoder,
}

impl JsccCodec {
    pub fn new(dims: ImageDims, config: CodecConfig, objective: Objective) -> Result<Self> {
        config.validate()?;
        if dims.is_empty() {
            return Err(Error::InvalidArgument("image dims must be positive".into()));
        }
        if let Objective::Reconstruction { beta_rec } = objective {
            if !(beta_rec > 0.0) {
                return Err(Error::InvalidArgument("beta_rec must be > 0".into()));
            }
        }
        let d = config.latent_dim;
        let encoder = JsccEncoder::new(dims.len(), &config.hidden_dims, d, stream_key(&[config.seed, 0xE1]))?;
        let decoder = JsccDecoder::new(d, &config.hidden_dims, dims, stream_key(&[config.seed, 0xD1]))?;
        Ok(Self {
            config,
            objective,
            encoder,
            decoder,
        })
    }

    pub fn dims(&self) -> ImageDims {
        self.decoder.dims()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.latent_dim()
    }

    /// k = d/2 complex channel uses per image.
    pub fn channel_uses(&self) -> usize {
        self.latent_dim() / 2
    }

    /// k/l.
    pub fn compression_ratio(&self) -> f64 {
        self.channel_uses() as f64 / self.dims().len() as f64
    }

    /// Weight on the reconstruction term for this codec's objective.
    pub fn beta(&self) -> f64 {
        match self.objective {
            Objective::Task => self.config.beta_c_rec,
            Objective::Reconstruction { beta_rec } => beta_rec,
        }
    }

    /// Encoder parameters followed by decoder parameters.
    pub fn flat_parameters(&self) -> Vec<f64> {
        let mut v = self.encoder.net.flat_parameters();
        v.extend(self.decoder.net.flat_parameters());
        v
    }

    pub fn set_flat_parameters(&mut self, values: &[f64]) -> Result<()> {
        let ne = self.encoder.net.parameter_count();
        let nd = self.decoder.net.parameter_count();
        if values.len() != ne + nd {
            return Err(Error::DimensionMismatch {
                expected: ne + nd,
                actual: values.len(),
            });
        }
        self.encoder.net.set_flat_parameters(&values[..ne])?;
        self.decoder.net.set_flat_parameters(&values[ne..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn toy() -> JsccCodec {
        let cfg = CodecConfig {
            latent_dim: 8,
            hidden_dims: vec![16],
            seed: 3,
            ..CodecConfig::default()
        };
        JsccCodec::new(ImageDims::new(3, 4, 8), cfg, Objective::Task).unwrap()
    }

    #[test]
    fn zero_input_fixtures() {
        let c = toy();
        let x = ImageTensor::filled(3, 4, 8, 0.0).unwrap();
        let lat = encode(&c.encoder, &x).unwrap();
        // zero input leaves only the biases: μ = 0 and σ = exp(INIT_LOGVAR / 2)
        assert!(lat.mean().iter().all(|&m| m == 0.0));
        assert!(lat.std().iter().all(|&s| s == (0.5 * INIT_LOGVAR).exp()));

        let frame = SymbolFrame::new(vec![Complex64::new(0.0, 0.0); 4], 1.0).unwrap();
        let y = decode(&c.decoder, &frame).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn gray_input_fixture() {
        let c = toy();
        let x = ImageTensor::filled(3, 4, 8, 0.5).unwrap();
        let lat = encode(&c.encoder, &x).unwrap();
        let got = [lat.mean()[0], lat.mean()[1], lat.std()[0]];
        assert_eq!(got, GRAY_FIXTURE, "{got:?}");
    }

    // frozen from one run of the seed-3 toy codec
    const GRAY_FIXTURE: [f64; 3] = [1.449878567048821, 0.9562636354615693, 0.11089622576471356];

    #[test]
    fn deterministic_and_positive() {
        let c = toy();
        let data: Vec<f64> = (0..96).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
        let x = ImageTensor::new(3, 4, 8, data).unwrap();
        let a = encode(&c.encoder, &x).unwrap();
        assert_eq!(a, encode(&c.encoder, &x).unwrap());
        assert!(a.std().iter().all(|&s| s > 0.0));
        assert_eq!(a.dim(), 8);
    }

    #[test]
    fn untrained_decoder_is_flat_gray() {
        let c = toy();
        let s: Vec<Complex64> = (0..4).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let y = decode(&c.decoder, &SymbolFrame::new(s, 1.0).unwrap()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn decoder_output_in_range() {
        let mut c = toy();
        let mut rng = crate::rng::StreamRng::new(4, 0);
        for p in c.decoder.net_mut().parameters_mut() {
            p.value_mut().data_mut().iter_mut().for_each(|v| *v = rng.gaussian());
        }
        for scale in [0.0, 1.0, 1e3, 1e8] {
            let s: Vec<Complex64> = (0..4)
                .map(|i| Complex64::new(scale * (i as f64 - 1.5), -scale))
                .collect();
            let y = decode(&c.decoder, &SymbolFrame::new(s, 1.0).unwrap()).unwrap();
            assert!(y.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn dimension_errors() {
        let c = toy();
        assert!(encode(&c.encoder, &ImageTensor::filled(1, 4, 8, 0.0).unwrap()).is_err());
        let frame = SymbolFrame::new(vec![Complex64::new(1.0, 0.0); 3], 1.0).unwrap();
        assert!(decode(&c.decoder, &frame).is_err());
    }

    #[test]
    fn accounting() {
        let c = toy();
        assert_eq!(c.channel_uses(), 4);
        assert_eq!(c.compression_ratio(), 4.0 / 96.0);
        let p = c.flat_parameters();
        let mut c2 = c.clone();
        c2.set_flat_parameters(&p).unwrap();
        assert_eq!(c2, c);
    }
}
