//! Binary codec checkpoints.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic            8   b"TSCCCKPT"
//! version          u32 (currently 1)
//! objective        u8  0 = task, 1 = reconstruction
//! beta_c_rec       f64
//! beta_rec         f64 (0 for task codecs)
//! seed             u64
//! latent_dim       u32
//! latent_samples   u32
//! learning_rate    f64
//! epochs           u32
//! batch_size       u32
//! power_budget     f64
//! channels         u32
//! height           u32
//! width            u32
//! encoder layers   u32, then (inputs u32, outputs u32) per layer
//! decoder layers   u32, then (inputs u32, outputs u32) per layer
//! parameters       f64 × n: per layer W (inputs×outputs, row-major) then b,
//!                  encoder layers first, then decoder layers
//! sha256           32 bytes over everything above
//! ```
//!
//! Optimizer moments are not stored.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::autodiff::{Parameter, Tensor};
use crate::error::{Error, Result};
use crate::jscc::codec::{JsccCodec, JsccDecoder, JsccEncoder, Objective};
use crate::nn::{Activation, Dense, Mlp};
use crate::types::{CodecConfig, ImageDims};

pub const MAGIC: &[u8; 8] = b"TSCCCKPT";
pub const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_shapes(out: &mut Vec<u8>, net: &Mlp) -> Result<()> {
    put_u32(out, net.layers().len())?;
    for l in net.layers() {
        put_u32(out, l.inputs())?;
        put_u32(out, l.outputs())?;
    }
    Ok(())
}

pub fn to_bytes(codec: &JsccCodec) -> Result<Vec<u8>> {
    let c = &codec.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let (tag, beta_rec) = match codec.objective {
        Objective::Task => (0u8, 0.0),
        Objective::Reconstruction { beta_rec } => (1u8, beta_rec),
    };
    out.push(tag);
    out.extend_from_slice(&c.beta_c_rec.to_le_bytes());
    out.extend_from_slice(&beta_rec.to_le_bytes());
    out.extend_from_slice(&c.seed.to_le_bytes());
    put_u32(&mut out, c.latent_dim)?;
    put_u32(&mut out, c.latent_samples)?;
    out.extend_from_slice(&c.learning_rate.to_le_bytes());
    put_u32(&mut out, c.epochs)?;
    put_u32(&mut out, c.batch_size)?;
    out.extend_from_slice(&c.power_budget.to_le_bytes());
    let dims = codec.dims();
    for v in [dims.channels, dims.height, dims.width] {
        put_u32(&mut out, v)?;
    }
    put_shapes(&mut out, codec.encoder.net())?;
    put_shapes(&mut out, codec.decoder.net())?;
    for v in codec.flat_parameters() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("unexpected end of data".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn shapes(&mut self) -> Result<Vec<(usize, usize)>> {
        let n = self.u32()?;
        if n == 0 || n > 64 {
            return Err(Error::Checkpoint(format!("implausible layer count {n}")));
        }
        (0..n).map(|_| Ok((self.u32()?, self.u32()?))).collect()
    }

    fn net(&mut self, shapes: &[(usize, usize)]) -> Result<Mlp> {
        let mut layers = Vec::with_capacity(shapes.len());
        for &(i, o) in shapes {
            let w = (0..i * o).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            let b = (0..o).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(Dense {
                weight: Parameter::new(Tensor::matrix(i, o, w)?),
                bias: Parameter::new(Tensor::matrix(1, o, b)?),
            });
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Checkpoint("layer widths do not chain".into()));
            }
        }
        Ok(Mlp::from_layers(layers, Activation::Relu))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<JsccCodec> {
    if bytes.len() < MAGIC.len() + 32 {
        return Err(Error::Checkpoint("checksum failure: file too short".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Checkpoint("checksum failure".into()));
    }
    let mut r = Reader { buf: body, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()? as u32;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "version mismatch: file {version}, expected {VERSION}"
        )));
    }
    let tag = r.u8()?;
    let beta_c_rec = r.f64()?;
    let beta_rec = r.f64()?;
    let objective = match tag {
        0 => Objective::Task,
        1 => Objective::Reconstruction { beta_rec },
        t => return Err(Error::Checkpoint(format!("unknown objective tag {t}"))),
    };
    let seed = r.u64()?;
    let latent_dim = r.u32()?;
    let latent_samples = r.u32()?;
    let learning_rate = r.f64()?;
    let epochs = r.u32()?;
    let batch_size = r.u32()?;
    let power_budget = r.f64()?;
    let dims = ImageDims::new(r.u32()?, r.u32()?, r.u32()?);
    let enc_shapes = r.shapes()?;
    let dec_shapes = r.shapes()?;
    let encoder = JsccEncoder::from_net(r.net(&enc_shapes)?)?;
    let decoder = JsccDecoder::from_net(r.net(&dec_shapes)?, dims)?;
    if r.pos != body.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    if encoder.latent_dim() != latent_dim || decoder.latent_dim() != latent_dim || encoder.input_dim() != dims.len() {
        return Err(Error::Checkpoint("layer shapes disagree with header".into()));
    }
    let hidden_dims = enc_shapes[1..].iter().map(|&(i, _)| i).collect();
    let config = CodecConfig {
        latent_dim,
        hidden_dims,
        beta_c_rec,
        latent_samples,
        learning_rate,
        epochs,
        batch_size,
        seed,
        power_budget,
    };
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(JsccCodec {
        config,
        objective,
        encoder,
        decoder,
    })
}

pub fn save_checkpoint(codec: &JsccCodec, path: impl AsRef<Path>) -> Result<()> {
    let bytes = to_bytes(codec)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.as_ref().display())))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<JsccCodec> {
    let bytes =
        std::fs::read(path.as_ref()).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.as_ref().display())))?;
    from_bytes(&bytes)
}

/// SHA-256 over the parameters, hex encoded.
pub fn parameter_checksum(codec: &JsccCodec) -> String {
    let mut h = Sha256::new();
    for v in codec.flat_parameters() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn codec(objective: Objective) -> JsccCodec {
        let cfg = CodecConfig {
            latent_dim: 6,
            hidden_dims: vec![9, 7],
            seed: 21,
            ..CodecConfig::default()
        };
        JsccCodec::new(ImageDims::new(2, 3, 4), cfg, objective).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        for obj in [Objective::Task, Objective::Reconstruction { beta_rec: 0.25 }] {
            let c = codec(obj);
            let back = from_bytes(&to_bytes(&c).unwrap()).unwrap();
            assert_eq!(back, c);
            assert_eq!(parameter_checksum(&back), parameter_checksum(&c));
        }
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ckpt");
        let c = codec(Objective::Task);
        save_checkpoint(&c, &p).unwrap();
        assert_eq!(load_checkpoint(&p).unwrap(), c);
    }

    #[test]
    fn truncation_and_corruption_detected() {
        let bytes = to_bytes(&codec(Objective::Task)).unwrap();
        for cut in [0, 10, bytes.len() / 2, bytes.len() - 1] {
            let e = from_bytes(&bytes[..cut]).unwrap_err();
            assert!(e.to_string().contains("checksum"), "{e}");
        }
        let mut flipped = bytes.clone();
        flipped[100] ^= 1;
        assert!(from_bytes(&flipped).unwrap_err().to_string().contains("checksum"));
    }

    #[test]
    fn version_mismatch_reported() {
        let mut bytes = to_bytes(&codec(Objective::Task)).unwrap();
        bytes.truncate(bytes.len() - 32);
        bytes[8..12].copy_from_slice(&2u32.to_le_bytes());
        let digest = Sha256::digest(&bytes);
        bytes.extend_from_slice(&digest);
        assert!(from_bytes(&bytes).unwrap_err().to_string().contains("version mismatch"));
    }
}
