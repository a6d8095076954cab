//! Latent-space operations and loss terms on plain values.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::types::{ActionVector, ImageTensor, LatentGaussian, SymbolFrame};

/// Loss split into its weighted reconstruction and KL parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub kl: f64,
    pub beta: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(reconstruction: f64, kl: f64, beta: f64) -> Self {
        Self {
            reconstruction,
            kl,
            beta,
            total: beta * reconstruction + kl,
        }
    }
}

/// z = ε⊙σ + μ.
pub fn reparameterize(latent: &LatentGaussian, epsilon: &[f64]) -> Result<Vec<f64>> {
    if epsilon.len() != latent.dim() {
        return Err(Error::DimensionMismatch {
            expected: latent.dim(),
            actual: epsilon.len(),
        });
    }
    Ok(latent
        .mean()
        .iter()
        .zip(latent.std())
        .zip(epsilon)
        .map(|((m, s), e)| e * s + m)
        .collect())
}

/// Pairs neighbouring reals into complex symbols: ž_j = z_{2j} + i·z_{2j+1}.
pub fn pack_complex(z: &[f64]) -> Result<Vec<Complex64>> {
    if !z.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "latent length {} is odd and cannot be packed",
            z.len()
        )));
    }
    Ok(z.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
}

pub fn unpack_complex(symbols: &[Complex64]) -> Vec<f64> {
    symbols.iter().flat_map(|s| [s.re, s.im]).collect()
}

/// z̃ = √(kP)·ž/√(ž*ž), so that (1/k)‖z̃‖² = P.
pub fn normalize_power(packed: &[Complex64], power_budget: f64) -> Result<SymbolFrame> {
    if !(power_budget > 0.0) {
        return Err(Error::Domain {
            op: "normalize_power",
            value: power_budget,
        });
    }
    let k = packed.len();
    // summed in interleaved real order, matching the training graph
    let mut energy = 0.0;
    for s in packed {
        energy += s.re * s.re;
        energy += s.im * s.im;
    }
    if !(energy > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let norm = energy.sqrt();
    let gain = (k as f64 * power_budget).sqrt();
    let out = packed
        .iter()
        .map(|s| Complex64::new(s.re / norm * gain, s.im / norm * gain))
        .collect();
    SymbolFrame::new(out, power_budget)
}

/// ½·Σ(μ² + σ² − ln σ² − 1), the KL divergence to the standard normal prior.
pub fn compute_kl(latent: &LatentGaussian) -> f64 {
    0.5 * latent
        .mean()
        .iter()
        .zip(latent.std())
        .map(|(m, s)| {
            let var = s * s;
            m * m + var - var.ln() - 1.0
        })
        .sum::<f64>()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// β_rec·(1/t)Σ‖x − x̂ᵢ‖² + KL.
pub fn compute_vae_loss(
    x: &ImageTensor,
    reconstructions: &[ImageTensor],
    latent: &LatentGaussian,
    beta_rec: f64,
) -> Result<LossBreakdown> {
    if reconstructions.is_empty() {
        return Err(Error::InvalidArgument("need at least one reconstruction".into()));
    }
    let mut rec = 0.0;
    for r in reconstructions {
        if r.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: r.len(),
            });
        }
        rec += squared_distance(x.data(), r.data());
    }
    rec /= reconstructions.len() as f64;
    Ok(LossBreakdown::new(rec, compute_kl(latent), beta_rec))
}

/// β_c-rec·(1/t)Σ‖a − âᵢ‖² + KL.
pub fn compute_tscc_loss(
    coach: &ActionVector,
    agent_outputs: &[ActionVector],
    latent: &LatentGaussian,
    beta_c_rec: f64,
) -> Result<LossBreakdown> {
    if agent_outputs.is_empty() {
        return Err(Error::InvalidArgument("need at least one agent output".into()));
    }
    let a = coach.to_array();
    let rec = agent_outputs
        .iter()
        .map(|ah| squared_distance(&a, &ah.to_array()))
        .sum::<f64>()
        / agent_outputs.len() as f64;
    Ok(LossBreakdown::new(rec, compute_kl(latent), beta_c_rec))
}
