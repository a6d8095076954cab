//! Image and task fidelity metrics.
//!
//! MS-SSIM uses a 7×7 Gaussian window (σ = 1.5) with valid-region
//! filtering, 2×2 average-pool downsampling between scales, and the first
//! `scales` of the standard five-scale exponents renormalized to sum to 1.
//! Negative contrast-structure terms are clamped to zero so the result lies
//! in [0, 1]. Colour images are scored per channel and averaged.

use crate::error::{Error, Result};
use crate::types::{ActionVector, ImageTensor};

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
const MS_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
pub const DEFAULT_TAU: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    /// dB, `f64::INFINITY` for identical images.
    pub psnr: f64,
    pub ms_ssim: f64,
    pub action_mse: f64,
    pub task_score: f64,
}

fn check_dims(x: &ImageTensor, y: &ImageTensor) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    Ok(())
}

pub fn mse(x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
    check_dims(x, y)?;
    Ok(x.data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64)
}

/// 10·log10(1/MSE); +∞ when the images are identical.
pub fn psnr(x: &ImageTensor, y: &ImageTensor) -> Result<f64> {
    let m = mse(x, y)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / m).log10())
}

fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable valid-region filtering of an h×w plane.
fn filter(p: &[f64], h: usize, w: usize, g: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = g.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = (0..k).map(|i| g[i] * p[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..k).map(|i| g[i] * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean luminance term and mean contrast-structure term.
fn ssim_terms(a: &[f64], b: &[f64], h: usize, w: usize, g: &[f64]) -> (f64, f64) {
    let sq = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).collect::<Vec<_>>();
    let (mu_a, oh, ow) = filter(a, h, w, g);
    let (mu_b, _, _) = filter(b, h, w, g);
    let (e_aa, _, _) = filter(&sq(a, a), h, w, g);
    let (e_bb, _, _) = filter(&sq(b, b), h, w, g);
    let (e_ab, _, _) = filter(&sq(a, b), h, w, g);
    let n = (oh * ow) as f64;
    let (mut lum, mut cs) = (0.0, 0.0);
    for i in 0..oh * ow {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        lum += (2.0 * ma * mb + SSIM_C1) / (ma * ma + mb * mb + SSIM_C1);
        cs += (2.0 * cov + SSIM_C2) / (va + vb + SSIM_C2);
    }
    (lum / n, cs / n)
}

fn downsample(p: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = 0.25
                * (p[2 * y * w + 2 * x]
                    + p[2 * y * w + 2 * x + 1]
                    + p[(2 * y + 1) * w + 2 * x]
                    + p[(2 * y + 1) * w + 2 * x + 1]);
        }
    }
    (out, oh, ow)
}

pub fn ms_ssim(x: &ImageTensor, y: &ImageTensor, scales: usize, window: usize) -> Result<f64> {
    check_dims(x, y)?;
    if scales == 0 || scales > MS_WEIGHTS.len() || window == 0 {
        return Err(Error::InvalidArgument(format!(
            "unsupported scales={scales} window={window}"
        )));
    }
    let need = window << (scales - 1);
    if x.height() < need || x.width() < need {
        return Err(Error::InvalidArgument(format!(
            "image {}x{} too small for {scales} scales of a {window}-wide window (need {need})",
            x.height(),
            x.width()
        )));
    }
    let total: f64 = MS_WEIGHTS[..scales].iter().sum();
    let weights: Vec<f64> = MS_WEIGHTS[..scales].iter().map(|w| w / total).collect();
    let g = gaussian_window(window, 1.5);
    let mut acc = 0.0;
    for c in 0..x.channels() {
        let (mut a, mut b) = (x.plane(c).to_vec(), y.plane(c).to_vec());
        let (mut h, mut w) = (x.height(), x.width());
        let mut value = 1.0;
        for (s, &wt) in weights.iter().enumerate() {
            let (lum, cs) = ssim_terms(&a, &b, h, w, &g);
            let term = if s + 1 == scales { lum * cs } else { cs };
            value *= term.max(0.0).powf(wt);
            if s + 1 < scales {
                let (na, nh, nw) = downsample(&a, h, w);
                b = downsample(&b, h, w).0;
                a = na;
                h = nh;
                w = nw;
            }
        }
        acc += value;
    }
    Ok((acc / x.channels() as f64).clamp(0.0, 1.0))
}

/// Mean squared componentwise error between two action vectors.
pub fn action_mse(a: &ActionVector, a_hat: &ActionVector) -> f64 {
    a.to_array()
        .iter()
        .zip(a_hat.to_array())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / ActionVector::DIM as f64
}

/// Mean of per-example [`action_mse`].
pub fn batch_action_mse(pairs: &[(ActionVector, ActionVector)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    Ok(pairs.iter().map(|(a, b)| action_mse(a, b)).sum::<f64>() / pairs.len() as f64)
}

/// Fraction of pairs with ‖a − â‖∞ ≤ τ.
pub fn task_score(pairs: &[(ActionVector, ActionVector)], tau: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain {
            op: "task_score",
            value: tau,
        });
    }
    let ok = pairs
        .iter()
        .filter(|(a, b)| a.to_array().iter().zip(b.to_array()).all(|(x, y)| (x - y).abs() <= tau))
        .count();
    Ok(ok as f64 / pairs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliffReport {
    pub threshold: Option<f64>,
    pub plateau: f64,
    pub diagnostic: Option<String>,
}

/// Highest SNR whose score falls below `plateau_fraction` of the plateau
/// (mean of the two best scores), interpolated toward the next grid point.
pub fn detect_cliff(sweep: &[(f64, f64)], plateau_fraction: f64) -> Result<CliffReport> {
    if sweep.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 sweep points, got {}",
            sweep.len()
        )));
    }
    if sweep.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidArgument("sweep SNRs must be strictly ascending".into()));
    }
    if sweep.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::NonFinite("sweep point"));
    }
    let mut scores: Vec<f64> = sweep.iter().map(|p| p.1).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    let plateau = 0.5 * (scores[0] + scores[1]);
    if plateau <= 0.0 {
        return Ok(CliffReport {
            threshold: None,
            plateau,
            diagnostic: Some("zero plateau: no score above zero".into()),
        });
    }
    let cut = plateau_fraction * plateau;
    let Some(i) = sweep.iter().rposition(|p| p.1 < cut) else {
        return Ok(CliffReport {
            threshold: None,
            plateau,
            diagnostic: None,
        });
    };
    let (s0, v0) = sweep[i];
    let threshold = match sweep.get(i + 1) {
        Some(&(s1, v1)) => s0 + (cut - v0) / (v1 - v0) * (s1 - s0),
        None => s0,
    };
    Ok(CliffReport {
        threshold: Some(threshold),
        plateau,
        diagnostic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn img(seed: u64, c: usize, h: usize, w: usize) -> ImageTensor {
        let mut rng = StreamRng::new(seed, 0);
        ImageTensor::new(c, h, w, (0..c * h * w).map(|_| rng.uniform()).collect()).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let x = img(1, 1, 4, 4);
        assert_eq!(psnr(&x, &x).unwrap(), f64::INFINITY);
        let a = ImageTensor::filled(1, 2, 2, 0.2).unwrap();
        let b = ImageTensor::filled(1, 2, 2, 0.3).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let z = ImageTensor::filled(1, 2, 2, 0.0).unwrap();
        let h = ImageTensor::filled(1, 2, 2, 0.5).unwrap();
        assert!((psnr(&z, &h).unwrap() - 6.0206).abs() < 1e-4);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!(psnr(&a, &img(2, 1, 4, 4)).is_err());
    }

    #[test]
    fn ms_ssim_identity_and_range() {
        for s in 0..20 {
            let x = img(s, 3, 32, 64);
            assert_eq!(ms_ssim(&x, &x, 3, 7).unwrap(), 1.0);
            let y = img(s + 100, 3, 32, 64);
            let v = ms_ssim(&x, &y, 3, 7).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(ms_ssim(&img(0, 1, 16, 16), &img(1, 1, 16, 16), 3, 7).is_err());
    }

    #[test]
    fn ms_ssim_inverted_image_is_low() {
        let data: Vec<f64> = (0..32 * 64)
            .map(|i| {
                if ((i % 64) / 4 + (i / 64) / 4) % 2 == 0 {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        let x = ImageTensor::new(1, 32, 64, data.clone()).unwrap();
        let inv = ImageTensor::new(1, 32, 64, data.iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ms_ssim(&x, &inv, 3, 7).unwrap() < 0.2);
    }

    #[test]
    fn ms_ssim_falls_with_noise() {
        let x = ImageTensor::new(
            1,
            32,
            64,
            (0..32 * 64)
                .map(|i| 0.5 + 0.4 * ((i % 64) as f64 * 0.2).sin())
                .collect(),
        )
        .unwrap();
        let mut rng = StreamRng::new(3, 0);
        let noise: Vec<f64> = (0..x.len()).map(|_| rng.gaussian()).collect();
        let vals: Vec<f64> = [0.01, 0.03, 0.1, 0.2, 0.4]
            .iter()
            .map(|&s| {
                let y =
                    ImageTensor::from_clamped(1, 32, 64, x.data().iter().zip(&noise).map(|(a, n)| a + s * n).collect())
                        .unwrap();
                ms_ssim(&x, &y, 3, 7).unwrap()
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }

    #[test]
    fn action_metrics() {
        let a = ActionVector::new(1.0, 0.0, 0.0);
        let z = ActionVector::new(0.0, 0.0, 0.0);
        assert_eq!(action_mse(&a, &a), 0.0);
        assert!((action_mse(&a, &z) - 1.0 / 3.0).abs() < 1e-15);
        let pairs = vec![(a, a), (a, z)];
        assert!((batch_action_mse(&pairs).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(task_score(&pairs, 0.05).unwrap(), 0.5);
        assert_eq!(task_score(&[(a, a)], 0.05).unwrap(), 1.0);
        assert_eq!(task_score(&[(a, z)], 0.05).unwrap(), 0.0);
        assert!(task_score(&[], 0.05).is_err());
        assert!(task_score(&pairs, 2.0).unwrap() >= task_score(&pairs, 0.05).unwrap());
    }

    #[test]
    fn cliff_examples() {
        let step = [(-10.0, 0.0), (-5.0, 0.0), (0.0, 1.0), (5.0, 1.0)];
        let r = detect_cliff(&step, 0.5).unwrap();
        assert_eq!(r.threshold, Some(-2.5));
        let gentle = [(-10.0, 0.8), (-5.0, 0.85), (0.0, 0.9), (5.0, 0.95)];
        assert_eq!(detect_cliff(&gentle, 0.5).unwrap().threshold, None);
        let zero = [(-10.0, 0.0), (-5.0, 0.0), (0.0, 0.0), (5.0, 0.0)];
        let r = detect_cliff(&zero, 0.5).unwrap();
        assert!(r.threshold.is_none() && r.diagnostic.is_some());
        assert!(detect_cliff(&step[..3], 0.5).is_err());
        assert!(detect_cliff(&[(0.0, 1.0), (-1.0, 1.0), (2.0, 1.0), (3.0, 1.0)], 0.5).is_err());
        let scaled: Vec<(f64, f64)> = step.iter().map(|&(s, v)| (s, 7.5 * v)).collect();
        assert_eq!(detect_cliff(&scaled, 0.5).unwrap().threshold, Some(-2.5));
    }
}
