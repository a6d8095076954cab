use crate::error::{Error, Result};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
}

/// Compares an analytic gradient against central differences.
///
/// Per coordinate the error is `|g − (f(p+h) − f(p−h))/2h| / (|g| + 1e-8)`;
/// the maximum over coordinates is reported.
pub fn finite_difference_check<F>(mut f: F, point: &[f64], analytic: &[f64], h: f64) -> Result<FdReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if point.len() != analytic.len() {
        return Err(Error::DimensionMismatch {
            expected: point.len(),
            actual: analytic.len(),
        });
    }
    let mut p = point.to_vec();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst_index: 0,
    };
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + h;
        let fp = f(&p)?;
        p[i] = orig - h;
        let fm = f(&p)?;
        p[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite("finite difference evaluation"));
        }
        let fd = (fp - fm) / (2.0 * h);
        let err = (analytic[i] - fd).abs() / (analytic[i].abs() + 1e-8);
        if err > report.max_rel_error {
            report = FdReport {
                max_rel_error: err,
                worst_index: i,
            };
        }
    }
    Ok(report)
}

/// Shifts every coordinate by a seeded offset in ±[magnitude/2, magnitude]
/// so no coordinate sits exactly on a non-differentiable point such as a
/// relu kink at zero.
pub fn pre_perturb(point: &[f64], magnitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = StreamRng::new(seed, 0xFD);
    point
        .iter()
        .map(|&x| {
            let m = rng.uniform_range(0.5 * magnitude, magnitude);
            if rng.bit() {
                x + m
            } else {
                x - m
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_is_exact() {
        // f(p) = pᵀAp with A symmetric, ∇f = 2Ap
        let a = [[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 3.0]];
        let f = |p: &[f64]| -> Result<f64> {
            let mut s = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    s += p[i] * a[i][j] * p[j];
                }
            }
            Ok(s)
        };
        let p = [0.7, -1.2, 0.4];
        let g: Vec<f64> = (0..3)
            .map(|i| 2.0 * (0..3).map(|j| a[i][j] * p[j]).sum::<f64>())
            .collect();
        let r = finite_difference_check(f, &p, &g, 1e-4).unwrap();
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn kink_is_avoided_by_perturbation() {
        let f = |p: &[f64]| -> Result<f64> { Ok(p.iter().map(|v| v.max(0.0)).sum()) };
        let at_kink = [0.0, 0.0];
        let raw = finite_difference_check(f, &at_kink, &[0.0, 0.0], 1e-6).unwrap();
        assert!(raw.max_rel_error.is_finite());

        let p = pre_perturb(&at_kink, 1e-3, 4);
        let g: Vec<f64> = p.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect();
        let r = finite_difference_check(f, &p, &g, 1e-6).unwrap();
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn non_finite_evaluation_is_an_error() {
        let f = |p: &[f64]| -> Result<f64> { Ok(1.0 / p[0]) };
        assert!(finite_difference_check(f, &[0.0], &[0.0], 0.0).is_err());
    }
}
