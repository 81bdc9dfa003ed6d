//! Least-squares power-law fits on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    /// `(ln x, ln value)` pairs the fit was computed on.
    pub points: Vec<(f64, f64)>,
}

impl FitResult {
    /// Prefactor `C` of `value ~ C x^slope`.
    pub fn prefactor(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Ordinary least squares of `ln value` against `ln x`.
///
/// Requires at least three points with positive abscissa and value.
pub fn fit_scaling_exponent(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return Err(Error::invalid(format!(
            "a scaling fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut logs = Vec::with_capacity(points.len());
    for &(x, v) in points {
        if !(x > 0.0) || !(v > 0.0) || !x.is_finite() || !v.is_finite() {
            return Err(Error::invalid(format!(
                "scaling fit needs positive finite data, got ({x}, {v})"
            )));
        }
        logs.push((x.ln(), v.ln()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("scaling fit needs distinct abscissae"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(FitResult {
        slope,
        intercept,
        residual_rms,
        points: logs,
    })
}

/// Exponent from a single pair: `ln(v1 / v0) / ln(x1 / x0)`.
pub fn pairwise_exponent(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.1 / a.1).ln() / (b.0 / a.0).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [0.2_f64, 0.1, 0.05].iter().map(|&e| (e, e.powf(4.5))).collect();
        let fit = fit_scaling_exponent(&pts).unwrap();
        assert!((fit.slope - 4.5).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn one_perturbed_value() {
        // Closed-form OLS response: d slope = ln(1.1) (x_i - mean) / Sxx.
        let eps = [0.2, 0.1, 0.05];
        let logs: Vec<f64> = eps.iter().map(|e: &f64| e.ln()).collect();
        let mean = logs.iter().sum::<f64>() / 3.0;
        let sxx: f64 = logs.iter().map(|x| (x - mean).powi(2)).sum();
        for i in 0..3 {
            let pts: Vec<_> = eps
                .iter()
                .enumerate()
                .map(|(j, &e)| (e, e.powf(4.5) * if i == j { 1.1 } else { 1.0 }))
                .collect();
            let fit = fit_scaling_exponent(&pts).unwrap();
            let expected = 4.5 + 1.1_f64.ln() * (logs[i] - mean) / sxx;
            assert!((fit.slope - expected).abs() < 1e-12);
            assert!((fit.slope - 4.5).abs() < 0.1);
        }
    }

    #[test]
    fn constant_values_have_zero_slope() {
        let fit = fit_scaling_exponent(&[(0.2, 3.0), (0.1, 3.0), (0.05, 3.0)]).unwrap();
        assert!(fit.slope.abs() < 1e-14);
        assert!((fit.prefactor() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_scaling_exponent(&[(0.1, 1.0), (0.2, 2.0)]).is_err());
        assert!(fit_scaling_exponent(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_any_power_law(slope in -3.0f64..6.0, c in 0.01f64..100.0) {
            let pts: Vec<_> = [0.3_f64, 0.2, 0.1, 0.05].iter().map(|&e| (e, c * e.powf(slope))).collect();
            let fit = fit_scaling_exponent(&pts).unwrap();
            prop_assert!((fit.slope - slope).abs() < 1e-10);
            prop_assert!((fit.prefactor() / c - 1.0).abs() < 1e-9);
        }
    }
}
