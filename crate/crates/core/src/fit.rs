//! Least-squares power-law fits in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{DqapError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    /// Standard error of the exponent.
    pub stderr: f64,
    pub prefactor: f64,
}

/// Fits `y = A x^p` by linear regression of `ln y` on `ln x`.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit> {
    if xs.len() != ys.len() {
        return Err(DqapError::DimensionMismatch {
            expected: format!("{} values", xs.len()),
            actual: format!("{}", ys.len()),
        });
    }
    if xs.len() < 3 {
        return Err(DqapError::InvalidParams("a power-law fit needs at least three points".into()));
    }
    if let Some((x, y)) = xs.iter().zip(ys).find(|(x, y)| !(**x > 0.0 && **y > 0.0)) {
        return Err(DqapError::InvalidParams(format!("non-positive point ({x}, {y})")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DqapError::InvalidParams("all abscissae are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(PowerLawFit { exponent: slope, stderr, prefactor: intercept.exp() })
}
