//! Concentration and reconstruction metrics.

use crate::error::{Error, Result};
use crate::signal::Signal;

/// Which quantity a time-frequency map holds when its entropy is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapConvention {
    Magnitude,
    Energy,
}

impl MapConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            MapConvention::Magnitude => "magnitude",
            MapConvention::Energy => "energy",
        }
    }
}

/// One row of a comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub method: String,
    pub renyi_bits: f64,
    pub rmse: Option<f64>,
    pub convention: MapConvention,
}

impl MetricReport {
    /// `method,renyi_bits,rmse`; absent RMSE is an empty field.
    pub fn csv_row(&self) -> String {
        let rmse = self.rmse.map(|r| format!("{r:.9}")).unwrap_or_default();
        format!("{},{:.9},{}", self.method, self.renyi_bits, rmse)
    }
}

pub const REPORT_HEADER: &str = "method,renyi_bits,rmse";

/// Rényi entropy of order `alpha` in bits of the normalized distribution
/// `C / ΣC`.
pub fn renyi_entropy(values: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) || alpha == 1.0 {
        return Err(Error::InvalidArgument(format!("alpha must be positive and != 1, got {alpha}")));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("distribution entries must be finite and >= 0".into()));
    }
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::EmptyDistribution);
    }
    let sum: f64 = values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| (v / total).powf(alpha))
        .sum();
    Ok(sum.log2() / (1.0 - alpha))
}

/// Third-order Rényi entropy.
pub fn renyi3(values: &[f64]) -> Result<f64> {
    renyi_entropy(values, 3.0)
}

pub fn rmse(estimate: &Signal, truth: &Signal) -> Result<f64> {
    rmse_samples(estimate.samples(), truth.samples())
}

pub fn rmse_samples(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::ShapeMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("rmse of empty signals".into()));
    }
    let mse = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(mse.sqrt())
}
