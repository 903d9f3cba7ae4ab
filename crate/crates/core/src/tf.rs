//! Rasterized time-frequency matrices and their CSV layout.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Non-negative time × frequency matrix. `values` is row-major with one row
/// per time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct TfMatrix {
    times: Vec<f64>,
    freqs: Vec<f64>,
    values: Vec<f64>,
}

impl TfMatrix {
    pub fn new(times: Vec<f64>, freqs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != times.len() * freqs.len() {
            return Err(Error::ShapeMismatch {
                expected: times.len() * freqs.len(),
                found: values.len(),
            });
        }
        if !strictly_increasing(&times) || !strictly_increasing(&freqs) {
            return Err(Error::InvalidArgument("axes must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("entries must be finite and non-negative".into()));
        }
        Ok(Self {
            times,
            freqs,
            values,
        })
    }

    pub fn zeros(times: Vec<f64>, freqs: Vec<f64>) -> Result<Self> {
        let n = times.len() * freqs.len();
        Self::new(times, freqs, vec![0.0; n])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs.len()
    }

    pub fn get(&self, time: usize, freq: usize) -> f64 {
        self.values[time * self.freqs.len() + freq]
    }

    pub fn row(&self, time: usize) -> &[f64] {
        let nf = self.freqs.len();
        &self.values[time * nf..(time + 1) * nf]
    }

    pub(crate) fn add(&mut self, time: usize, freq: usize, value: f64) {
        let nf = self.freqs.len();
        self.values[time * nf + freq] += value;
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// CSV export: `time_axis`, the time values, `freq_axis`, the frequency
    /// values, then the matrix one time row per line, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("time_axis\n");
        push_row(&mut out, &self.times);
        out.push_str("freq_axis\n");
        push_row(&mut out, &self.freqs);
        for t in 0..self.n_times() {
            push_row(&mut out, self.row(t));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|p| p[0] < p[1])
}

fn push_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:.8e}");
    }
    out.push('\n');
}

/// Uniform frequency axis `k · rate / bins` for `k = 0..bins`.
pub(crate) fn uniform_axis(bins: usize, span: f64) -> Vec<f64> {
    (0..bins).map(|k| k as f64 * span / bins as f64).collect()
}
