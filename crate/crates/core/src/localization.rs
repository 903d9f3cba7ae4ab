//! Support localization from the dual solution.
//!
//! For a solved window the dual polynomial `H_w(f) = |⟨ẑ_w, a(f)⟩|` is bounded
//! by `τ` and touches it exactly at the support frequencies. It is evaluated
//! on a fine grid by a zero-padded FFT, peaks within a relative `ε` of `τ`
//! are accepted, refined by log-parabolic interpolation, and given amplitudes
//! by least squares against the denoised segment.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::ast::AstSolution;
use crate::error::{Error, Result};
use crate::fft;
use crate::frames::FramePlan;
use crate::tf::{uniform_axis, TfMatrix};

/// Dual segment `ẑ_w` together with the regularization it certifies.
#[derive(Debug, Clone)]
pub struct DualWindow {
    pub z: Vec<Complex64>,
    pub tau: f64,
}

/// Modulus of the dual polynomial on `oversample · L` uniformly spaced
/// frequencies, `H[k] = |Σ_n z[n] e^{-i2πnk/(oversample·L)}|`.
pub fn dual_polynomial(dw: &DualWindow, oversample: usize) -> Result<Vec<f64>> {
    if oversample < 4 || !oversample.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "oversample must be a power of two >= 4, got {oversample}"
        )));
    }
    let spectrum = fft::forward_padded(&dw.z, oversample * dw.z.len());
    Ok(spectrum.into_iter().map(|c| c.norm()).collect())
}

/// A grid local maximum of the dual polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPeak {
    pub index: usize,
    /// Cycles per sample, in `[0, 1)`.
    pub frequency: f64,
    pub value: f64,
}

/// Strict local maxima of `h` (circular) at or above `(1 − ε)τ`, thinned so
/// that no two survivors are closer than `1/(2L)` cycles/sample. Inside a
/// guard band the value closest to `τ` wins.
pub fn detect_support(h: &[f64], segment_length: usize, tau: f64, epsilon: f64) -> Result<Vec<GridPeak>> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    let m = h.len();
    if m < 3 || segment_length == 0 {
        return Ok(Vec::new());
    }
    let threshold = (1.0 - epsilon) * tau;
    let mut candidates: Vec<GridPeak> = (0..m)
        .filter(|&k| {
            let prev = h[(k + m - 1) % m];
            let next = h[(k + 1) % m];
            h[k] > prev && h[k] > next && h[k] >= threshold
        })
        .map(|k| GridPeak {
            index: k,
            frequency: k as f64 / m as f64,
            value: h[k],
        })
        .collect();
    candidates.sort_by(|a, b| {
        (a.value - tau)
            .abs()
            .total_cmp(&(b.value - tau).abs())
            .then(a.index.cmp(&b.index))
    });
    let guard = 1.0 / (2.0 * segment_length as f64);
    let mut accepted: Vec<GridPeak> = Vec::new();
    for c in candidates {
        if accepted
            .iter()
            .all(|a| circular_distance(a.frequency, c.frequency) >= guard)
        {
            accepted.push(c);
        }
    }
    accepted.sort_by_key(|p| p.index);
    Ok(accepted)
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

/// Sub-bin peak location by a parabola through the log-magnitudes of the
/// three bins around `peak_index`. Boundary indices are returned unrefined.
pub fn refine_peak(h: &[f64], peak_index: usize) -> Result<f64> {
    let m = h.len();
    if peak_index >= m {
        return Err(Error::InvalidArgument(format!("peak index {peak_index} out of range")));
    }
    let grid = peak_index as f64 / m as f64;
    if peak_index == 0 || peak_index + 1 == m {
        return Ok(grid);
    }
    let (a, b, c) = (h[peak_index - 1], h[peak_index], h[peak_index + 1]);
    if !(b > a && b > c) {
        return Err(Error::InvalidArgument(format!("index {peak_index} is not a strict local maximum")));
    }
    let offset = if a > 0.0 && c > 0.0 {
        let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
        0.5 * (la - lc) / (la - 2.0 * lb + lc)
    } else {
        0.5 * (a - c) / (a - 2.0 * b + c)
    };
    Ok((peak_index as f64 + offset.clamp(-0.5, 0.5)) / m as f64)
}

/// Least-squares amplitudes `c` minimizing `‖x − V c‖₂` for atoms at `freqs`.
pub fn least_squares_amplitudes(x: &[Complex64], freqs: &[f64]) -> Result<Vec<Complex64>> {
    let l = x.len();
    if freqs.is_empty() {
        return Ok(Vec::new());
    }
    if freqs.len() >= l {
        return Err(Error::InvalidArgument(format!(
            "{} frequencies for a segment of length {l}",
            freqs.len()
        )));
    }
    let min_sep = 1.0 / (4.0 * l as f64);
    for (i, &fi) in freqs.iter().enumerate() {
        for &fj in &freqs[i + 1..] {
            if circular_distance(fi, fj) < min_sep {
                return Err(Error::IllConditioned(fi, fj));
            }
        }
    }
    let v = vandermonde(freqs, l);
    let svd = v.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax {
        let (fi, fj) = closest_pair(freqs);
        return Err(Error::IllConditioned(fi, fj));
    }
    let b = DVector::from_column_slice(x);
    let c = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(c.iter().copied().collect())
}

fn closest_pair(freqs: &[f64]) -> (f64, f64) {
    let mut best = (freqs[0], freqs[0], f64::INFINITY);
    for (i, &fi) in freqs.iter().enumerate() {
        for &fj in &freqs[i + 1..] {
            let d = circular_distance(fi, fj);
            if d < best.2 {
                best = (fi, fj, d);
            }
        }
    }
    (best.0, best.1)
}

fn vandermonde(freqs: &[f64], l: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(l, freqs.len(), |n, k| {
        Complex64::from_polar(1.0, 2.0 * PI * freqs[k] * n as f64)
    })
}

/// One component of a Vandermonde decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub frequency: f64,
    pub power: f64,
}

/// Writes a rank-deficient PSD Toeplitz matrix as `Σ p_k a(f_k) a(f_k)*`.
///
/// Frequencies come from the rotational invariance of the dominant
/// eigenspace (shift-invariance / matrix-pencil); powers from a least-squares
/// fit of the first column.
pub fn vandermonde_decompose(t: &DMatrix<Complex64>, rank_tol: f64) -> Result<Vec<SpectralLine>> {
    if !t.is_square() {
        return Err(Error::InvalidArgument("expected a square matrix".into()));
    }
    let l = t.nrows();
    let mut h = t.clone();
    for j in 0..l {
        for k in j + 1..l {
            let avg = (h[(j, k)] + h[(k, j)].conj()) * 0.5;
            h[(j, k)] = avg;
            h[(k, j)] = avg.conj();
        }
        h[(j, j)].im = 0.0;
    }
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let lambda_max = eig.eigenvalues.max();
    if lambda_max <= 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..l).filter(|&i| eig.eigenvalues[i] > rank_tol * lambda_max).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let k = order.len();
    if k >= l {
        return Err(Error::FullRank { rank: k });
    }
    let mut us = DMatrix::<Complex64>::zeros(l, k);
    for (c, &i) in order.iter().enumerate() {
        us.set_column(c, &eig.eigenvectors.column(i));
    }
    let upper = us.rows(0, l - 1).into_owned();
    let lower = us.rows(1, l - 1).into_owned();
    let phi = upper
        .svd(true, true)
        .solve(&lower, 1e-14)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let roots = phi
        .eigenvalues()
        .ok_or_else(|| Error::Eigen("shift operator eigenvalues did not converge".into()))?;
    let mut freqs: Vec<f64> = roots
        .iter()
        .map(|z| (z.arg() / (2.0 * PI)).rem_euclid(1.0))
        .collect();
    freqs.sort_by(f64::total_cmp);

    let v = vandermonde(&freqs, l);
    let first_col = DVector::from_iterator(l, (0..l).map(|j| t[(j, 0)]));
    let p = v
        .svd(true, true)
        .solve(&first_col, 1e-14)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(freqs
        .into_iter()
        .zip(p.iter())
        .map(|(frequency, pk)| SpectralLine {
            frequency,
            power: pk.re.max(0.0),
        })
        .collect())
}

/// Accepted support of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSupport {
    pub window_index: usize,
    /// Strictly increasing, cycles/sample in `[0, 1)`.
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<Complex64>,
    /// Dual polynomial value at each accepted grid peak.
    pub certificates: Vec<f64>,
    /// Maximum of the dual polynomial over the whole grid.
    pub dual_max: f64,
}

/// Localization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizeParams {
    pub oversample: usize,
    pub epsilon: f64,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        Self {
            oversample: 64,
            epsilon: 1e-2,
        }
    }
}

/// Dual polynomial → peaks → refined frequencies → amplitudes, per window.
pub fn localize_window(
    window_index: usize,
    x_hat_w: &[Complex64],
    z_hat_w: &[Complex64],
    tau: f64,
    params: &LocalizeParams,
) -> Result<WindowSupport> {
    let l = x_hat_w.len();
    let h = dual_polynomial(
        &DualWindow {
            z: z_hat_w.to_vec(),
            tau,
        },
        params.oversample,
    )?;
    let dual_max = h.iter().copied().fold(0.0, f64::max);
    let peaks = detect_support(&h, l, tau, params.epsilon)?;
    let mut pairs: Vec<(f64, f64)> = peaks
        .iter()
        .map(|p| {
            let f = refine_peak(&h, p.index).unwrap_or(p.frequency);
            (f.rem_euclid(1.0), p.value)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.dedup_by(|a, b| a.0 == b.0);
    // More peaks than the segment can resolve: keep the strongest L - 1.
    if pairs.len() >= l {
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        pairs.truncate(l.saturating_sub(1));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    let frequencies: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let certificates: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let amplitudes = least_squares_amplitudes(x_hat_w, &frequencies)?;
    Ok(WindowSupport {
        window_index,
        frequencies,
        amplitudes,
        certificates,
        dual_max,
    })
}

/// [`localize_window`] over every window of a solution.
pub fn localize_solution(
    solution: &AstSolution,
    num_frames: usize,
    tau: f64,
    params: &LocalizeParams,
) -> Result<Vec<WindowSupport>> {
    (0..num_frames)
        .map(|w| localize_window(w, solution.frame(w), solution.dual_frame(w), tau, params))
        .collect()
}

/// One entry of the sparse time-frequency distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfPoint {
    pub window: usize,
    pub time_s: f64,
    pub freq_hz: f64,
    pub magnitude: f64,
    pub certificate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfDistribution {
    pub sparse: Vec<TfPoint>,
    pub raster: TfMatrix,
}

impl TfDistribution {
    pub fn sparse_csv(&self) -> String {
        let mut out = String::from("window,time_s,freq_hz,magnitude,certificate\n");
        for p in &self.sparse {
            let _ = writeln!(
                out,
                "{},{:.8e},{:.8e},{:.8e},{:.8e}",
                p.window, p.time_s, p.freq_hz, p.magnitude, p.certificate
            );
        }
        out
    }

    pub fn write_sparse_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.sparse_csv())?;
        Ok(())
    }
}

/// Places every support at its window-center time and nearest frequency bin
/// of a uniform `n_freq_bins` grid over `[0, sample_rate)`.
pub fn assemble_tfd(
    supports: &[WindowSupport],
    plan: &FramePlan,
    sample_rate: f64,
    n_freq_bins: usize,
) -> Result<TfDistribution> {
    if n_freq_bins < plan.frame_length() {
        return Err(Error::InvalidArgument(format!(
            "n_freq_bins {n_freq_bins} below frame length {}",
            plan.frame_length()
        )));
    }
    let times: Vec<f64> = (0..plan.num_frames())
        .map(|w| plan.frame_center(w) / sample_rate)
        .collect();
    let mut raster = TfMatrix::zeros(times.clone(), uniform_axis(n_freq_bins, sample_rate))?;
    let mut sparse = Vec::new();
    for s in supports {
        if s.window_index >= plan.num_frames() {
            return Err(Error::InvalidArgument(format!("window index {} out of range", s.window_index)));
        }
        for ((&f, c), &cert) in s.frequencies.iter().zip(&s.amplitudes).zip(&s.certificates) {
            let magnitude = c.norm();
            let bin = ((f.rem_euclid(1.0) * n_freq_bins as f64).round() as usize) % n_freq_bins;
            raster.add(s.window_index, bin, magnitude);
            sparse.push(TfPoint {
                window: s.window_index,
                time_s: times[s.window_index],
                freq_hz: f * sample_rate,
                magnitude,
                certificate: cert,
            });
        }
    }
    Ok(TfDistribution { sparse, raster })
}
