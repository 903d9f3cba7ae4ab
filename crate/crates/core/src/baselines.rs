//! Reference time-frequency methods: STFT magnitude, spectrogram
//! reassignment, and per-window ℓ1 sparse coding over an oversampled DFT
//! dictionary.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft;
use crate::frames::FramePlan;
use crate::signal::ComplexSignal;
use crate::sparse::{solve_lasso, FourierDictionary};
use crate::tf::{uniform_axis, TfMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn check_inputs(signal: &ComplexSignal, plan: &FramePlan, nfft: usize) -> Result<()> {
    if nfft < plan.frame_length() {
        return Err(Error::InvalidArgument(format!(
            "nfft {nfft} is smaller than the frame length {}",
            plan.frame_length()
        )));
    }
    if signal.len() != plan.signal_length() {
        return Err(Error::ShapeMismatch {
            expected: plan.signal_length(),
            found: signal.len(),
        });
    }
    Ok(())
}

fn segment(signal: &ComplexSignal, plan: &FramePlan, w: usize) -> Vec<Complex64> {
    let x = signal.samples();
    let start = w * plan.hop();
    (0..plan.frame_length())
        .map(|n| x.get(start + n).copied().unwrap_or(ZERO))
        .collect()
}

fn windowed_spectrum(seg: &[Complex64], win: &[f64], nfft: usize) -> Vec<Complex64> {
    let weighted: Vec<Complex64> = seg.iter().zip(win).map(|(x, w)| x * *w).collect();
    fft::forward_padded(&weighted, nfft)
}

fn frame_times(plan: &FramePlan, sample_rate: f64) -> Vec<f64> {
    (0..plan.num_frames())
        .map(|w| plan.frame_center(w) / sample_rate)
        .collect()
}

/// `|Σ_n w[n] y[wH + n] e^{-i2πkn/nfft}|` for every frame `w` and bin `k`.
pub fn stft(signal: &ComplexSignal, plan: &FramePlan, nfft: usize) -> Result<TfMatrix> {
    check_inputs(signal, plan, nfft)?;
    let win = plan.window();
    let rows: Vec<Vec<f64>> = (0..plan.num_frames())
        .into_par_iter()
        .map(|w| {
            windowed_spectrum(&segment(signal, plan, w), win, nfft)
                .into_iter()
                .map(|c| c.norm())
                .collect()
        })
        .collect();
    let fs = signal.sample_rate();
    TfMatrix::new(frame_times(plan, fs), uniform_axis(nfft, fs), rows.concat())
}

/// Spectrogram reassignment.
///
/// Each cell's energy `|F|²` moves to its local center of gravity, estimated
/// from STFTs with the time-weighted window and the window derivative. Time
/// lands on the nearest frame (clamped to the signal), frequency on the
/// nearest bin (circularly). Cells under `1e-12` of the peak energy are
/// dropped.
pub fn reassign(signal: &ComplexSignal, plan: &FramePlan, nfft: usize) -> Result<TfMatrix> {
    check_inputs(signal, plan, nfft)?;
    let l = plan.frame_length();
    let center = (l as f64 - 1.0) / 2.0;
    let win = plan.window();
    let tw: Vec<f64> = win.iter().enumerate().map(|(n, w)| (n as f64 - center) * w).collect();
    let dw = plan.window_kind().derivative(l);
    let w_count = plan.num_frames();

    let per_frame: Vec<[Vec<Complex64>; 3]> = (0..w_count)
        .into_par_iter()
        .map(|w| {
            let seg = segment(signal, plan, w);
            [
                windowed_spectrum(&seg, win, nfft),
                windowed_spectrum(&seg, &tw, nfft),
                windowed_spectrum(&seg, &dw, nfft),
            ]
        })
        .collect();
    let peak = per_frame
        .iter()
        .flat_map(|f| f[0].iter().map(|c| c.norm_sqr()))
        .fold(0.0, f64::max);
    let fs = signal.sample_rate();
    let mut out = TfMatrix::zeros(frame_times(plan, fs), uniform_axis(nfft, fs))?;
    if peak == 0.0 {
        return Ok(out);
    }
    let floor = 1e-12 * peak;
    let hop = plan.hop() as f64;
    for (w, [f, ft, fd]) in per_frame.iter().enumerate() {
        let t = plan.frame_center(w);
        for k in 0..nfft {
            let energy = f[k].norm_sqr();
            if energy < floor {
                continue;
            }
            let t_hat = t + (ft[k] * f[k].conj()).re / energy;
            let f_hat = k as f64 / nfft as f64
                - (fd[k] * f[k].conj()).im / (2.0 * std::f64::consts::PI * energy);
            let frame_idx = ((t_hat - center) / hop).round().clamp(0.0, (w_count - 1) as f64) as usize;
            let bin = ((f_hat * nfft as f64).round() as i64).rem_euclid(nfft as i64) as usize;
            out.add(frame_idx, bin, energy);
        }
    }
    Ok(out)
}

/// `λ` on the same footing as [`crate::ast::calibrated_tau`]: the dual norm
/// of analytic white noise after windowing, `√L · default_tau(σ_x, L)` with
/// `σ_x² = 2σ² · mean(window²)`.
pub fn calibrated_lambda(sigma: f64, plan: &FramePlan) -> Result<f64> {
    let l = plan.frame_length();
    let mean_sq = plan.window().iter().map(|w| w * w).sum::<f64>() / l as f64;
    Ok((l as f64).sqrt() * crate::ast::default_tau(sigma * (2.0 * mean_sq).sqrt(), l)?)
}

/// Result of [`stft_l1`].
#[derive(Debug, Clone)]
pub struct StftL1 {
    /// `|c|` per window over `dict_oversample · L` bins.
    pub tf: TfMatrix,
    /// `D (V c)`, the de-windowed resynthesis.
    pub resynthesis: ComplexSignal,
    /// Per-window coefficients.
    pub coefficients: Vec<Vec<Complex64>>,
    pub objective_traces: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
}

/// Per window, `min_c ½‖x_w − V c‖² + λ‖c‖₁` over `dict_oversample · L`
/// uniformly spaced DFT atoms, with `x_w` the windowed segment.
pub fn stft_l1(
    signal: &ComplexSignal,
    plan: &FramePlan,
    dict_oversample: usize,
    lambda: f64,
    max_iters: usize,
) -> Result<StftL1> {
    if dict_oversample == 0 {
        return Err(Error::InvalidArgument("dict_oversample must be at least 1".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let l = plan.frame_length();
    let g = dict_oversample * l;
    check_inputs(signal, plan, g)?;
    let dict = FourierDictionary::new(l, g)?;
    let win = plan.window();

    let solutions = (0..plan.num_frames())
        .into_par_iter()
        .map(|w| {
            let x: Vec<Complex64> = segment(signal, plan, w)
                .iter()
                .zip(win)
                .map(|(v, wv)| v * *wv)
                .collect();
            solve_lasso(&dict, &x, lambda, max_iters, 1e-6)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::with_capacity(plan.num_frames() * g);
    let mut stacked = Vec::with_capacity(plan.stacked_len());
    for s in &solutions {
        values.extend(s.coefficients.iter().map(|c| c.norm()));
        stacked.extend(dict.synthesize(&s.coefficients));
    }
    let mut resynth = vec![ZERO; plan.signal_length()];
    plan.apply(&stacked, &mut resynth);
    let fs = signal.sample_rate();
    Ok(StftL1 {
        tf: TfMatrix::new(frame_times(plan, fs), uniform_axis(g, fs), values)?,
        resynthesis: ComplexSignal::new(resynth, fs)?,
        converged: solutions.iter().map(|s| s.converged).collect(),
        objective_traces: solutions.iter().map(|s| s.objective_trace.clone()).collect(),
        coefficients: solutions.into_iter().map(|s| s.coefficients).collect(),
    })
}
