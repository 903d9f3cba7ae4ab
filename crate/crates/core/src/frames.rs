//! Window framing and the weighted overlap-add de-window operator `D`.
//!
//! `frame` multiplies each segment by the analysis window. `D` overlap-adds
//! window-weighted segments and divides by the per-sample sum of squared
//! window values, so `D · frame(y) = y` holds exactly whenever every sample is
//! covered. `D` has one nonzero per column, which makes `D D*` diagonal:
//! `(D D*)[t, t] = 1 / synthesis_norm[t]`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Analysis window shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// `exp(-½((n - (L-1)/2) / (sigma_ratio · L))²)`.
    Gaussian { sigma_ratio: f64 },
    Rectangular,
}

impl Window {
    /// Gaussian for finite ratios, rectangular for the `ratio → ∞` limit.
    pub fn from_sigma_ratio(sigma_ratio: f64) -> Self {
        if sigma_ratio.is_infinite() && sigma_ratio > 0.0 {
            Window::Rectangular
        } else {
            Window::Gaussian { sigma_ratio }
        }
    }

    pub fn samples(&self, length: usize) -> Vec<f64> {
        match *self {
            Window::Rectangular => vec![1.0; length],
            Window::Gaussian { sigma_ratio } => {
                let center = (length as f64 - 1.0) / 2.0;
                let width = sigma_ratio * length as f64;
                (0..length)
                    .map(|n| (-0.5 * ((n as f64 - center) / width).powi(2)).exp())
                    .collect()
            }
        }
    }

    /// Time derivative of the window (per sample), in closed form.
    pub fn derivative(&self, length: usize) -> Vec<f64> {
        match *self {
            Window::Rectangular => vec![0.0; length],
            Window::Gaussian { sigma_ratio } => {
                let center = (length as f64 - 1.0) / 2.0;
                let width = sigma_ratio * length as f64;
                self.samples(length)
                    .into_iter()
                    .enumerate()
                    .map(|(n, w)| -(n as f64 - center) / (width * width) * w)
                    .collect()
            }
        }
    }
}

/// Framing geometry: frame length `L`, hop `H`, `W` frames with
/// `(W - 1) H + L = N` over the (possibly zero-padded) length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePlan {
    frame_length: usize,
    hop: usize,
    num_frames: usize,
    window_kind: Window,
    window: Vec<f64>,
    synthesis_norm: Vec<f64>,
    padded_length: usize,
    original_length: usize,
}

impl FramePlan {
    pub fn new(signal_length: usize, frame_length: usize, hop: usize, window: Window) -> Result<Self> {
        if frame_length == 0 {
            return Err(Error::InvalidArgument("frame length must be at least 1".into()));
        }
        if hop == 0 || hop > frame_length {
            return Err(Error::InvalidArgument(format!(
                "hop must satisfy 1 <= H <= L, got H={hop}, L={frame_length}"
            )));
        }
        if frame_length > signal_length {
            return Err(Error::InvalidArgument(format!(
                "frame length {frame_length} exceeds signal length {signal_length}"
            )));
        }
        if let Window::Gaussian { sigma_ratio } = window {
            if !(sigma_ratio.is_finite() && sigma_ratio > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "window sigma ratio must be positive, got {sigma_ratio}"
                )));
            }
        }
        let extra = signal_length - frame_length;
        let num_frames = extra.div_ceil(hop) + 1;
        let padded_length = (num_frames - 1) * hop + frame_length;

        let samples = window.samples(frame_length);
        if samples.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidArgument("window is identically zero".into()));
        }
        let mut synthesis_norm = vec![0.0; padded_length];
        for w in 0..num_frames {
            for (n, &v) in samples.iter().enumerate() {
                synthesis_norm[w * hop + n] += v * v;
            }
        }
        if let Some(sample) = synthesis_norm.iter().position(|&s| s <= f64::MIN_POSITIVE) {
            return Err(Error::Cola { sample });
        }
        Ok(Self {
            frame_length,
            hop,
            num_frames,
            window_kind: window,
            window: samples,
            synthesis_norm,
            padded_length,
            original_length: signal_length,
        })
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn window_kind(&self) -> Window {
        self.window_kind
    }

    pub fn synthesis_norm(&self) -> &[f64] {
        &self.synthesis_norm
    }

    /// Length after right zero-padding onto the frame grid.
    pub fn padded_length(&self) -> usize {
        self.padded_length
    }

    /// Signal length the plan was built for; reconstructions are trimmed to it.
    pub fn signal_length(&self) -> usize {
        self.original_length
    }

    /// `L · W`, the length of a stacked frame vector.
    pub fn stacked_len(&self) -> usize {
        self.frame_length * self.num_frames
    }

    /// Center of frame `w` in samples.
    pub fn frame_center(&self, w: usize) -> f64 {
        (w * self.hop) as f64 + (self.frame_length as f64 - 1.0) / 2.0
    }

    /// Diagonal of `D D*` (one entry per output sample).
    pub fn gram_diagonal(&self) -> Vec<f64> {
        self.synthesis_norm[..self.original_length]
            .iter()
            .map(|s| 1.0 / s)
            .collect()
    }

    /// `out = D x` for a stacked frame vector.
    pub fn apply(&self, stacked: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(stacked.len(), self.stacked_len());
        debug_assert_eq!(out.len(), self.original_length);
        out.fill(ZERO);
        let (l, h, n_out) = (self.frame_length, self.hop, self.original_length);
        for (w, seg) in stacked.chunks_exact(l).enumerate() {
            let start = w * h;
            for (n, (&win, &v)) in self.window.iter().zip(seg).enumerate() {
                let t = start + n;
                if t < n_out {
                    out[t] += v * win;
                }
            }
        }
        for (o, s) in out.iter_mut().zip(&self.synthesis_norm) {
            *o /= *s;
        }
    }

    /// `out = D* y`.
    pub fn apply_adjoint(&self, signal: &[Complex64], out: &mut [Complex64]) {
        debug_assert_eq!(signal.len(), self.original_length);
        debug_assert_eq!(out.len(), self.stacked_len());
        let (l, h, n_in) = (self.frame_length, self.hop, self.original_length);
        for (w, seg) in out.chunks_exact_mut(l).enumerate() {
            let start = w * h;
            for (n, (o, &win)) in seg.iter_mut().zip(&self.window).enumerate() {
                let t = start + n;
                *o = if t < n_in {
                    signal[t] * (win / self.synthesis_norm[t])
                } else {
                    ZERO
                };
            }
        }
    }
}

/// Gaussian-windowed plan; an infinite ratio selects the rectangular window.
pub fn make_frame_plan(
    signal_length: usize,
    frame_length: usize,
    hop: usize,
    window_sigma_ratio: f64,
) -> Result<FramePlan> {
    FramePlan::new(
        signal_length,
        frame_length,
        hop,
        Window::from_sigma_ratio(window_sigma_ratio),
    )
}

/// `W` frames of `L` complex samples stored contiguously (the stacked vector).
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    frame_length: usize,
    data: Vec<Complex64>,
    sample_rate: f64,
}

impl FrameStack {
    pub fn from_stacked(frame_length: usize, data: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if frame_length == 0 || !data.len().is_multiple_of(frame_length) {
            return Err(Error::InvalidArgument(format!(
                "stacked length {} is not a multiple of frame length {frame_length}",
                data.len()
            )));
        }
        Ok(Self {
            frame_length,
            data,
            sample_rate,
        })
    }

    pub fn zeros(plan: &FramePlan, sample_rate: f64) -> Self {
        Self {
            frame_length: plan.frame_length,
            data: vec![ZERO; plan.stacked_len()],
            sample_rate,
        }
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.frame_length
    }

    pub fn frame(&self, w: usize) -> &[Complex64] {
        &self.data[w * self.frame_length..(w + 1) * self.frame_length]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.frame_length)
    }

    pub fn as_stacked(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_stacked(self) -> Vec<Complex64> {
        self.data
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    fn check(&self, plan: &FramePlan) -> Result<()> {
        if self.frame_length != plan.frame_length {
            return Err(Error::ShapeMismatch {
                expected: plan.frame_length,
                found: self.frame_length,
            });
        }
        if self.data.len() != plan.stacked_len() {
            return Err(Error::ShapeMismatch {
                expected: plan.stacked_len(),
                found: self.data.len(),
            });
        }
        Ok(())
    }
}

fn check_signal(plan: &FramePlan, signal: &ComplexSignal) -> Result<()> {
    if signal.len() != plan.original_length {
        return Err(Error::ShapeMismatch {
            expected: plan.original_length,
            found: signal.len(),
        });
    }
    Ok(())
}

/// Windowed segments: frame `w` holds `window[n] · signal[wH + n]`, with the
/// signal zero-padded to the plan's grid.
pub fn frame(signal: &ComplexSignal, plan: &FramePlan) -> Result<FrameStack> {
    check_signal(plan, signal)?;
    let x = signal.samples();
    let mut data = Vec::with_capacity(plan.stacked_len());
    for w in 0..plan.num_frames {
        let start = w * plan.hop;
        data.extend(plan.window.iter().enumerate().map(|(n, &win)| {
            x.get(start + n).map_or(ZERO, |&v| v * win)
        }));
    }
    Ok(FrameStack {
        frame_length: plan.frame_length,
        data,
        sample_rate: signal.sample_rate(),
    })
}

/// `D x`: weighted overlap-add normalized by `synthesis_norm`, trimmed to the
/// original signal length.
pub fn dewindow_apply(plan: &FramePlan, frames: &FrameStack) -> Result<ComplexSignal> {
    frames.check(plan)?;
    let mut out = vec![ZERO; plan.original_length];
    plan.apply(&frames.data, &mut out);
    ComplexSignal::new(out, frames.sample_rate)
}

/// `D* y`, the exact adjoint of [`dewindow_apply`].
pub fn dewindow_adjoint(plan: &FramePlan, signal: &ComplexSignal) -> Result<FrameStack> {
    check_signal(plan, signal)?;
    let mut data = vec![ZERO; plan.stacked_len()];
    plan.apply_adjoint(signal.samples(), &mut data);
    Ok(FrameStack {
        frame_length: plan.frame_length,
        data,
        sample_rate: signal.sample_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    }

    #[test]
    fn plan_arithmetic() {
        let p = make_frame_plan(1024, 64, 32, 1.0 / 6.0).unwrap();
        assert_eq!(p.num_frames(), 31);
        assert_eq!(p.padded_length(), 1024);
        let p = make_frame_plan(400, 50, 25, 1.0 / 6.0).unwrap();
        assert_eq!(p.num_frames(), 15);
    }

    #[test]
    fn plan_pads_to_grid() {
        let p = make_frame_plan(100, 16, 8, 0.25).unwrap();
        assert_eq!(p.num_frames(), 12);
        assert_eq!(p.padded_length(), 104);
        assert_eq!(p.signal_length(), 100);
    }

    #[test]
    fn rectangular_disjoint_norm_is_one() {
        let p = make_frame_plan(64, 16, 16, f64::INFINITY).unwrap();
        assert_eq!(p.window_kind(), Window::Rectangular);
        assert!(p.synthesis_norm().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn plan_rejects_bad_geometry() {
        assert!(make_frame_plan(10, 16, 8, 0.2).is_err());
        assert!(make_frame_plan(64, 16, 0, 0.2).is_err());
        assert!(make_frame_plan(64, 16, 17, 0.2).is_err());
        assert!(make_frame_plan(64, 16, 8, -1.0).is_err());
        // A window this narrow underflows to zero away from its center.
        assert!(matches!(
            make_frame_plan(64, 64, 64, 0.001),
            Err(Error::Cola { .. })
        ));
    }

    #[test]
    fn zero_and_impulse_framing() {
        let p = make_frame_plan(32, 8, 8, f64::INFINITY).unwrap();
        let zero = ComplexSignal::new(vec![ZERO; 32], 1.0).unwrap();
        assert!(frame(&zero, &p).unwrap().as_stacked().iter().all(|c| *c == ZERO));

        let mut imp = vec![ZERO; 32];
        imp[0] = Complex64::new(1.0, 0.0);
        let fs = frame(&ComplexSignal::new(imp, 1.0).unwrap(), &p).unwrap();
        for (i, c) in fs.as_stacked().iter().enumerate() {
            assert_eq!(*c != ZERO, i == 0);
        }
    }

    #[test]
    fn frame_length_mismatch() {
        let p = make_frame_plan(32, 8, 4, 0.2).unwrap();
        let s = ComplexSignal::new(vec![ZERO; 31], 1.0).unwrap();
        assert!(matches!(frame(&s, &p), Err(Error::ShapeMismatch { .. })));
        assert!(dewindow_adjoint(&p, &s).is_err());
        let bad = FrameStack::from_stacked(8, vec![ZERO; 16], 1.0).unwrap();
        assert!(dewindow_apply(&p, &bad).is_err());
    }

    #[test]
    fn dewindow_of_zero_and_single_frame() {
        let p = make_frame_plan(32, 8, 8, f64::INFINITY).unwrap();
        let z = FrameStack::zeros(&p, 1.0);
        assert!(dewindow_apply(&p, &z).unwrap().samples().iter().all(|c| *c == ZERO));

        let mut data = vec![ZERO; 32];
        for n in 0..8 {
            data[16 + n] = Complex64::new(n as f64 + 1.0, -(n as f64));
        }
        let fs = FrameStack::from_stacked(8, data.clone(), 1.0).unwrap();
        let y = dewindow_apply(&p, &fs).unwrap();
        assert_eq!(y.samples(), &data[..]);
    }

    #[test]
    fn rectangular_disjoint_adjoint_is_segmentation() {
        let p = make_frame_plan(24, 8, 8, f64::INFINITY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = ComplexSignal::new(random_complex(&mut rng, 24), 1.0).unwrap();
        let a = dewindow_adjoint(&p, &y).unwrap();
        assert_eq!(a.as_stacked(), y.samples());
        let zero = ComplexSignal::new(vec![ZERO; 24], 1.0).unwrap();
        assert!(dewindow_adjoint(&p, &zero).unwrap().as_stacked().iter().all(|c| *c == ZERO));
    }

    #[test]
    fn adjoint_pairing_random_pairs() {
        let p = make_frame_plan(200, 32, 12, 1.0 / 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = random_complex(&mut rng, p.stacked_len());
            let y = random_complex(&mut rng, p.signal_length());
            let mut dx = vec![ZERO; p.signal_length()];
            let mut dty = vec![ZERO; p.stacked_len()];
            p.apply(&x, &mut dx);
            p.apply_adjoint(&y, &mut dty);
            let lhs = inner(&dx, &y);
            let rhs = inner(&x, &dty);
            assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(rhs.norm()));
        }
    }

    #[test]
    fn gram_is_diagonal() {
        let p = make_frame_plan(40, 8, 3, 0.3).unwrap();
        let diag = p.gram_diagonal();
        let mut e = vec![ZERO; 40];
        let mut stacked = vec![ZERO; p.stacked_len()];
        let mut back = vec![ZERO; 40];
        for t in 0..40 {
            e.fill(ZERO);
            e[t] = Complex64::new(1.0, 0.0);
            p.apply_adjoint(&e, &mut stacked);
            p.apply(&stacked, &mut back);
            for (s, b) in back.iter().enumerate() {
                let expected = if s == t { diag[t] } else { 0.0 };
                assert!((b.re - expected).abs() < 1e-12 && b.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn real_frames_give_real_signal() {
        let p = make_frame_plan(64, 16, 8, 0.2).unwrap();
        let data = (0..p.stacked_len()).map(|i| Complex64::new((i as f64).sin(), 0.0)).collect();
        let fs = FrameStack::from_stacked(16, data, 1.0).unwrap();
        assert!(dewindow_apply(&p, &fs).unwrap().samples().iter().all(|c| c.im == 0.0));
    }

    proptest! {
        #[test]
        fn cola_reconstruction(
            n in 20usize..160,
            l in 2usize..20,
            hop_frac in 0.05f64..1.0,
            ratio in prop_oneof![0.12f64..1.0, Just(f64::INFINITY)],
            seed in 0u64..1000,
        ) {
            prop_assume!(l <= n);
            let h = ((l as f64 * hop_frac).ceil() as usize).clamp(1, l);
            let plan = make_frame_plan(n, l, h, ratio).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = ComplexSignal::new(random_complex(&mut rng, n), 3.0).unwrap();
            let back = dewindow_apply(&plan, &frame(&y, &plan).unwrap()).unwrap();
            prop_assert_eq!(back.len(), n);
            for (a, b) in back.samples().iter().zip(y.samples()) {
                prop_assert!((a - b).norm() <= 1e-10);
            }
        }
    }
}
