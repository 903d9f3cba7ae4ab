//! Atomic norm soft thresholding over windowed segments.
//!
//! Each window `w` carries its own `(L+1) × (L+1)` block
//! `[[Toep(u_w), x_w], [x_w*, t_w]] ⪰ 0`, whose objective
//! `½(t_w + Tr(Toep(u_w)) / L)` equals the atomic norm of `x_w` at the
//! optimum (a unit atom has norm one). Windows are coupled only through the
//! data term `½‖y − D x‖²`.

mod admm;
mod oracle;
mod toeplitz;

pub use admm::{admm_solve, AdmmParams, AstSolution};
pub use oracle::{atomic_norm_grid_oracle, atomic_norm_sdp, grid_bpdn_objective, AtomicNormEstimate};
pub use toeplitz::{diag_sum, min_eigenvalue, psd_project, toeplitz_from_first_column};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frames::FramePlan;
use crate::signal::ComplexSignal;

/// Noise-calibrated regularization `σ · sqrt(ln(4π ln L) + ln L)`.
pub fn default_tau(sigma: f64, segment_length: usize) -> Result<f64> {
    if segment_length < 2 {
        return Err(Error::InvalidArgument("segment length must be at least 2".into()));
    }
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let log_l = (segment_length as f64).ln();
    Ok(sigma * ((4.0 * std::f64::consts::PI * log_l).ln() + log_l).sqrt())
}

/// Regularization matched to the noise actually seen by the dual certificate.
///
/// Real white noise of standard deviation `σ` becomes, after the analytic
/// transform and `D*`, a complex sequence with per-entry variance
/// `σ_z² = 2σ² · mean(window[n] / synthesis_norm[t])²`. Against unit-modulus
/// atoms its dual norm is about `√L · default_tau(σ_z, L)`.
pub fn calibrated_tau(sigma: f64, plan: &FramePlan) -> Result<f64> {
    let l = plan.frame_length();
    let norm = plan.synthesis_norm();
    let (mut acc, mut count) = (0.0, 0usize);
    for w in 0..plan.num_frames() {
        for (n, win) in plan.window().iter().enumerate() {
            let t = w * plan.hop() + n;
            if t < plan.signal_length() {
                acc += (win / norm[t]).powi(2);
                count += 1;
            }
        }
    }
    let sigma_z = sigma * (2.0 * acc / count as f64).sqrt();
    Ok((l as f64).sqrt() * default_tau(sigma_z, l)?)
}

/// Unit-modulus Fourier atom `[1, e^{i2πf}, …, e^{i2π(L-1)f}]`.
pub fn atom(frequency: f64, length: usize) -> Vec<Complex64> {
    (0..length)
        .map(|n| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * frequency * n as f64))
        .collect()
}

/// An instance of `min ½‖y − D x‖² + τ Σ_w ‖x_w‖_A`.
#[derive(Debug, Clone)]
pub struct AstProblem {
    y: ComplexSignal,
    plan: FramePlan,
    tau: f64,
}

impl AstProblem {
    pub fn new(y: ComplexSignal, plan: FramePlan, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
        }
        if y.len() != plan.signal_length() {
            return Err(Error::ShapeMismatch {
                expected: plan.signal_length(),
                found: y.len(),
            });
        }
        Ok(Self { y, plan, tau })
    }

    pub fn y(&self) -> &ComplexSignal {
        &self.y
    }

    pub fn plan(&self) -> &FramePlan {
        &self.plan
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `½‖y − D x‖²` for a stacked frame vector.
    pub fn fidelity(&self, x: &[Complex64]) -> f64 {
        let mut dx = vec![Complex64::new(0.0, 0.0); self.plan.signal_length()];
        self.plan.apply(x, &mut dx);
        0.5 * self
            .y
            .samples()
            .iter()
            .zip(&dx)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
    }
}

/// Dual solution `ẑ = D*(y − D x̂)`.
pub fn dual_from_primal(problem: &AstProblem, x_hat: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = problem.plan();
    if x_hat.len() != plan.stacked_len() {
        return Err(Error::ShapeMismatch {
            expected: plan.stacked_len(),
            found: x_hat.len(),
        });
    }
    let mut residual = vec![Complex64::new(0.0, 0.0); plan.signal_length()];
    plan.apply(x_hat, &mut residual);
    for (r, y) in residual.iter_mut().zip(problem.y().samples()) {
        *r = y - *r;
    }
    let mut z = vec![Complex64::new(0.0, 0.0); plan.stacked_len()];
    plan.apply_adjoint(&residual, &mut z);
    Ok(z)
}
