//! Reference evaluations of the atomic norm, used to validate the solver.
//!
//! [`atomic_norm_sdp`] solves the positive-semidefinite characterization for
//! a fixed vector. [`atomic_norm_grid_oracle`] and [`grid_bpdn_objective`]
//! discretize the continuous atom set onto a fine frequency grid and solve the
//! resulting ℓ1 problems, which is an independent route to the same value.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::toeplitz::{diag_sum_leading, hermitize, psd_project_in_place};
use crate::error::{Error, Result};
use crate::sparse::{solve_basis_pursuit, solve_lasso, FourierDictionary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicNormEstimate {
    pub value: f64,
    /// Certified relative distance between the value and a lower bound.
    pub gap: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// `min ½(t + Tr(Toep(u))/L)  s.t.  [[Toep(u), x], [x*, t]] ⪰ 0` by ADMM with
/// the off-diagonal column pinned to `x`.
pub fn atomic_norm_sdp(x: &[Complex64]) -> Result<AtomicNormEstimate> {
    let l = x.len();
    if l == 0 {
        return Err(Error::InvalidArgument("empty vector".into()));
    }
    if x.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::InvalidArgument("non-finite entry".into()));
    }
    let scale = (x.iter().map(|c| c.norm_sqr()).sum::<f64>() / l as f64).sqrt();
    if scale == 0.0 {
        return Ok(AtomicNormEstimate {
            value: 0.0,
            gap: None,
            converged: true,
            iterations: 0,
        });
    }
    // The problem is positively homogeneous in x; solve at unit scale.
    let xs: Vec<Complex64> = x.iter().map(|c| c / scale).collect();
    let n = l + 1;
    let counts: Vec<f64> = (0..l).map(|j| (l - j) as f64).collect();
    let mut z = DMatrix::<Complex64>::zeros(n, n);
    let mut lambda = DMatrix::<Complex64>::zeros(n, n);
    let mut u = vec![Complex64::new(0.0, 0.0); l];
    let mut t = 0.0;
    let mut rho = 1.0;
    let max_iters = 50_000;
    let tol = 1e-9;

    for iter in 1..=max_iters {
        let inv_rho = 1.0 / rho;
        let s = &z + &lambda * Complex64::new(inv_rho, 0.0);
        let ds = diag_sum_leading(&s, l);
        for j in 1..l {
            u[j] = ds[j] / counts[j];
        }
        u[0] = Complex64::new((ds[0].re - 0.5 * inv_rho) / l as f64, 0.0);
        t = s[(l, l)].re - 0.5 * inv_rho;

        let mut theta = DMatrix::<Complex64>::zeros(n, n);
        for j in 0..l {
            for k in 0..l {
                theta[(j, k)] = if j >= k { u[j - k] } else { u[k - j].conj() };
            }
            theta[(j, l)] = xs[j];
            theta[(l, j)] = xs[j].conj();
        }
        theta[(l, l)] = Complex64::new(t, 0.0);

        let mut z_new = &theta - &lambda * Complex64::new(inv_rho, 0.0);
        psd_project_in_place(&mut z_new)?;
        let gap = &z_new - &theta;
        let primal = gap.norm() / theta.norm().max(z_new.norm());
        let dual = rho * (&z_new - &z).norm() / lambda.norm().max(f64::MIN_POSITIVE);
        lambda += &gap * Complex64::new(rho, 0.0);
        hermitize(&mut lambda);
        z = z_new;

        if primal < tol && dual < tol {
            return Ok(AtomicNormEstimate {
                value: scale * 0.5 * (t + u[0].re),
                gap: None,
                converged: true,
                iterations: iter,
            });
        }
        if iter % 20 == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
            } else if dual > 10.0 * primal {
                rho *= 0.5;
            }
        }
    }
    Ok(AtomicNormEstimate {
        value: scale * 0.5 * (t + u[0].re),
        gap: None,
        converged: false,
        iterations: max_iters,
    })
}

/// Atomic norm restricted to `grid_size` uniformly spaced frequencies:
/// `min Σ|c_k|  s.t.  x = Σ c_k a(k / grid_size)`.
///
/// Solved by reweighted least squares until a feasible primal point and a
/// dual certificate agree to `1e-3` relative. The value is the primal (upper)
/// bound; `gap` is the certified relative distance to the lower bound.
pub fn atomic_norm_grid_oracle(x: &[Complex64], grid_size: usize) -> Result<AtomicNormEstimate> {
    let l = x.len();
    if l == 0 || grid_size < 8 * l {
        return Err(Error::InvalidArgument(format!(
            "grid size must be at least 8L = {}, got {grid_size}",
            8 * l
        )));
    }
    let dict = FourierDictionary::new(l, grid_size)?;
    let bp = solve_basis_pursuit(&dict, x, 50_000, 1e-3);
    Ok(AtomicNormEstimate {
        value: bp.upper,
        gap: Some(if bp.upper > 0.0 { (bp.upper - bp.lower) / bp.upper } else { 0.0 }),
        converged: bp.converged,
        iterations: bp.iterations,
    })
}

/// Optimal value of `min ½‖y − V c‖² + τ‖c‖₁` over a `grid_size`-point
/// Fourier dictionary.
pub fn grid_bpdn_objective(y: &[Complex64], tau: f64, grid_size: usize) -> Result<f64> {
    let dict = FourierDictionary::new(y.len(), grid_size)?;
    let sol = solve_lasso(&dict, y, tau, 200_000, 1e-8)?;
    Ok(*sol.objective_trace.last().expect("trace has the initial value"))
}
