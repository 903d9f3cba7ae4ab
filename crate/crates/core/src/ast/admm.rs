//! ADMM for the block-Toeplitz semidefinite program.
//!
//! With `S = Z + Λ/ρ` partitioned as `[[S_u, S_x], [S_x*, S_t]]`, one sweep is
//!
//! ```text
//! u   = diag_sum(S_u) ./ [L, L-1, …, 1]   with  u_0 -= τ / (2ρL)
//! t   = S_t − τ / (2ρ)
//! x   = (½ D*D + ρ I)⁻¹ (ρ S_x + ½ D* y)
//! Z   = Π_psd(Θ(u, x, t) − Λ/ρ)
//! Λ  += ρ (Z − Θ(u, x, t))
//! ```
//!
//! `D D*` is diagonal, so the x-system is inverted exactly through the
//! Woodbury identity at O(LW) cost.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::toeplitz::{diag_sum_leading, hermitize, psd_project_in_place};
use super::AstProblem;
use crate::error::{Error, Result};
use crate::frames::FramePlan;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmParams {
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub rho: f64,
    /// Doubles/halves ρ when one relative residual exceeds the other tenfold.
    pub residual_balancing: bool,
    /// Recompute the smallest eigenvalue of every Z block after each sweep.
    pub track_psd: bool,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            tol_primal: 1e-4,
            tol_dual: 1e-4,
            rho: 1.0,
            residual_balancing: false,
            track_psd: false,
        }
    }
}

impl AdmmParams {
    fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.max_iters == 0 || !positive(self.tol_primal) || !positive(self.tol_dual) || !positive(self.rho) {
            return Err(Error::InvalidArgument(format!("invalid ADMM parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct AstSolution {
    /// Denoised stacked frames.
    pub x_hat: Vec<Complex64>,
    /// Per-window Toeplitz generators.
    pub u_hat: Vec<Vec<Complex64>>,
    pub t_hat: Vec<f64>,
    /// `D*(y − D x̂)`.
    pub z_hat: Vec<Complex64>,
    /// Final PSD blocks.
    pub z_blocks: Vec<DMatrix<Complex64>>,
    pub objective_trace: Vec<f64>,
    pub primal_trace: Vec<f64>,
    pub dual_trace: Vec<f64>,
    /// Smallest eigenvalue over all Z blocks per sweep (only with `track_psd`).
    pub psd_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_rho: f64,
}

impl AstSolution {
    pub fn frame(&self, w: usize) -> &[Complex64] {
        let l = self.u_hat[0].len();
        &self.x_hat[w * l..(w + 1) * l]
    }

    pub fn dual_frame(&self, w: usize) -> &[Complex64] {
        let l = self.u_hat[0].len();
        &self.z_hat[w * l..(w + 1) * l]
    }

    pub fn final_primal(&self) -> f64 {
        self.primal_trace.last().copied().unwrap_or(0.0)
    }

    pub fn final_dual(&self) -> f64 {
        self.dual_trace.last().copied().unwrap_or(0.0)
    }
}

/// Exact inverse of `½ D*D + ρ I` via `(1/ρ)(I − D* (2ρ I + D D*)⁻¹ D)`.
struct XSolver {
    gram: Vec<f64>,
    weights: Vec<f64>,
    rho: f64,
}

impl XSolver {
    fn new(plan: &FramePlan, rho: f64) -> Self {
        let gram = plan.gram_diagonal();
        let mut s = Self {
            weights: vec![0.0; gram.len()],
            gram,
            rho,
        };
        s.set_rho(rho);
        s
    }

    fn set_rho(&mut self, rho: f64) {
        self.rho = rho;
        for (w, d) in self.weights.iter_mut().zip(&self.gram) {
            *w = 1.0 / (2.0 * rho + d);
        }
    }

    fn solve(&self, plan: &FramePlan, rhs: &[Complex64], out: &mut [Complex64], scratch: &mut [Complex64]) {
        plan.apply(rhs, scratch);
        for (s, w) in scratch.iter_mut().zip(&self.weights) {
            *s *= *w;
        }
        plan.apply_adjoint(scratch, out);
        let inv = 1.0 / self.rho;
        for (o, r) in out.iter_mut().zip(rhs) {
            *o = (*r - *o) * inv;
        }
    }
}

#[derive(Clone)]
struct Block {
    u: Vec<Complex64>,
    t: f64,
    z: DMatrix<Complex64>,
    lambda: DMatrix<Complex64>,
}

struct BlockStats {
    primal_sq: f64,
    dual_sq: f64,
    theta_sq: f64,
    z_sq: f64,
    lambda_sq: f64,
    min_eig: f64,
}

fn assemble(u: &[Complex64], x: &[Complex64], t: f64) -> DMatrix<Complex64> {
    let l = u.len();
    let mut m = DMatrix::zeros(l + 1, l + 1);
    for j in 0..l {
        for k in 0..l {
            m[(j, k)] = if j >= k { u[j - k] } else { u[k - j].conj() };
        }
        m[(j, l)] = x[j];
        m[(l, j)] = x[j].conj();
    }
    m[(l, l)] = Complex64::new(t, 0.0);
    m
}

/// Runs ADMM until both relative residuals are below tolerance or
/// `max_iters` sweeps have been made.
///
/// The primal residual is `‖Z − Θ‖_F / max(‖Z‖_F, ‖Θ‖_F)` and the dual
/// residual `ρ‖Z⁺ − Z‖_F / ‖Λ‖_F`, both summed over all windows. If the
/// tolerance is never met the iterate with the smallest residuals is
/// returned.
pub fn admm_solve(problem: &AstProblem, params: &AdmmParams) -> Result<AstSolution> {
    params.validate()?;
    let plan = problem.plan();
    let tau = problem.tau();
    let l = plan.frame_length();
    let nw = plan.num_frames();
    let n_sig = plan.signal_length();

    let mut half_dty = vec![ZERO; plan.stacked_len()];
    plan.apply_adjoint(problem.y().samples(), &mut half_dty);
    let data_norm = half_dty.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for v in &mut half_dty {
        *v *= 0.5;
    }
    // Absolute floor for the primal scale, so zero data still terminates.
    let primal_floor = 1e-10 * (data_norm + tau * (nw as f64).sqrt());

    let mut rho = params.rho;
    let mut xsolver = XSolver::new(plan, rho);
    let counts: Vec<f64> = (0..l).map(|j| (l - j) as f64).collect();
    let mut blocks = vec![
        Block {
            u: vec![ZERO; l],
            t: 0.0,
            z: DMatrix::zeros(l + 1, l + 1),
            lambda: DMatrix::zeros(l + 1, l + 1),
        };
        nw
    ];

    let mut x = vec![ZERO; plan.stacked_len()];
    let mut rhs = vec![ZERO; plan.stacked_len()];
    let mut scratch = vec![ZERO; n_sig];

    let mut objective_trace = Vec::new();
    let mut primal_trace = Vec::new();
    let mut dual_trace = Vec::new();
    let mut psd_trace = Vec::new();

    let mut best_score = f64::INFINITY;
    let mut best: Option<(Vec<Complex64>, Vec<Vec<Complex64>>, Vec<f64>)> = None;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=params.max_iters {
        iterations = iter;
        let inv_rho = 1.0 / rho;

        // (u, t) per window, plus the x right-hand side.
        blocks
            .par_iter_mut()
            .zip(rhs.par_chunks_mut(l))
            .zip(half_dty.par_chunks(l))
            .for_each(|((b, r), hd)| {
                let s = &b.z + &b.lambda * Complex64::new(inv_rho, 0.0);
                let ds = diag_sum_leading(&s, l);
                for j in 1..l {
                    b.u[j] = ds[j] / counts[j];
                }
                b.u[0] = Complex64::new((ds[0].re - tau * 0.5 * inv_rho) / l as f64, 0.0);
                b.t = s[(l, l)].re - tau * 0.5 * inv_rho;
                for k in 0..l {
                    r[k] = s[(k, l)] * rho + hd[k];
                }
            });

        xsolver.solve(plan, &rhs, &mut x, &mut scratch);
        if x.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Divergence { iteration: iter });
        }

        // Z projection and multiplier update.
        let stats: Vec<Result<BlockStats>> = blocks
            .par_iter_mut()
            .zip(x.par_chunks(l))
            .map(|(b, xw)| {
                let theta = assemble(&b.u, xw, b.t);
                let mut z_new = &theta - &b.lambda * Complex64::new(inv_rho, 0.0);
                psd_project_in_place(&mut z_new).map_err(|_| Error::Divergence { iteration: iter })?;
                let gap = &z_new - &theta;
                let dual_sq = (&z_new - &b.z).norm_squared();
                b.lambda += &gap * Complex64::new(rho, 0.0);
                hermitize(&mut b.lambda);
                let min_eig = if params.track_psd {
                    super::toeplitz::min_eigenvalue(&z_new)?
                } else {
                    f64::NAN
                };
                let out = BlockStats {
                    primal_sq: gap.norm_squared(),
                    dual_sq,
                    theta_sq: theta.norm_squared(),
                    z_sq: z_new.norm_squared(),
                    lambda_sq: b.lambda.norm_squared(),
                    min_eig,
                };
                b.z = z_new;
                Ok(out)
            })
            .collect();

        let (mut primal_sq, mut dual_sq, mut theta_sq, mut z_sq, mut lambda_sq) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut min_eig = f64::INFINITY;
        for s in stats {
            let s = s?;
            primal_sq += s.primal_sq;
            dual_sq += s.dual_sq;
            theta_sq += s.theta_sq;
            z_sq += s.z_sq;
            lambda_sq += s.lambda_sq;
            min_eig = min_eig.min(s.min_eig);
        }
        if params.track_psd {
            psd_trace.push(min_eig);
        }

        let primal = relative(primal_sq.sqrt(), theta_sq.sqrt().max(z_sq.sqrt()).max(primal_floor));
        let dual = relative(rho * dual_sq.sqrt(), lambda_sq.sqrt());
        let objective = problem.fidelity(&x)
            + 0.5 * tau * blocks.iter().map(|b| b.t + b.u[0].re).sum::<f64>();
        if !(primal.is_finite() && dual.is_finite() && objective.is_finite()) {
            return Err(Error::Divergence { iteration: iter });
        }
        objective_trace.push(objective);
        primal_trace.push(primal);
        dual_trace.push(dual);

        let score = (primal / params.tol_primal).max(dual / params.tol_dual);
        if score <= 1.0 {
            converged = true;
            best = None;
            break;
        }
        if score < best_score {
            best_score = score;
            best = Some((
                x.clone(),
                blocks.iter().map(|b| b.u.clone()).collect(),
                blocks.iter().map(|b| b.t).collect(),
            ));
        }

        if params.residual_balancing && iter % 10 == 0 {
            let new_rho = if primal > 10.0 * dual {
                rho * 2.0
            } else if dual > 10.0 * primal {
                rho * 0.5
            } else {
                rho
            };
            if new_rho != rho {
                rho = new_rho;
                xsolver.set_rho(rho);
            }
        }
    }

    let (x_hat, u_hat, t_hat) = match best {
        Some(state) => state,
        None => (
            x,
            blocks.iter().map(|b| b.u.clone()).collect(),
            blocks.iter().map(|b| b.t).collect(),
        ),
    };
    let z_hat = super::dual_from_primal(problem, &x_hat)?;
    Ok(AstSolution {
        x_hat,
        u_hat,
        t_hat,
        z_hat,
        z_blocks: blocks.into_iter().map(|b| b.z).collect(),
        objective_trace,
        primal_trace,
        dual_trace,
        psd_trace,
        iterations,
        converged,
        final_rho: rho,
    })
}

fn relative(num: f64, scale: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / scale.max(f64::MIN_POSITIVE)
    }
}
