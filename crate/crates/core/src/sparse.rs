//! Sparse coding over a uniformly gridded Fourier dictionary
//! `V[n, k] = e^{i2πnk/G}`, `n < L`, `k < G`, with `G ≥ L` so that
//! `V V* = G · I`. Products with `V` and `V*` go through size-`G` FFTs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy)]
pub(crate) struct FourierDictionary {
    pub signal_len: usize,
    pub atoms: usize,
}

impl FourierDictionary {
    pub fn new(signal_len: usize, atoms: usize) -> Result<Self> {
        if signal_len == 0 || atoms < signal_len {
            return Err(Error::InvalidArgument(format!(
                "dictionary needs atoms >= signal length, got {atoms} < {signal_len}"
            )));
        }
        Ok(Self {
            signal_len,
            atoms,
        })
    }

    /// `V c`.
    pub fn synthesize(&self, c: &[Complex64]) -> Vec<Complex64> {
        let mut buf = c.to_vec();
        fft::inverse(&mut buf);
        buf.truncate(self.signal_len);
        buf
    }

    /// `V* r`.
    pub fn analyze(&self, r: &[Complex64]) -> Vec<Complex64> {
        fft::forward_padded(r, self.atoms)
    }
}

fn soft_threshold(v: Complex64, thresh: f64) -> Complex64 {
    let m = v.norm();
    if m <= thresh {
        ZERO
    } else {
        v * ((m - thresh) / m)
    }
}

fn l1(c: &[Complex64]) -> f64 {
    c.iter().map(|v| v.norm()).sum()
}

fn residual(dict: &FourierDictionary, x: &[Complex64], c: &[Complex64]) -> Vec<Complex64> {
    dict.synthesize(c)
        .into_iter()
        .zip(x)
        .map(|(v, &xi)| xi - v)
        .collect()
}

#[derive(Debug, Clone)]
pub(crate) struct LassoSolution {
    pub coefficients: Vec<Complex64>,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

/// FISTA with function-value restart for `min ½‖x − V c‖² + λ‖c‖₁`. Only
/// descent steps are accepted, so the objective trace is non-increasing. Stops when the duality gap falls below
/// `gap_tol` times the objective.
pub(crate) fn solve_lasso(
    dict: &FourierDictionary,
    x: &[Complex64],
    lambda: f64,
    max_iters: usize,
    gap_tol: f64,
) -> Result<LassoSolution> {
    let lip = dict.atoms as f64;
    let step = 1.0 / lip;
    let objective = |c: &[Complex64]| -> f64 {
        0.5 * residual(dict, x, c).iter().map(|v| v.norm_sqr()).sum::<f64>() + lambda * l1(c)
    };
    let x_sq: f64 = x.iter().map(|v| v.norm_sqr()).sum();

    let mut c = vec![ZERO; dict.atoms];
    let mut y = c.clone();
    let mut t = 1.0f64;
    let mut f_c = objective(&c);
    let mut trace = vec![f_c];
    let mut converged = false;

    for iter in 0..max_iters {
        let r = residual(dict, x, &y);
        let g = dict.analyze(&r);
        let z: Vec<Complex64> = y
            .iter()
            .zip(&g)
            .map(|(&yk, &gk)| soft_threshold(yk + gk * step, lambda * step))
            .collect();
        let f_z = objective(&z);
        if !f_z.is_finite() {
            return Err(Error::Divergence { iteration: iter + 1 });
        }
        if f_z <= f_c {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = (0..dict.atoms)
                .map(|k| z[k] + (z[k] - c[k]) * ((t - 1.0) / t_next))
                .collect();
            c = z;
            f_c = f_z;
            t = t_next;
        } else {
            // Momentum overshot: restart from the last accepted iterate.
            y = c.clone();
            t = 1.0;
        }
        trace.push(f_c);

        // Duality gap with the residual scaled into the dual-feasible set.
        let r = residual(dict, x, &c);
        let corr = dict.analyze(&r).iter().map(|v| v.norm()).fold(0.0, f64::max);
        let scale = if corr > lambda { lambda / corr } else { 1.0 };
        let dual = 0.5 * x_sq
            - 0.5
                * x.iter()
                    .zip(&r)
                    .map(|(&xi, &ri)| (xi - ri * scale).norm_sqr())
                    .sum::<f64>();
        if f_c - dual <= gap_tol * f_c.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(LassoSolution {
        coefficients: c,
        objective_trace: trace,
        converged,
    })
}

#[derive(Debug, Clone)]
pub(crate) struct BasisPursuitSolution {
    /// `‖c‖₁` of a feasible point (`V c = x` to rounding).
    pub upper: f64,
    /// Dual objective of a dual-feasible point.
    pub lower: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `min ‖c‖₁ s.t. V c = x` by iteratively reweighted least squares.
///
/// Each step solves `c = W V* (V W V*)⁻¹ x` with `W = diag(√(|c|² + ε²))`,
/// which is exactly feasible. `V W V*` is Hermitian Toeplitz with first
/// column `V w`, so a step costs two FFTs and one `L × L` solve. `q =
/// (V W V*)⁻¹ x` scaled by `1 / ‖V* q‖∞` is dual feasible and bounds the
/// value from below.
pub(crate) fn solve_basis_pursuit(
    dict: &FourierDictionary,
    x: &[Complex64],
    max_iters: usize,
    rel_tol: f64,
) -> BasisPursuitSolution {
    let l = dict.signal_len;
    let g = dict.atoms as f64;
    // Minimum-norm solution V* x / G as the starting point.
    let mut c: Vec<Complex64> = dict.analyze(x).into_iter().map(|v| v / g).collect();
    let peak = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return BasisPursuitSolution {
            upper: 0.0,
            lower: 0.0,
            converged: true,
            iterations: 0,
        };
    }
    let xv = DVector::from_column_slice(x);
    let mut eps = peak;
    let eps_floor = 1e-14 * peak;
    let mut best_upper = l1(&c);
    let mut best_lower = 0.0f64;
    for iter in 0..max_iters {
        let w: Vec<Complex64> = c.iter().map(|v| Complex64::new((v.norm_sqr() + eps * eps).sqrt(), 0.0)).collect();
        let col = dict.synthesize(&w);
        let m = DMatrix::from_fn(l, l, |j, k| if j >= k { col[j - k] } else { col[k - j].conj() });
        let q = match m.clone().cholesky() {
            Some(ch) => ch.solve(&xv),
            None => match m.lu().solve(&xv) {
                Some(q) => q,
                None => break,
            },
        };
        let vq = dict.analyze(q.as_slice());
        c = w.iter().zip(&vq).map(|(wk, v)| wk * v).collect();
        best_upper = best_upper.min(l1(&c));
        let dual_peak = vq.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if dual_peak > 0.0 {
            let value = q.iter().zip(x).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / dual_peak;
            best_lower = best_lower.max(value);
        }
        if best_upper - best_lower <= rel_tol * best_upper {
            return BasisPursuitSolution {
                upper: best_upper,
                lower: best_lower,
                converged: true,
                iterations: iter + 1,
            };
        }
        eps = (0.5 * eps).max(eps_floor);
    }
    BasisPursuitSolution {
        upper: best_upper,
        lower: best_lower,
        converged: false,
        iterations: max_iters,
    }
}
