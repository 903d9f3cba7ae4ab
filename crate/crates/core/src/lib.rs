//! Sparse time-frequency representation by atomic norm soft thresholding.
//!
//! A windowed signal is modelled as a stack of segments, each a sparse
//! combination of continuous-frequency Fourier atoms. The denoising problem
//!
//! ```text
//! minimize  ½‖y − D x‖² + τ Σ_w ‖x_w‖_A
//! ```
//!
//! is solved by ADMM over one positive-semidefinite Toeplitz block per window
//! ([`ast`]). Per-window supports are then read off the dual polynomial
//! ([`localization`]) and compared to conventional representations
//! ([`baselines`]) with Rényi entropy and RMSE ([`metrics`]).

pub mod ast;
pub mod baselines;
pub mod error;
pub mod experiment;
pub mod frames;
pub mod localization;
pub mod metrics;
pub mod signal;
pub mod tf;

mod fft;
mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64;
