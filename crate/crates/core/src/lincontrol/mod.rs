//! Dense linear-control numerics: Lyapunov solves, the H₂ cost of a static
//! state-feedback gain and its gradient, and gain synthesis under a fixed
//! support mask.

mod h2;
mod lyapunov;
mod mask;
mod model;
mod synth;

use thiserror::Error;

pub use h2::{h2_cost, h2_gradient};
pub use lyapunov::{is_hurwitz, solve_lyapunov, spectral_abscissa, HURWITZ_MARGIN, RESIDUAL_TOL};
pub use mask::{build_mask, MaskMode, SupportMask};
pub use model::{GainMatrix, NodeBlock, StateSpaceModel, ValidationError, ValidationOptions};
pub use synth::{synth_structured, synth_unstructured, SynthOptions, SynthesisReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinControlError {
    #[error("closed-loop matrix is not Hurwitz (spectral abscissa {abscissa:e})")]
    NotHurwitz { abscissa: f64 },
    #[error("Lyapunov residual {residual:e} exceeds tolerance {tolerance:e}")]
    IllConditioned { residual: f64, tolerance: f64 },
    #[error("real Schur factorization did not converge")]
    SchurFailed,
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("initial gain is not stabilizing (spectral abscissa {abscissa:e})")]
    NoStabilizingStart { abscissa: f64 },
    #[error("line search found no stabilizing step at iteration {iteration}")]
    LineSearchFailure { iteration: usize },
}
