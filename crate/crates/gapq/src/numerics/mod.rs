//! Self-contained numerical kernel: truncated-Taylor jets, small dense
//! complex linear algebra, matrix exponentials, and root finding inside the
//! unit disk. Everything is a pure function of immutable values.

pub mod expm;
pub mod jet;
pub mod linsolve;
pub mod matrix;
pub mod policy;
pub mod roots;

pub use expm::{mat_exp, transient_integral};
pub use jet::Jet;
pub use linsolve::{invert, null_space, solve_linear, solve_many};
pub use matrix::SquareMatrix;
pub use policy::Tolerances;
pub use roots::{eigenvalues, unit_disk_roots, DiskRootProblem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("division by a jet with zero constant term")]
    ZeroConstantTerm,
    #[error("matrix is numerically singular (pivot {pivot:.3e} against row scale {scale:.3e})")]
    SingularMatrix { pivot: f64, scale: f64 },
    #[error("linear solve residual too large ({residual:.3e})")]
    ResidualTooLarge { residual: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("negative duration {0}")]
    NegativeDuration(f64),
    #[error("unit-disk root count mismatch: located {found}, expected {expected}, contour count {winding}")]
    RootCountMismatch {
        found: usize,
        expected: usize,
        winding: i64,
    },
    #[error("function vanishes on the counting contour; the model is too close to instability")]
    RootOnContour,
    #[error("contour sampling failed to resolve a winding number")]
    ContourUnresolved,
}
