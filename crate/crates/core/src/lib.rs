//! Finite-element toolkit for incompatible 3x3 tensor fields on tetrahedral
//! meshes of box-like domains.
//!
//! The library discretizes matrix-valued fields `P` whose rows live in the
//! lowest-order curl-conforming edge-element space, together with `P1` vector
//! displacements, and provides:
//!
//! * exact 3D tensor algebra (`anti`/`axl`, row-wise cross products, the
//!   dislocation-curl identities) in [`tensor3`],
//! * structured tetrahedral meshes of boxes and an L-shaped domain in
//!   [`mesh`],
//! * the edge-element / `P1` spaces with tangential-trace boundary
//!   conditions in [`fespace`],
//! * quadrature and assembly of all bilinear forms and the nonlinear
//!   p-functionals in [`forms`],
//! * self-contained sparse linear algebra (CSR, CG, banded Cholesky, a
//!   generalized eigensolver) in [`linalg`],
//! * coercivity-constant estimation, dual-norm checks and randomized
//!   inequality verification in [`korn`],
//! * the curl-curl / micro-distortion boundary-value solvers in [`solvers`],
//! * VTK legacy export in [`vtk`].
//!
//! With the default `parallel` feature the per-cell and per-sample loops run
//! on rayon; disabling the feature compiles a sequential fallback with
//! bit-identical results.

pub mod fespace;
pub mod forms;
pub mod korn;
pub mod linalg;
pub mod mesh;
mod par;
pub mod solvers;
pub mod tensor3;
pub mod vtk;

/// Errors shared across the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric (max symmetric part {0:.3e})")]
    NotSkew(f64),
    #[error("region {0} is not present on this mesh")]
    UnknownRegion(String),
    #[error("region {0} selects no boundary faces")]
    EmptyRegion(String),
    #[error("index {index} out of range (size {size})")]
    OutOfRange { index: usize, size: usize },
    #[error("operation requires a {expected} field, got {got}")]
    WrongSpace {
        expected: &'static str,
        got: &'static str,
    },
    #[error("fields/spaces live on different meshes")]
    MeshMismatch,
    #[error("exponent p = {0} outside the admissible range")]
    InvalidP(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("operand shapes do not match: {0}")]
    ShapeMismatch(String),
    #[error("ratio denominator degenerated ({0:.3e}) on a constrained field")]
    DegenerateDenominator(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
