//! Error type shared by all toolkit modules.

use thiserror::Error;

/// Errors produced by grid construction, transforms, band analysis, walk
/// evolution and time-operator application.
#[derive(Debug, Clone, Error)]
pub enum QwError {
    #[error("invalid grid size {n}: must be even and at least {min}")]
    InvalidGridSize { n: usize, min: usize },

    #[error("representation mismatch: expected {expected} field, got {got}")]
    RepresentationMismatch {
        expected: &'static str,
        got: &'static str,
    },

    #[error("grid mismatch: operands live on different grids or representations")]
    GridMismatch,

    #[error("matrix is not unitary (defect {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("samples are not unimodular (max deviation {defect:.3e})")]
    NotUnimodular { defect: f64 },

    #[error("phase step {step:.3} between neighbouring samples exceeds pi; grid too coarse to unwrap")]
    PhaseStepTooLarge { step: f64 },

    #[error("winding residual {residual:.3e} too large; samples do not wind an integer number of times")]
    WindingNotInteger { residual: f64 },

    #[error("grid too coarse: derivative zeros at {first:.6} and {second:.6} are closer than 4 grid spacings")]
    GridTooCoarse { first: f64, second: f64 },

    #[error("degenerate eigenvalue pair at k = {k:.6} (gap {gap:.3e}) with non-scalar symbol")]
    DegenerateEigenvalue { k: f64, gap: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("support margin violated: relative mass {mass:.3e} within {sites} sites of the ring seam")]
    SupportMarginViolated { mass: f64, sites: usize },

    #[error("domain violation: |f| = {value:.3e} at k = {k:.6}, within margin {margin} of a zero of g'")]
    DomainViolation { k: f64, value: f64, margin: f64 },

    #[error("no zero-free domain: exclusion margins around derivative zeros cover the whole circle")]
    NoZeroFreeDomain,

    #[error("state is not normalized (norm {norm:.12})")]
    NotNormalized { norm: f64 },

    #[error("branch is not strictly monotone (min |g'| = {min_slope:.3e} on interior)")]
    BranchNotMonotone { min_slope: f64 },

    #[error("not the self-adjoint case: winding {winding} with {zeros} derivative zeros")]
    NotSelfAdjointCase { winding: i64, zeros: usize },

    #[error("eigenvalues coincide: |lambda - mu| = {gap:.3e}")]
    EigenvaluesCoincide { gap: f64 },

    #[error("invalid weights: alpha components sum to {sum:.12}, expected 1")]
    InvalidWeights { sum: f64 },

    #[error("symmetry defect: <f, Tf> has imaginary part {defect:.3e}")]
    SymmetryDefect { defect: f64 },
}

pub type Result<T> = std::result::Result<T, QwError>;
