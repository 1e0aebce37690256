use thiserror::Error;

/// Errors raised by the geometry kernels and the scenario runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is off the manifold: distance {distance:.3e} exceeds tolerance {tolerance:.1e}")]
    PointOffManifold { distance: f64, tolerance: f64 },

    #[error("degenerate plane: Gram determinant {gram:.3e}")]
    DegeneratePlane { gram: f64 },

    #[error("ill-conditioned Gram matrix: condition number {condition:.3e}")]
    IllConditioned { condition: f64 },

    #[error("rank deficiency: expected {expected}, found {found}")]
    RankDeficient { expected: usize, found: usize },

    #[error("vector is not in the kernel of df: residual {residual:.3e}")]
    NotInKernel { residual: f64 },

    #[error(
        "metric reduction is not positive definite: min eigenvalue {min_eigenvalue:.6e} \
         (epsilon {epsilon}, maximal admissible epsilon {max_admissible:.6e})"
    )]
    InadmissibleEpsilon { epsilon: f64, min_eigenvalue: f64, max_admissible: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;
