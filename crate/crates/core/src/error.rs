use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter {value} is below -1")]
    ParameterDomain { value: f64 },
    #[error("norm undefined: Gamma argument {arg} is a non-positive integer")]
    NormUndefined { arg: f64 },
    #[error("index {index:?} is outside the orthogonality window for parameters {params:?}")]
    OutsideOrthogonalityWindow { index: [usize; 3], params: [f64; 4] },
    #[error("collapsed coordinates are singular at ({x1}, {x2}, {x3})")]
    CollapsedSingularity { x1: f64, x2: f64, x3: f64 },
    #[error("coefficient denominator vanishes for index {index:?}, parameters {params:?}")]
    VanishingDenominator { index: [usize; 3], params: [f64; 4] },
    #[error("singular pivot {value:e} in generalized inverse, degree {degree}, block {block}")]
    SingularPivot { degree: usize, block: usize, value: f64 },
    #[error("degenerate tetrahedron (volume {volume:e})")]
    DegenerateTetrahedron { volume: f64 },
    #[error("Gauss-Jacobi Newton iteration did not converge (n = {n}, alpha = {alpha})")]
    QuadratureNotConverged { n: usize, alpha: f64 },
    #[error("matrix is not positive definite: {what} (dimension {dim})")]
    NotPositiveDefinite { what: String, dim: usize },
    #[error("eigensolver failed: {0}")]
    EigenFailure(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
