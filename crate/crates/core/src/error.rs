use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh at level {level} in {dim}D overflows the vertex index type")]
    MeshTooLarge { dim: usize, level: u32 },

    #[error("grading {grading} gives a minimal angle of {min_angle_deg:.3} degrees, below the {floor_deg} degree floor")]
    GradingTooSevere {
        grading: f64,
        min_angle_deg: f64,
        floor_deg: f64,
    },

    #[error("cell {cell} has non-positive volume {volume:e}")]
    InvertedCell { cell: usize, volume: f64 },

    #[error("point {point:?} lies outside the reference simplex")]
    OutsideReferenceElement { point: Vec<f64> },

    #[error("quadrature of degree {0} is not supported")]
    UnsupportedQuadratureDegree(usize),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid Nitsche configuration: {0}")]
    InvalidConfig(String),

    #[error("matrix is singular (pivot {pivot:?})")]
    SingularMatrix { pivot: Option<usize> },

    #[error("Krylov solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("boundary mass matrix is ill-conditioned (estimate {estimate:e})")]
    IllConditioned { estimate: f64 },

    #[error("solver error: {0}")]
    Solver(String),

    #[error("level {level}: {source}")]
    AtLevel {
        level: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
