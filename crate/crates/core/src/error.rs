use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid spin: {0}")]
    InvalidSpin(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max |A - A^dag| = {0:e})")]
    NotHermitian(f64),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("state is not normalizable (norm {0})")]
    Normalization(f64),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    /// The QFI matrix has a (numerically) zero eigenvalue; `direction` is the
    /// corresponding eigenvector in the (phi_x, phi_y) plane.
    #[error("singular QFI matrix (min eigenvalue {min_eigenvalue:e}); unestimable direction ({}, {})", direction[0], direction[1])]
    SingularQfi {
        min_eigenvalue: f64,
        direction: [f64; 2],
    },

    #[error("mean spin vanishes; mean-spin direction undefined")]
    UndefinedMsd,

    #[error("divergent spin-measurement sensitivity (<J_z> = {mean_jz:e})")]
    DivergentSensitivity { mean_jz: f64 },

    #[error("finite-difference step {0:e} outside [1e-7, 1e-3]")]
    StepOutOfRange(f64),

    #[error("state dimension {0} is not a two-spin product j (x) j")]
    NotTwoSpin(usize),

    #[error("wrong probe: {0}")]
    WrongProbe(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty spin range")]
    EmptyRange,
}

impl Error {
    /// Errors that signal a physically meaningful obstruction rather than bad input.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::SingularQfi { .. }
                | Error::UndefinedMsd
                | Error::DivergentSensitivity { .. }
                | Error::WrongProbe(_)
        )
    }
}
