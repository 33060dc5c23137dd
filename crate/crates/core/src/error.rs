use thiserror::Error;

/// Coarse classification used by front ends to map failures onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad parameters, shapes or preconditions supplied by the caller.
    Config,
    /// The input data or model cannot support estimation.
    DegenerateInput,
    /// Eigenvalue spacing or diagonalizability failure.
    Spectrum,
    /// File or serialization problems.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-diagonalizable within tol {tol:e} (max residual {max_residual:e}, min singular value of eigenvectors {vector_sigma_min:e})")]
    NonDiagonalizable {
        tol: f64,
        max_residual: f64,
        vector_sigma_min: f64,
        residuals: Vec<f64>,
    },

    #[error("eigenvalue gap too small; resample Fourier points (min gap {min_gap:e}, required {required:e})")]
    GapTooSmall { min_gap: f64, required: f64 },

    #[error("lambda-side rank deficient (relative sigma_min {0:e})")]
    LambdaRankDeficient(f64),

    #[error("mu-side flattening has numerical rank below m (relative sigma_m {0:e})")]
    MuRankDeficient(f64),

    #[error("matrix not symmetric within tolerance (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("characteristic function too small at u; resample u (|phi| = {modulus:e}, floor {floor:e})")]
    CharacteristicFunctionTooSmall { modulus: f64, floor: f64 },

    #[error("no dominant real direction in complex vector")]
    NoDominantRealDirection,

    #[error("zero component in rank-1 root extraction")]
    ZeroComponent,

    #[error("degenerate input covariance: {0}")]
    DegenerateCovariance(String),

    #[error("insufficient eigenvalue spacing after {attempts} attempts (last min gap {last_gap:e}, threshold {threshold:e})")]
    InsufficientSpacing {
        attempts: usize,
        last_gap: f64,
        threshold: f64,
    },

    #[error("derivative tensors indistinguishable from sampling noise (signal {signal:e}, noise {noise:e})")]
    DegenerateSignal { signal: f64, noise: f64 },

    #[error("unidentifiable model: sigma_m of Khatri-Rao power is {0:e}")]
    Unidentifiable(f64),

    #[error("mean span ill-separated from noise floor (eigenvalue gap {0:e})")]
    MeanSpanUnresolved(f64),

    #[error("invalid eigenvalue modulus {0}")]
    InvalidEigenvalueModulus(f64),

    #[error("vanishing weight {0:e}")]
    VanishingWeight(f64),

    #[error("inconsistent mean estimates: {0}")]
    InconsistentMeans(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_)
            | Error::Shape(_)
            | Error::NotSymmetric(_)
            | Error::Infeasible(_) => ErrorKind::Config,
            Error::DegenerateCovariance(_)
            | Error::Unidentifiable(_)
            | Error::CharacteristicFunctionTooSmall { .. }
            | Error::ZeroComponent
            | Error::MeanSpanUnresolved(_)
            | Error::InvalidEigenvalueModulus(_)
            | Error::VanishingWeight(_)
            | Error::InconsistentMeans(_) => ErrorKind::DegenerateInput,
            Error::NonDiagonalizable { .. }
            | Error::GapTooSmall { .. }
            | Error::LambdaRankDeficient(_)
            | Error::MuRankDeficient(_)
            | Error::NoDominantRealDirection
            | Error::InsufficientSpacing { .. }
            | Error::DegenerateSignal { .. } => ErrorKind::Spectrum,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse(_) => ErrorKind::Io,
        }
    }

    /// True for failures that a fresh draw of Fourier points may cure.
    pub fn is_resample(&self) -> bool {
        matches!(
            self,
            Error::NonDiagonalizable { .. }
                | Error::GapTooSmall { .. }
                | Error::LambdaRankDeficient(_)
                | Error::MuRankDeficient(_)
                | Error::CharacteristicFunctionTooSmall { .. }
                | Error::NoDominantRealDirection
                | Error::ZeroComponent
                | Error::DegenerateSignal { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
