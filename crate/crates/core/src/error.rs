use thiserror::Error;

#[derive(Debug, Error)]
pub enum QstError {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("slot {slot} out of range for a layout with {len} factors")]
    SlotOutOfRange { slot: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("Hamiltonian does not commute with the parity operator (||[H,P]|| = {0:.3e})")]
    SymmetryBroken(f64),

    #[error("ambiguous parity for eigenstate {index}: <P> = {expectation:.9}")]
    AmbiguousParity { index: usize, expectation: f64 },

    #[error(
        "dispersive condition violated for external qubit {qubit}: |detuning| = {detuning:.4e} < 10 lambda = {limit:.4e}"
    )]
    Resonance {
        qubit: usize,
        detuning: f64,
        limit: f64,
    },

    #[error("search window: {0}")]
    SearchWindow(String),

    #[error("integrator step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("accuracy check failed: {0}")]
    Accuracy(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("grid point {index} ({param} = {value}): {source}")]
    GridPoint {
        index: usize,
        param: String,
        value: f64,
        #[source]
        source: Box<QstError>,
    },

    #[error("Bloch sample {index} (theta = {theta:.6}, phi = {phi:.6}) failed: {source}")]
    Sample {
        index: usize,
        theta: f64,
        phi: f64,
        #[source]
        source: Box<QstError>,
    },
}

impl From<ndarray_linalg::error::LinalgError> for QstError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        QstError::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QstError>;
