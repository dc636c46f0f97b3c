use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty region: {0}")]
    EmptyRegion(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("quadrature did not converge: {0}")]
    QuadratureFail(String),
    #[error("eigendecomposition failed: {0}")]
    EigFail(String),
    #[error("singular system (margin {margin:.3e}, threshold {threshold:.3e})")]
    Singular { margin: f64, threshold: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("unsuitable y-ladder: {0}")]
    Ladder(String),
    #[error("runge approximation failed: residual {residual:.3e} exceeds gate {gate:.3e} (target {target})")]
    RungeFail {
        target: usize,
        residual: f64,
        gate: f64,
    },
    #[error("mode mismatch: {0}")]
    ModeMismatch(String),
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
