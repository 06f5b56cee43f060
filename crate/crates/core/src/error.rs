use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("non-finite value {value} at (ix={ix}, iy={iy})")]
    NonFinite { ix: usize, iy: usize, value: f64 },
    #[error("stencil needs {need} points, grid has {have}")]
    StencilTooWide { need: usize, have: usize },
    #[error("solvability defect {defect:.3e} exceeds tolerance {tol:.1e}")]
    Solvability { defect: f64, tol: f64 },
    #[error("singular band matrix at column {0}")]
    Singular(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("initial data rejected: {0}")]
    InitialData(String),
    #[error("CFL violation: dt={dt:.3e} exceeds limit {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("blowup at t={time:.6}")]
    Blowup { time: f64 },
    #[error("positivity breach: min h^p={value:.6} < {bound:.6} at t={time:.6} (ix={ix}, ieta={ieta})")]
    Positivity {
        time: f64,
        ix: usize,
        ieta: usize,
        value: f64,
        bound: f64,
    },
    #[error("far-field mismatch {value:.3e} exceeds {tol:.1e} at t={time:.6}")]
    FarField { time: f64, value: f64, tol: f64 },
    #[error("layer resolution gate: dy0={dy0:.3e} exceeds sqrt(eps)/4={required:.3e}")]
    Gate { dy0: f64, required: f64 },
    #[error("time window mismatch: {0}")]
    TimeWindow(String),
    #[error("missing inputs: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("config: {0}")]
    Config(String),
    #[error("fit: {0}")]
    Fit(String),
    #[error("no data")]
    NoData,
    #[error("format: {0}")]
    Format(String),
    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
