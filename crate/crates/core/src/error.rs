use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("no interior star point found for polygon fan")]
    StarPointNotInterior,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("refinement of cell {cell} produced an invalid child: {message}")]
    RefinementGeometry { cell: usize, message: String },

    #[error("ill-conditioned {what} (condition estimate {condition:e})")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("assembly failed on cell {cell}: {source}")]
    Assembly {
        cell: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("tangential derivative of the Dirichlet datum is required on Dirichlet edges")]
    MissingTangentialData,

    #[error("error {0:e} is too small to define a convergence rate")]
    DegenerateRate(f64),

    #[error("manufactured solution mismatch: {0}")]
    ManufacturedMismatch(String),

    #[error("study iteration {iteration}: {source}")]
    Study {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
