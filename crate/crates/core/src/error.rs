use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConforming(usize, usize),
    #[error("boundary edge ({0}, {1}) carries no tag")]
    UntaggedBoundaryEdge(usize, usize),
    #[error("tagged edge ({0}, {1}) is not a boundary edge of the mesh")]
    TagOnNonBoundaryEdge(usize, usize),
    #[error("triangle {0} is degenerate (area {1:e})")]
    DegenerateTriangle(usize, f64),
    #[error("edge {edge} violates admissibility (d_sigma = {dist:e})")]
    AdmissibilityViolation { edge: usize, dist: f64 },
    #[error("mesh is not admissible: {0} offending edges")]
    InadmissibleMesh(usize),
    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),
    #[error("mesh file parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("concentration {value:e} of species {species} is not positive")]
    NonpositiveConcentration { species: usize, value: f64 },
    #[error("negative concentration {0:e}")]
    NegativeConcentration(f64),
    #[error("saturated state: solvent fraction {0:e} is not positive")]
    SaturatedState(f64),
    #[error("initial data not strictly positive at vertex {vertex}")]
    NonpositiveInitialData { vertex: usize },
    #[error("no Dirichlet boundary values for tag {0:?}")]
    MissingBoundaryData(String),
    #[error("the finite-element scheme needs at least one Dirichlet vertex")]
    NoDirichletBoundary,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("singular matrix")]
    SingularMatrix,
    #[error("linear solve inaccurate: residual {residual:e} exceeds {bound:e}")]
    InaccurateSolve { residual: f64, bound: f64 },
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("time step control gave up at t = {time} after {retries} step reductions")]
    StepRejected { time: f64, retries: usize },

    #[error("cross-section x = {0} does not intersect the domain")]
    CrossSectionOutsideDomain(f64),
    #[error("no current at -U for U = {0}")]
    MissingPair(f64),
    #[error("zero current at -U for U = {0}")]
    ZeroDenominator(f64),
    #[error("at least {needed} rows required, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable name, used in the CLI error JSON line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::EmptyMesh => "EmptyMesh",
            Error::NonConforming(..) => "NonConforming",
            Error::UntaggedBoundaryEdge(..) => "UntaggedBoundaryEdge",
            Error::TagOnNonBoundaryEdge(..) => "TagOnNonBoundaryEdge",
            Error::DegenerateTriangle(..) => "DegenerateTriangle",
            Error::AdmissibilityViolation { .. } => "AdmissibilityViolation",
            Error::InadmissibleMesh(_) => "InadmissibleMesh",
            Error::MeshMismatch(_) => "MeshMismatch",
            Error::MeshParse { .. } => "MeshParse",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::NonpositiveConcentration { .. } => "NonpositiveConcentration",
            Error::NegativeConcentration(_) => "NegativeConcentration",
            Error::SaturatedState(_) => "SaturatedState",
            Error::NonpositiveInitialData { .. } => "NonpositiveInitialData",
            Error::MissingBoundaryData(_) => "MissingBoundaryData",
            Error::NoDirichletBoundary => "NoDirichletBoundary",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::SingularMatrix => "SingularMatrix",
            Error::InaccurateSolve { .. } => "InaccurateSolve",
            Error::NewtonDiverged { .. } => "NewtonDiverged",
            Error::StepRejected { .. } => "StepRejected",
            Error::CrossSectionOutsideDomain(_) => "CrossSectionOutsideDomain",
            Error::MissingPair(_) => "MissingPair",
            Error::ZeroDenominator(_) => "ZeroDenominator",
            Error::InsufficientRows { .. } => "InsufficientRows",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
        }
    }
}
