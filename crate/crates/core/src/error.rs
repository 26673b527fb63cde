use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid linkage: {0}")]
    InvalidLinkage(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("degenerate input: all points coincide")]
    DegenerateInput,
    #[error("not realizable: {0}")]
    NotRealizable(String),
    #[error("configuration not strictly convex")]
    NotConvex,
    #[error("configuration lies on the boundary of the convex region: {0}")]
    BoundaryConfiguration(String),
    #[error("slice b4 = {k} is empty")]
    EmptySlice { k: f64 },
    #[error("linkage has no convex configurations")]
    EmptyModuli,
    #[error("degenerate distance: squared diagonal {index} is {value}")]
    DegenerateDistance { index: usize, value: f64 },
    #[error("coincident vertices {0} and {1}")]
    CoincidentVertices(usize, usize),
    #[error("charges must be strictly positive")]
    NonPositiveCharge,
    #[error("linkage is not generic: {0}")]
    NongenericLinkage(String),
    #[error("slice point on the boundary: a required oriented area vanishes")]
    BoundarySlicePoint,
    #[error("numerical conditioning: {0}")]
    NumericalConditioning(String),
    #[error("continuation break after {attempts} attempt(s) at {steps} steps: jump {jump:.3e} exceeds bound {bound:.3e}")]
    ContinuationBreak {
        steps: usize,
        attempts: usize,
        jump: f64,
        bound: f64,
    },
    #[error("invalid charge path: {0}")]
    InvalidPath(String),
    #[error("controlling charges on adjacent vertices {0} and {1} cannot reach every convex shape")]
    AdjacentControls(usize, usize),
    #[error("configuration is not on the boundary of the convex region")]
    NotOnBoundary,
    #[error("did not converge: {0}")]
    NoConvergence(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable identifier, used by structured CLI output,
    /// the service error frames and the C interface.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidLinkage(_) => "invalid_linkage",
            Error::InvalidConfiguration(_) => "invalid_configuration",
            Error::DegenerateInput => "degenerate_input",
            Error::NotRealizable(_) => "not_realizable",
            Error::NotConvex => "not_convex",
            Error::BoundaryConfiguration(_) => "boundary_configuration",
            Error::EmptySlice { .. } => "empty_slice",
            Error::EmptyModuli => "empty_moduli",
            Error::DegenerateDistance { .. } => "degenerate_distance",
            Error::CoincidentVertices(..) => "coincident_vertices",
            Error::NonPositiveCharge => "non_positive_charge",
            Error::NongenericLinkage(_) => "nongeneric_linkage",
            Error::BoundarySlicePoint => "boundary_slice_point",
            Error::NumericalConditioning(_) => "numerical_conditioning",
            Error::ContinuationBreak { .. } => "continuation_break",
            Error::InvalidPath(_) => "invalid_path",
            Error::AdjacentControls(..) => "adjacent_controls",
            Error::NotOnBoundary => "not_on_boundary",
            Error::NoConvergence(_) => "no_convergence",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }
}
