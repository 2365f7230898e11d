use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-integrable weight: alpha = {alpha} must exceed 2")]
    NonIntegrableWeight { alpha: f64 },

    #[error("profile evaluation failure at e = {e}, p = {p}")]
    ProfileEvaluation { e: f64, p: f64 },

    #[error("energy floor violated: e = {0} < 1")]
    EnergyFloor(f64),

    #[error("non-finite integrand at node v = ({v1}, {v2})")]
    NonFiniteIntegrand { v1: f64, v2: f64 },

    #[error("quadrature failure: refinement disagreement {gap:e} exceeds {tol:e}")]
    QuadratureFailure { gap: f64, tol: f64 },

    #[error("not a center at amplitude {epsilon}: {reason}")]
    NotACenter { epsilon: f64, reason: String },

    #[error("equilibrium residual {residual:e} exceeds {tol:e}")]
    EquilibriumResidual { residual: f64, tol: f64 },

    #[error("conservation failure: drift {drift:e} after {halvings} step halvings")]
    ConservationFailure { drift: f64, halvings: usize },

    #[error("orbit not resolved within {max_period}")]
    OrbitNotResolved { max_period: f64 },

    #[error("assembly inconsistency: {block} symmetry defect {defect:e} exceeds {tol:e}")]
    AssemblyInconsistency {
        block: &'static str,
        defect: f64,
        tol: f64,
    },

    #[error("degenerate kernel of A1 at lambda = 0: eigenvalue {eigenvalue:e} within zero band")]
    DegenerateA1Kernel { eigenvalue: f64 },

    #[error("size error: {0}")]
    Size(String),

    #[error("eigensolver did not converge after {iterations} iterations")]
    EigenNonConvergence { iterations: usize },

    #[error("hypothesis failure: l0 = {l0:e} is zero within {tol:e}")]
    DegenerateL0 { l0: f64, tol: f64 },

    #[error("no neg-count change in the requested interval")]
    NoCrossing,

    #[error("spurious interval [{lo}, {hi}]: {reason}")]
    SpuriousInterval { lo: f64, hi: f64, reason: String },

    #[error("numerical failure at lambda = {lambda}: {source}")]
    AtLambda { lambda: f64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
