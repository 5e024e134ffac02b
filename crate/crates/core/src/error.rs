use thiserror::Error;

/// Errors produced by the orbit and monodromy machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("determinant {det} differs from 1 by more than {tol}")]
    Determinant { det: f64, tol: f64 },

    #[error("matrix is not in SL^R form: |a - d| = {gap} exceeds {tol}")]
    NotSlrForm { gap: f64, tol: f64 },

    #[error("trace {trace} lies in the degenerate band around +-2")]
    DegenerateTrace { trace: f64 },

    #[error("degenerate entries at positions {0:?}")]
    DegenerateEntries(Vec<usize>),

    #[error("energy {energy} is not reachable at chart coordinate {coord}")]
    EnergyUnreachable { coord: f64, energy: f64 },

    #[error("Newton iteration did not converge from seed {seed:?}")]
    NoConvergence { seed: [f64; 4] },

    #[error("trajectory left the domain of {system} at t = {t}")]
    DomainExit { system: String, t: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepFailure { t: f64, h: f64 },

    #[error("relative energy drift {drift} exceeds {tol}")]
    EnergyDrift { drift: f64, tol: f64 },

    #[error("symplecticity defect {drift} of the tangent flow exceeds {tol}")]
    SymplecticDrift { drift: f64, tol: f64 },

    #[error("event not found: {reason}")]
    EventNotFound { reason: String },

    #[error("vector field is tangent to the fixed set (frame undefined)")]
    Tangency,

    #[error("vector field vanishes at {0:?}")]
    ZeroVectorField([f64; 4]),

    #[error("linear map does not preserve the energy level: residual {residual}")]
    NotEnergyPreserving { residual: f64 },

    #[error("symmetry violated: {what} residual {residual} exceeds {tol}")]
    SymmetryViolated { what: String, residual: f64, tol: f64 },

    #[error("shooting function has no sign change in [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("continuation stalled at energy {energy} after {members} members")]
    ContinuationStalled { energy: f64, members: usize },

    #[error("point is at the origin of the Levi-Civita chart")]
    Origin,

    #[error("winding number {0} is even: the lift splits into two loops")]
    EvenWinding(i64),

    #[error("lift jumped between branches at sample {0}")]
    BranchJump(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
