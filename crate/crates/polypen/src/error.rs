use thiserror::Error;

/// Errors raised by problem construction, scaling estimation, and solves.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A vector or matrix does not have the dimension the context requires.
    #[error("{name} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        name: &'static str,
        expected: usize,
        got: usize,
    },

    /// An input contains NaN or an infinity.
    #[error("{name} contains a non-finite entry")]
    NonFinite { name: &'static str },

    /// A matrix that must be symmetric differs from its transpose by more
    /// than the acceptance tolerance.
    #[error("{name} is asymmetric beyond tolerance (max |M - M'| = {asymmetry:.3e})")]
    Asymmetric { name: &'static str, asymmetry: f64 },

    /// A cost matrix has a meaningfully negative eigenvalue.
    #[error("{name} is not positive semidefinite (smallest eigenvalue {eigenvalue:.3e})")]
    NotPositiveSemidefinite { name: &'static str, eigenvalue: f64 },

    /// A constraint matrix is singular or indefinite.
    #[error("{name} is not positive definite (smallest eigenvalue {eigenvalue:.3e})")]
    NotPositiveDefinite { name: &'static str, eigenvalue: f64 },

    /// The eigenvalue iteration hit its sweep cap without reducing the
    /// off-diagonal mass below tolerance.
    #[error("eigenvalue iteration did not converge")]
    EigenNonConvergence,

    /// A scalar argument is outside its documented range.
    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    /// A user-supplied step size violates 0 < gamma_k <= 1/L_k.
    #[error("step size {gamma:.6e} at k={k} is outside (0, {limit:.6e}]")]
    StepSizeOutOfRange { k: u32, gamma: f64, limit: f64 },

    /// A user-supplied step sequence is shorter than the iteration count.
    #[error("step sequence has {got} entries but {needed} iterations were requested")]
    ScheduleTooShort { needed: usize, got: usize },

    /// The start point lies outside the constraint set.
    #[error("start point is infeasible: g(x1) = {g:.6e} > 1")]
    InfeasibleStart { g: f64 },

    /// An iterate became NaN or infinite, which signals a misconfigured
    /// scaling or step size.
    #[error("iterate became non-finite at step k={step}")]
    NonFiniteIterate { step: u32 },

    /// No invariance scaling below the cap satisfies the boundary condition
    /// at the sampled resolution.
    #[error("no feasible scaling m found below cap {cap:.3e}")]
    NoFeasibleScaling { cap: f64 },

    /// A reference solver failed to reach its tolerance.
    #[error("oracle did not converge: {what}")]
    OracleNonConvergence { what: &'static str },

    /// A fixed-point value left the representable range.
    #[error("fixed-point overflow at step k={step}")]
    FixedPointOverflow { step: u32 },

    /// The two inputs of a min problem are equal, so the mapped ellipsoid
    /// would be degenerate.
    #[error("min problem is degenerate: a = b")]
    DegenerateMinProblem,
}

pub type Result<T> = std::result::Result<T, Error>;
