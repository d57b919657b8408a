/// Errors shared by every module of the crate.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("argument must be nonzero")]
    ZeroArgument,
    #[error("dual-gradient inversion failed: residual {residual:.3e} after {iters} iterations")]
    NewtonDivergence { residual: f64, iters: usize },
    #[error("dual Hessian is singular at the requested point")]
    DegenerateHessian,
    #[error("initial point is off the unit level set: |H - 1| = {defect:.3e}")]
    OffHypersurface { defect: f64 },
    #[error("energy drift {drift:.3e} exceeds tolerance {tol:.3e}")]
    EnergyDrift { drift: f64, tol: f64 },
    #[error("symplecticity defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    SymplecticityLoss { defect: f64, tol: f64 },
    #[error("shooting did not converge: residual {residual:.3e} after {iters} iterations")]
    ShootingDivergence { residual: f64, iters: usize },
    #[error("matrix path is not positive definite at t = {t}")]
    NonPositiveDefinite { t: f64 },
    #[error("failed to isolate a crossing near t = {t}")]
    UnresolvedCrossing { t: f64 },
    #[error("path endpoint has trivial kernel; the final time is not a closed-orbit period")]
    NotClosedOrbit,
    #[error("no restart produced a loop with positive action")]
    NoPositiveActionStart,
    #[error(
        "minimization did not converge: gradient norm {grad_norm:.3e} after {iters} iterations \
         (best value {best})"
    )]
    NonConvergence {
        grad_norm: f64,
        iters: usize,
        best: f64,
    },
    #[error("loop violates the critical-point equation: residual {residual:.3e}")]
    ResidualTooLarge { residual: f64 },
    #[error("index ladder violated at sigma = {sigma}: iota0 jumps to {got}, expected {expected}")]
    LadderViolation {
        sigma: String,
        got: u64,
        expected: u64,
    },
    #[error("operation requires exact rational data: {0}")]
    NotRational(String),
    #[error("invalid body specification: {0}")]
    InvalidBody(String),
    #[error("time integration failed near t = {t}")]
    IntegrationFailure { t: f64 },
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
