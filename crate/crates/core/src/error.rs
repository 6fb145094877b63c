use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("root finder did not converge: {0}")]
    NonConvergence(String),
    #[error("evaluation point {0} is a pole")]
    PoleHit(Complex64),
    #[error("transfer function has a pole on the imaginary axis at {0}")]
    AxisPole(Complex64),
    #[error("transfer function is improper")]
    Improper,
    #[error("transfer function has a pole at the origin")]
    PoleAtOrigin,
    #[error("unstable pole/zero cancellation at {0}")]
    CancellationDetected(Complex64),
    #[error("plant has no pole in the open right half-plane")]
    StableInput,
    #[error("plant has a zero at s = j{0}")]
    ZeroAtOmega(f64),
    #[error("all-pass phase is singular at omega_c = {0} (a -> infinity)")]
    PhaseSingular(f64),
    #[error("no epsilon on the grid strictly stabilizes the loop")]
    NoStrictification,
    #[error("peak-frequency polynomial has no positive root")]
    NoPositiveRoot,
    #[error("marginal factorization system is inconsistent (singular value ratio {0:e})")]
    InconsistentSystem(f64),
    #[error("marginal factorization produced a non-positive parameter: {0}")]
    NonPositiveSolution(String),
    #[error("family is not valid at e = 0: {0}")]
    OriginViolation(String),
    #[error("small-gain condition violated: |gamma| = {gamma}, ||gamma l||_inf = {loop_gain}")]
    SmallGainViolated { gamma: f64, loop_gain: f64 },
    #[error("no xi on the grid stabilizes the adjusted loop (smallest xi {xi}, max real part {max_real})")]
    NoStabilizingXi { xi: f64, max_real: f64 },
    #[error("scaled all-pass with eps = {0} does not stabilize the plant")]
    EpsTooSmall(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("argument outside domain: {0}")]
    DomainError(String),
    #[error("no sign change on the bracketing interval")]
    NoBracket,
    #[error("equilibrium is not unique: 1 + e = {one_plus_e} <= beta = {beta}")]
    NonUniqueEquilibrium { one_plus_e: f64, beta: f64 },
    #[error("simulation diverged at t = {t}")]
    Divergence { t: f64 },
    #[error("tail window holds {0} samples, need at least 2")]
    WindowTooShort(usize),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
