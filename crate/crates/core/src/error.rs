// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix [[{a},{b}],[{c},{d}]] is not in GL2(Z): determinant {det}")]
    NotUnimodular { a: i64, b: i64, c: i64, d: i64, det: i64 },

    #[error("matrix with trace {trace} and determinant {det} is not hyperbolic")]
    NotHyperbolic { trace: i64, det: i64 },

    #[error("invalid map spec: {0}")]
    InvalidSpec(String),

    #[error("{cone} cone invariance fails at x = ({x1:.6}, {x2:.6}), image direction angle {angle:.6} rad")]
    ConeViolation { x1: f64, x2: f64, cone: &'static str, angle: f64 },

    #[error("orientation of the stable cone core flips across the grid")]
    NotOrientable,

    #[error("DF reverses the orientation of the stable bundle; this operation requires it preserved")]
    OrientationReversed,

    #[error("bundle iteration did not converge at ({x1:.6}, {x2:.6}): residual {residual:.3e} after depth {depth}")]
    NoConvergence { x1: f64, x2: f64, depth: usize, residual: f64 },

    #[error("direction at ({x1:.6}, {x2:.6}) is nearly orthogonal to the reference orientation")]
    OrientationAmbiguous { x1: f64, x2: f64 },

    #[error("Newton inversion of the lift failed at ({x1:.6}, {x2:.6})")]
    InverseNewtonFailure { x1: f64, x2: f64 },

    #[error("orbit record carries no multipliers")]
    MissingMultipliers,

    #[error("integer overflow computing A^{n}; largest safe period is {limit}")]
    Overflow { n: u32, limit: u32 },

    #[error("continuation collision at period {n}: two points within {distance:.3e}")]
    ContinuationCollision { n: u32, distance: f64 },

    #[error("Newton continuation diverged for seed ({x1:.9}, {x2:.9}) at homotopy parameter {s}")]
    NewtonDivergence { x1: f64, x2: f64, s: f64 },

    #[error("homotopy step s = {s} fails the cone check: {reason}")]
    HomotopyNotAnosov { s: f64, reason: String },

    #[error("multipliers of DF^{n} are not split by the unit circle: |ms| = {ms:.6e}, |mu| = {mu:.6e}")]
    EigenSplitFailure { n: u32, ms: f64, mu: f64 },

    #[error("orbit database is incomplete at period {0}")]
    IncompleteDatabase(u32),

    #[error("orbit database was built for spec {expected}, not {found}")]
    SpecMismatch { expected: String, found: String },

    #[error("product formula only holds for det A = +1")]
    SigmaMinusOne,

    #[error("integration step underflow at t = {t}: step {step:.3e}")]
    StepUnderflow { t: f64, step: f64 },

    #[error("H(1) = {value} differs from T = {t}")]
    UnitIntegralMismatch { t: f64, value: f64 },

    #[error("observable has nonzero mean {mean:.3e} (error estimate {error:.3e})")]
    MeanNotZero { mean: f64, error: f64 },

    #[error("flow is tangent to the transversal at ({x1:.6}, {x2:.6})")]
    TransversalityFailure { x1: f64, x2: f64 },

    #[error("k_max = {k_max} exceeds the resolution of the period-{n} measure (limit {limit})")]
    ResolutionExceeded { k_max: usize, n: u32, limit: usize },

    #[error("only {found} correlation values above the noise floor, need {needed}")]
    InsufficientDecaySignal { found: usize, needed: usize },

    #[error("the exact Lebesgue branch requires a linear map")]
    NotLinear,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("malformed data: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
