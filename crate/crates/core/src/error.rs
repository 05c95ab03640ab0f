use thiserror::Error;

use crate::space::HalfInt;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("emitter count {n} outside the supported range 1..={cap}")]
    SizeLimit { n: u32, cap: u32 },
    #[error("({j}, {m}) is not a valid Dicke index")]
    InvalidIndex { j: HalfInt, m: HalfInt },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid rate parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("manifold weight {0} outside [0, 1]")]
    InvalidWeight(f64),
    #[error("term flags {0} mix Model A and Model B variants (strict mode)")]
    MixedFlags(String),
    #[error("manifolds disagree on {0}")]
    ManifoldMismatch(&'static str),
    #[error("state dimension {got} does not match generator dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("state dimension {got} does not match generator dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("step size underflow at t = {t} ns (h = {h:e}); the system is too stiff for the explicit integrator")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state encountered at t = {t} ns")]
    NonFinite { t: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoteError {
    #[error("generator has an eigenvalue with positive real part {0:e}; the dynamics are unstable")]
    Unstable(f64),
    #[error("functional length {got} does not match generator dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("long-horizon run did not settle: |F(2T) - F(T)| = {delta:e} at T = {horizon} ns")]
    NotConverged { horizon: f64, delta: f64 },
    #[error("asymptote methods disagree: null space {null_space:e}, long horizon {long_horizon:e}")]
    MethodsDisagree { null_space: f64, long_horizon: f64 },
    #[error("{0} decomposition of the generator did not converge")]
    Decomposition(&'static str),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("n = {n} outside the oracle range 1..={max}")]
    SizeLimit { n: u32, max: u32 },
    #[error("m = {m} is not a valid projection for n = {n}")]
    InvalidProjection { n: u32, m: HalfInt },
    #[error("site {site} out of range for n = {n}")]
    InvalidSite { n: u32, site: u32 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("time grid is not strictly increasing at sample {0}")]
    NonMonotoneGrid(usize),
    #[error("trace length {got} does not match time grid length {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Asymptote(#[from] AsymptoteError),
}
