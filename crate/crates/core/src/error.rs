use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid volatility band [{lo}, {hi}]: need 0 < lo <= hi")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite functional value in scenario {scenario} ({label}) at path {path}")]
    NonFiniteFunctional {
        scenario: usize,
        label: String,
        path: usize,
    },
    #[error("quadratic variation decreases at step {step}")]
    DecreasingQv { step: usize },
    #[error("time ordering violated: t = {t} > T = {maturity}")]
    TimeOrder { t: f64, maturity: f64 },
    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("checkpoint {t} is not a grid time (dt = {dt})")]
    OffGrid { t: f64, dt: f64 },
    #[error("CFL condition violated: sigma_hi^2 dt / dx^2 = {ratio} > 1")]
    Cfl { ratio: f64 },
    #[error("non-finite value in G-heat solution at node {node}, time step {step}")]
    NonFiniteSolution { node: usize, step: usize },
    #[error("forward curve: {0}")]
    Curve(#[from] CurveError),
    #[error("time {t} outside curve range [0, {last}]")]
    OutOfRange { t: f64, last: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteFunctional { .. } | Error::Cfl { .. } | Error::NonFiniteSolution { .. }
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("need at least 2 knots, got {0}")]
    TooFewKnots(usize),
    #[error("first maturity must be 0, got {0}")]
    MissingZeroKnot(f64),
    #[error("duplicate maturity {maturity} at knot {index}")]
    DuplicateMaturity { index: usize, maturity: f64 },
    #[error("maturities decrease at knot {index} ({maturity} after {previous})")]
    DecreasingMaturity {
        index: usize,
        maturity: f64,
        previous: f64,
    },
    #[error("non-finite value at knot {0}")]
    NonFinite(usize),
    #[error("unrecognized header {0:?}, expected `T,f`")]
    BadHeader(String),
    #[error("malformed row {row}: {reason}")]
    Malformed { row: usize, reason: String },
}
