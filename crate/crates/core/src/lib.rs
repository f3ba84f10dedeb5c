//! Short-rate term-structure modeling under volatility uncertainty.
//!
//! The volatility of the driving noise is only known to lie in a band
//! `[sigma_lo, sigma_hi]`. Expectations become sublinear (a supremum over
//! the family of admissible volatility laws), the classical Hull-White bond
//! price is no longer well defined, and a drift adjustment driven by the
//! realized quadratic variation restores a unique arbitrage-free price.
//!
//! Modules:
//!
//! - [`gcore`]: volatility band, `G` function, scenario families and the
//!   Monte Carlo sublinear-expectation estimator.
//! - [`shortrate`]: path simulation of the volatility, the driver, its
//!   quadratic variation, `lambda`, the short rate and the money-market account.
//! - [`bonds`]: robust and classical zero-coupon bond prices, the
//!   no-arbitrage gap and the martingale check.
//! - [`gheat`]: explicit monotone solver for the G-heat equation.
//! - [`calibration`]: forward-curve ingestion and fitting of the mean-reversion level.

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bonds;
pub mod calibration;
pub mod error;
pub mod exec;
pub mod gcore;
pub mod gheat;
pub mod io;
pub mod quad;
pub mod rng;
pub mod shortrate;

pub use error::{CurveError, Error, Result};
pub use exec::Execution;
pub use gcore::{
    default_scenario_family, estimate_sublinear, g_value, FeedbackRule, McConfig,
    ScenarioEstimate, ScenarioFamily, ScenarioSpec, SublinearEstimate, VolBand,
};
pub use shortrate::{Dynamics, MeanLevel, PathBundle, PathModel, RateParams, TimeGrid};
