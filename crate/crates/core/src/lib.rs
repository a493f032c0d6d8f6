//! Optimal investment-reinsurance under stochastic interest rates and inflation.
//!
//! An insurer holds a savings account, a zero-coupon bond and a stock, buys
//! proportional reinsurance, and maximizes power utility of terminal *real*
//! (price-index-deflated) wealth. For Ho-Lee and Vasicek short-rate dynamics
//! the value function separates as `G = f(t) exp(k(t) r + z(t) I) x^p / p`,
//! which reduces the HJB equation to three scalar ODEs and yields the optimal
//! bond/stock proportions and reinsurance retention in closed form.
//!
//! Crate layout:
//! - [`models`] — market parameters and coefficient functions,
//! - [`numerics`] — composite-Simpson quadrature and finite-difference helpers,
//! - [`closedform`] — the ancillary functions `k`, `z`, `h`, `H`, `f`, the
//!   candidate value function and the optimal policy,
//! - [`simengine`] — Euler-Maruyama simulation of the four-factor state system
//!   and the exact log-form optimal wealth path,
//! - [`verify`] — Monte Carlo checks of the martingale / dominance properties
//!   that make the closed-form candidate the actual optimum.
//!
//! All numeric kernels are generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the aliases below fix `f64`, which is what the CLI and the
//! test suites use.

pub mod closedform;
pub mod models;
pub mod numerics;
pub mod scalar;
pub mod simengine;
pub mod verify;

pub use scalar::Scalar;

/// `f64` instantiations of the main types.
pub type CoefficientFn64 = models::CoefficientFn<f64>;
pub type RateModel64 = models::RateModel<f64>;
pub type MarketParams64 = models::MarketParams<f64>;
pub type QuadratureSpec64 = numerics::QuadratureSpec<f64>;
pub type AncillarySolution64 = closedform::AncillarySolution<f64>;
pub type PolicyPoint64 = closedform::PolicyPoint<f64>;
pub type TimeGrid64 = simengine::TimeGrid<f64>;
pub type Strategy64 = simengine::Strategy<f64>;
pub type Simulator64 = simengine::Simulator<f64>;
pub type McEstimate64 = verify::McEstimate<f64>;
