//! Optimal investment with proportional transaction costs for an investor with
//! constant relative risk aversion and a long horizon.
//!
//! The long-run optimal policy keeps the risky weight inside a no-trade region
//! `[pi_-, pi_+]`. Both boundaries and the welfare follow from a single gap
//! parameter `lambda`, found by solving a scalar free-boundary condition on the
//! closed-form solution `w` of a Riccati equation. From `w` the crate also
//! derives a shadow price, explicit finite-horizon welfare bounds, and a Monte
//! Carlo simulator of the reflected strategy.
//!
//! ```
//! use notrade_core::{solve, MarketParams, DEFAULT_TOL};
//!
//! let params = MarketParams::new(0.08, 0.16, 0.02, 5.0, 0.01).unwrap();
//! let sol = solve(&params, DEFAULT_TOL).unwrap();
//! assert!(sol.policy.pi_minus < 0.625 && 0.625 < sol.policy.pi_plus);
//! ```

pub mod bounds;
pub mod error;
pub mod gapsolve;
pub mod mc;
pub mod model;
pub mod policy;
pub mod quad;
pub mod wfun;

pub use bounds::{finite_horizon_bounds, BoundMode, Endowment, HorizonBounds};
pub use error::{Error, Result};
pub use gapsolve::{lambda_asymptotic, solve_lambda, GapSolution, DEFAULT_TOL};
pub use mc::{
    estimate_ce_rate, estimate_ce_rate_with_workers, PathState, SimConfig, SimOutput, SimResult,
};
pub use model::{baseline, validate, FrictionlessBaseline, MarketParams};
pub use policy::{shadow_coeffs, solve, NoTradePolicy, ShadowCoefficients, Solution};
pub use wfun::{select_branch, Branch, WSolution};
