//! Finite-horizon bounds on the equivalent safe rate.
//!
//! For a horizon `T` the certainty-equivalent rate of the liquidation value is
//! bracketed by `r + beta + log(initial wealth)/T` plus or minus terms of
//! order `eps/T`. Those terms come from the transient potential
//! `q~(y) = int_0^y w~`, with `w~ = w - w'/(1 - w)`, whose range over the
//! no-trade domain equals `int_0^{log(u/l)} w~`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gapsolve::GapSolution;
use crate::model::MarketParams;
use crate::policy::{initial_state, Solution};
use crate::quad::{self, Chebyshev};
use crate::wfun::WSolution;

/// Below this distance of `gamma` from one the closed-form integral (which
/// divides by `gamma - 1`) is replaced by quadrature.
pub const CLOSED_FORM_GAMMA_GAP: f64 = 1e-4;
const QUAD_TOL: f64 = 1e-13;
const CHEBYSHEV_NODES: usize = 48;

/// Initial holdings: `xi0` units of the safe asset priced `s0_safe`, `xi` shares at ask `s0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endowment {
    pub xi0: f64,
    pub xi: f64,
    pub s0: f64,
    pub s0_safe: f64,
}

impl Default for Endowment {
    /// One unit of cash, no shares.
    fn default() -> Self {
        Self {
            xi0: 1.0,
            xi: 0.0,
            s0: 1.0,
            s0_safe: 1.0,
        }
    }
}

impl Endowment {
    /// Initial wealth with shares marked at the ask.
    pub fn wealth(&self) -> f64 {
        self.xi0 * self.s0_safe + self.xi * self.s0
    }
}

/// How the `eps/T` terms are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    /// Exact transient-potential range and liquidation discount.
    Exact,
    /// The leading-order `eps/T` coefficients; `O(eps^(4/3))` remainders are dropped.
    LeadingOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonBounds {
    pub horizon: f64,
    pub upper: f64,
    pub lower: f64,
    /// Leading-order cap `(3 pi* + 1) eps / T` on the welfare gap of any strategy.
    pub loss_cap: f64,
    pub int_w: f64,
    pub int_w_tilde: f64,
    pub mode: BoundMode,
    pub leading_order_only: bool,
}

/// `int_0^{log(u/l)} w(y) dy` (oriented; negative under leverage).
pub fn integral_w(params: &MarketParams, gap: &GapSolution) -> Result<f64> {
    if params.is_degenerate() {
        return Err(Error::DegenerateMerton);
    }
    if gap.lambda == 0.0 && params.eps == 0.0 {
        return Ok(0.0);
    }
    if (params.gamma - 1.0).abs() < CLOSED_FORM_GAMMA_GAP {
        let w = gap.w_solution(params)?;
        return integral_w_quadrature(&w);
    }
    let MarketParams {
        mu,
        sigma,
        gamma,
        eps,
        ..
    } = *params;
    let lam = gap.lambda;
    let gv = params.gamma_var();
    let (up, dn) = (mu + lam, mu - lam);
    let first = (mu / (sigma * sigma) - 0.5) / (gamma - 1.0)
        * ((up * (dn - gv)) / ((1.0 - eps) * dn * (up - gv))).ln();
    let second = ((up * (up - gv)) / (dn * (dn - gv))).ln() / (2.0 * (gamma - 1.0));
    Ok(first + second)
}

/// Quadrature of `w` from 0 to the sell boundary.
pub fn integral_w_quadrature(w: &WSolution) -> Result<f64> {
    quad::integrate(|y| w.eval(y), 0.0, w.sell_boundary(), QUAD_TOL)
}

/// `int_0^{log(u/l)} w~(y) dy = int w - log((mu - lambda - gamma sigma^2) / (mu + lambda - gamma sigma^2))`.
pub fn integral_w_tilde(params: &MarketParams, gap: &GapSolution) -> Result<f64> {
    let int_w = integral_w(params, gap)?;
    let gv = params.gamma_var();
    Ok(int_w - ((params.mu - gap.lambda - gv) / (params.mu + gap.lambda - gv)).ln())
}

/// `q~(y) = int_0^y w~` on the no-trade domain, cached as a Chebyshev series.
#[derive(Debug, Clone)]
pub struct TransientPotential {
    cheb: Chebyshev,
    origin: f64,
}

impl TransientPotential {
    pub fn new(w: &WSolution) -> Result<Self> {
        let (lo, hi) = w.domain();
        let cheb = Chebyshev::fit(|y| w.w_tilde(y), lo, hi, CHEBYSHEV_NODES)?;
        let origin = cheb.antiderivative(0.0);
        Ok(Self { cheb, origin })
    }

    pub fn eval(&self, y: f64) -> f64 {
        self.cheb.antiderivative(y) - self.origin
    }
}

/// Upper bound for any strategy and lower bound for the long-run optimal one,
/// both for the horizon `horizon` and the given initial holdings.
pub fn finite_horizon_bounds(
    sol: &Solution,
    horizon: f64,
    endowment: &Endowment,
    mode: BoundMode,
) -> Result<HorizonBounds> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::NonPositiveHorizon { horizon });
    }
    let params = &sol.params;
    let eps = params.eps;
    let pi = params.merton_weight();
    let wealth = endowment.wealth();
    if endowment.xi0 < 0.0 || endowment.xi < 0.0 {
        return Err(Error::NegativeEndowment {
            xi0: endowment.xi0,
            xi: endowment.xi,
        });
    }
    if wealth <= 0.0 {
        return Err(Error::ZeroEndowment);
    }
    let long_run = sol.policy.esr + wealth.ln() / horizon;
    let loss_cap = (3.0 * pi + 1.0) * eps / horizon;

    let (int_w, int_w_tilde) = match &sol.gap {
        Some(gap) => (integral_w(params, gap)?, integral_w_tilde(params, gap)?),
        None => (0.0, 0.0),
    };

    let (upper, lower) = match mode {
        BoundMode::LeadingOrder => {
            let share = endowment.xi * endowment.s0 / wealth;
            (
                long_run + pi * eps / horizon,
                long_run - (2.0 * pi + share) * eps / horizon,
            )
        }
        BoundMode::Exact => match (&sol.w, sol.shadow()) {
            (Some(w), Some(shadow)) => {
                let width = int_w_tilde.abs();
                let y0 = initial_state(
                    endowment.xi0,
                    endowment.xi,
                    endowment.s0,
                    endowment.s0_safe,
                    &sol.policy,
                )?;
                let shadow_wealth = endowment.xi0 * endowment.s0_safe
                    + endowment.xi * endowment.s0 * shadow.g(y0)?;
                let discount = 1.0 - eps / (1.0 - eps) * w.m_plus();
                (
                    long_run + width / horizon,
                    sol.policy.esr + (shadow_wealth.ln() - width + discount.ln()) / horizon,
                )
            }
            // all wealth moves into the risky asset at the ask and stays there
            _ => (long_run, long_run + (1.0 - eps).ln() / horizon),
        },
    };

    Ok(HorizonBounds {
        horizon,
        upper,
        lower,
        loss_cap,
        int_w,
        int_w_tilde,
        mode,
        leading_order_only: mode == BoundMode::LeadingOrder,
    })
}
