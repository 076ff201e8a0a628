//! Market and preference inputs.
//!
//! All rates are continuously compounded and annualized: `mu` and `r` are per
//! year, `sigma` is per square-root year. The risky asset is quoted at its ask
//! price `S`; the bid is `(1 - eps) S`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide that the Merton weight is exactly one.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// Market and preference parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    /// Excess return of the risky asset over the safe rate, per year.
    pub mu: f64,
    /// Volatility of the risky asset, per square-root year.
    pub sigma: f64,
    /// Safe rate, per year.
    pub r: f64,
    /// Relative risk aversion.
    pub gamma: f64,
    /// Relative bid-ask spread.
    pub eps: f64,
}

/// Frictionless (Merton) reference values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionlessBaseline {
    pub pi_star: f64,
    pub esr0: f64,
}

impl MarketParams {
    pub fn new(mu: f64, sigma: f64, r: f64, gamma: f64, eps: f64) -> Result<Self> {
        validate(Self {
            mu,
            sigma,
            r,
            gamma,
            eps,
        })
    }

    /// Same market with a different spread.
    pub fn with_eps(self, eps: f64) -> Self {
        Self { eps, ..self }
    }

    /// `gamma * sigma^2`, the risk-adjusted variance that normalizes every weight.
    #[inline]
    pub fn gamma_var(&self) -> f64 {
        self.gamma * self.sigma * self.sigma
    }

    /// Merton weight `mu / (gamma sigma^2)`.
    #[inline]
    pub fn merton_weight(&self) -> f64 {
        self.mu / self.gamma_var()
    }

    /// True when the Merton weight is one, i.e. all wealth sits in the risky asset.
    pub fn is_degenerate(&self) -> bool {
        (self.merton_weight() - 1.0).abs() <= DEGENERATE_TOL
    }

    /// True when the frictionless investor borrows to hold the risky asset.
    pub fn is_leveraged(&self) -> bool {
        self.merton_weight() > 1.0
    }
}

/// Checks every parameter invariant, returning the parameters unchanged on success.
pub fn validate(params: MarketParams) -> Result<MarketParams> {
    let MarketParams {
        mu,
        sigma,
        r,
        gamma,
        eps,
    } = params;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NonPositiveVolatility { sigma });
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::NonPositiveRiskAversion { gamma });
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::NonPositiveDrift { mu });
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::SpreadOutOfRange { eps });
    }
    if !r.is_finite() {
        return Err(Error::NonFiniteRate { r });
    }
    Ok(params)
}

/// Merton weight and frictionless equivalent safe rate.
pub fn baseline(params: &MarketParams) -> FrictionlessBaseline {
    let gv = params.gamma_var();
    FrictionlessBaseline {
        pi_star: params.mu / gv,
        esr0: params.r + params.mu * params.mu / (2.0 * gv),
    }
}
