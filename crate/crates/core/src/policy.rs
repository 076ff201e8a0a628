//! No-trade policy, equivalent safe rate and shadow-price coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gapsolve::{self, GapSolution};
use crate::model::{baseline, MarketParams};
use crate::wfun::WSolution;

/// Long-run optimal no-trade region and its welfare.
///
/// Weights are measured at the ask price on the buy side and the bid price on
/// the sell side; `l` and `u` are the corresponding stock-cash ratios (both
/// negative under leverage, absent in the degenerate case where no cash is held).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoTradePolicy {
    pub lambda: f64,
    pub pi_minus: f64,
    pub pi_plus: f64,
    pub l: Option<f64>,
    pub u: Option<f64>,
    /// Growth rate of the value function in excess of `r`, per year.
    pub beta: f64,
    /// Equivalent safe rate `r + beta`, per year.
    pub esr: f64,
    pub degenerate: bool,
}

impl NoTradePolicy {
    /// `-(gamma sigma^2 / 2) pi^2 + mu pi - beta`; vanishes at both boundaries.
    pub fn quadratic(&self, params: &MarketParams, pi: f64) -> f64 {
        -0.5 * params.gamma_var() * pi * pi + params.mu * pi - self.beta
    }
}

/// Assembles the policy from a solved gap parameter.
pub fn build_policy(params: &MarketParams, gap: &GapSolution) -> NoTradePolicy {
    let gv = params.gamma_var();
    let lambda = gap.lambda;
    let beta = (params.mu * params.mu - lambda * lambda) / (2.0 * gv);
    NoTradePolicy {
        lambda,
        pi_minus: (params.mu - lambda) / gv,
        pi_plus: (params.mu + lambda) / gv,
        l: Some(gap.l),
        u: Some(gap.u),
        beta,
        esr: params.r + beta,
        degenerate: false,
    }
}

/// Policy when the Merton weight is one: hold everything in the risky asset, never trade.
pub fn degenerate_policy(params: &MarketParams) -> NoTradePolicy {
    let base = baseline(params);
    NoTradePolicy {
        lambda: 0.0,
        pi_minus: 1.0,
        pi_plus: 1.0,
        l: None,
        u: None,
        beta: base.esr0 - params.r,
        esr: base.esr0,
        degenerate: true,
    }
}

/// Everything derived from one parameter set.
#[derive(Debug, Clone)]
pub struct Solution {
    pub params: MarketParams,
    /// `None` in the degenerate case.
    pub gap: Option<GapSolution>,
    pub policy: NoTradePolicy,
    pub w: Option<WSolution>,
}

impl Solution {
    pub fn shadow(&self) -> Option<ShadowCoefficients> {
        self.w
            .map(|w| ShadowCoefficients::from_w(w, self.params.eps))
    }
}

/// Solves the gap equation (or takes the degenerate route) and builds the policy.
pub fn solve(params: &MarketParams, tol: f64) -> Result<Solution> {
    let params = crate::model::validate(*params)?;
    if params.is_degenerate() {
        return Ok(Solution {
            params,
            gap: None,
            policy: degenerate_policy(&params),
            w: None,
        });
    }
    let gap = gapsolve::solve_lambda(&params, tol)?;
    let w = gap.w_solution(&params)?;
    Ok(Solution {
        params,
        gap: Some(gap),
        policy: build_policy(&params, &gap),
        w: Some(w),
    })
}

/// Two-term small-spread expansion of the equivalent safe rate.
pub fn esr_asymptotic(params: &MarketParams) -> f64 {
    let coef = gapsolve::boundary_coefficient(params);
    let base = baseline(params);
    base.esr0 - 0.5 * params.gamma_var() * coef * coef * params.eps.powf(2.0 / 3.0)
}

/// Leading-order no-trade boundaries `pi* -/+ coef eps^(1/3)`.
pub fn boundaries_asymptotic(params: &MarketParams) -> (f64, f64) {
    let half = gapsolve::boundary_coefficient(params) * params.eps.cbrt();
    let pi = params.merton_weight();
    (pi - half, pi + half)
}

/// Drift, volatility and price ratio of the shadow price as functions of the
/// reflected state `y`.
#[derive(Debug, Clone, Copy)]
pub struct ShadowCoefficients {
    w: WSolution,
    /// Stock-cash ratio at the buy boundary.
    l: f64,
    eps: f64,
}

/// Builds the coefficient functions, checking that `wsol` belongs to `gap`.
pub fn shadow_coeffs(
    params: &MarketParams,
    gap: &GapSolution,
    wsol: &WSolution,
) -> Result<ShadowCoefficients> {
    if wsol.lambda() != gap.lambda || wsol.params() != params {
        return Err(Error::InconsistentSolution {
            w_lambda: wsol.lambda(),
            gap_lambda: gap.lambda,
        });
    }
    Ok(ShadowCoefficients {
        w: *wsol,
        l: gap.l,
        eps: params.eps,
    })
}

impl ShadowCoefficients {
    fn from_w(w: WSolution, eps: f64) -> Self {
        let m = w.m_minus();
        Self {
            w,
            l: m / (1.0 - m),
            eps,
        }
    }

    pub fn w(&self) -> &WSolution {
        &self.w
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Excess drift of the shadow price, per year.
    pub fn mu_tilde(&self, y: f64) -> Result<f64> {
        let (w, wp) = self.w.eval_with_prime(y)?;
        Ok(self.mu_tilde_from(w, wp))
    }

    #[inline]
    pub(crate) fn mu_tilde_from(&self, w: f64, wp: f64) -> f64 {
        let p = self.w.params();
        let gamma = p.gamma;
        p.sigma * p.sigma * wp / (w * (1.0 - w)) * (wp / (1.0 - w) - (1.0 - gamma) * w)
    }

    /// Volatility of the shadow price, per square-root year.
    pub fn sigma_tilde(&self, y: f64) -> Result<f64> {
        let (w, wp) = self.w.eval_with_prime(y)?;
        Ok(self.sigma_tilde_from(w, wp))
    }

    #[inline]
    pub(crate) fn sigma_tilde_from(&self, w: f64, wp: f64) -> f64 {
        self.w.params().sigma * wp / (w * (1.0 - w))
    }

    /// Shadow price over ask price, `w / (l e^y (1 - w))`; lies in `[1 - eps, 1]`.
    pub fn g(&self, y: f64) -> Result<f64> {
        let w = self.w.eval(y)?;
        Ok(self.g_from(y, w))
    }

    #[inline]
    pub(crate) fn g_from(&self, y: f64, w: f64) -> f64 {
        w / (self.l * y.exp() * (1.0 - w))
    }
}

/// Reflected-state starting point for an endowment of `xi0` safe units and `xi`
/// shares, with ask price `s0` and safe price `s0_safe`.
///
/// Ratios below `l` start at the buy boundary, ratios above `u` at the sell
/// boundary. Under leverage the comparisons use the signed ratios as written,
/// which only makes economic sense for endowments already holding a short
/// safe position; nonnegative endowments are all that is accepted here.
pub fn initial_state(
    xi0: f64,
    xi: f64,
    s0: f64,
    s0_safe: f64,
    policy: &NoTradePolicy,
) -> Result<f64> {
    if xi0 < 0.0 || xi < 0.0 {
        return Err(Error::NegativeEndowment { xi0, xi });
    }
    if xi0 == 0.0 && xi == 0.0 {
        return Err(Error::ZeroEndowment);
    }
    let (Some(l), Some(u)) = (policy.l, policy.u) else {
        return Err(Error::DegenerateMerton);
    };
    let safe = xi0 * s0_safe;
    let risky = xi * s0;
    Ok(if l * safe >= risky {
        0.0
    } else if u * safe <= risky {
        (u / l).ln()
    } else {
        (risky / (safe * l)).ln()
    })
}
