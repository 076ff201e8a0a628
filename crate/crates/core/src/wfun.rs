//! Closed-form solution of the first-order Riccati equation
//!
//! ```text
//! w'(y) + (1 - gamma) w^2 + (2 mu / sigma^2 - 1) w - (mu^2 - lambda^2) / (gamma sigma^4) = 0,
//! w(0) = (mu - lambda) / (gamma sigma^2),
//! ```
//!
//! whose value `w(y)` is the shadow risky weight when the centered log
//! stock-cash ratio equals `y`.
//!
//! The three classical branches (`tanh`, `tan`, `coth`) are evaluated through
//! the addition theorems of the respective functions. Writing
//! `T(y) = tanh(a y) / a` (resp. `tan(a y) / a`), every branch collapses to
//!
//! ```text
//! w(y) = (w0 + (K - c w0) T(y)) / (1 - b T(y)),   c = mu / sigma^2 - 1/2,
//! ```
//!
//! which is algebraically identical to `(a f(f^{-1}(b/a) -/+ a y) + c) / (gamma - 1)`
//! but never divides by `gamma - 1` or inverts `tanh`/`coth` near `|b/a| = 1`.
//! For `gamma = 1` the equation is linear and solved directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MarketParams;

/// Below this value of `a` the transfer function `T` is evaluated by its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-6;

/// Which closed form represents `w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Tanh,
    Tan,
    Coth,
    /// `gamma = 1`: the Riccati equation degenerates to a linear one.
    LogLinear,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Branch::Tanh => "tanh",
            Branch::Tan => "tan",
            Branch::Coth => "coth",
            Branch::LogLinear => "log-linear",
        };
        f.write_str(s)
    }
}

/// Riccati coefficients for a given gap parameter.
#[derive(Debug, Clone, Copy)]
struct Coefficients {
    /// `w(0)`.
    w0: f64,
    /// `mu / sigma^2 - 1/2`.
    c: f64,
    /// `(mu^2 - lambda^2) / (gamma sigma^4)`.
    k: f64,
    /// `(gamma - 1) k - c^2`; its sign separates `tan` from `tanh`/`coth`.
    disc: f64,
    a: f64,
    b: f64,
}

impl Coefficients {
    fn new(params: &MarketParams, lambda: f64) -> Self {
        let MarketParams {
            mu, sigma, gamma, ..
        } = *params;
        let s2 = sigma * sigma;
        let c = mu / s2 - 0.5;
        let k = (mu * mu - lambda * lambda) / (gamma * s2 * s2);
        let disc = (gamma - 1.0) * k - c * c;
        let w0 = (mu - lambda) / (gamma * s2);
        Self {
            w0,
            c,
            k,
            disc,
            a: disc.abs().sqrt(),
            b: -c + (gamma - 1.0) * w0,
        }
    }

    fn branch(&self, gamma: f64) -> Branch {
        if gamma == 1.0 {
            Branch::LogLinear
        } else if self.disc > 0.0 {
            Branch::Tan
        } else if self.b.abs() <= self.a {
            Branch::Tanh
        } else {
            Branch::Coth
        }
    }
}

/// Picks the closed form that solves the Riccati problem for `lambda`.
///
/// The selection uses the sign of the discriminant and `|b/a|` at the given
/// `lambda`; for `lambda -> 0` this reduces to the parameter conditions
/// (`tan` iff `gamma > 1` and the Merton weight lies in
/// `1/2 -/+ sqrt(1 - 1/gamma) / 2`, `tanh` iff the weight and `gamma` sit on
/// the same side of one).
pub fn select_branch(params: &MarketParams, lambda: f64) -> Result<Branch> {
    if params.is_degenerate() {
        return Err(Error::DegenerateMerton);
    }
    Ok(Coefficients::new(params, lambda).branch(params.gamma))
}

/// `w(lambda, .)` together with its no-trade domain in log stock-cash coordinates.
#[derive(Debug, Clone, Copy)]
pub struct WSolution {
    params: MarketParams,
    lambda: f64,
    coef: Coefficients,
    branch: Branch,
    y_lo: f64,
    y_hi: f64,
}

impl WSolution {
    /// Builds `w(lambda, .)`; the domain `[0, log(u/l)]` (or `[log(u/l), 0]`
    /// under leverage) uses the spread stored in `params`.
    ///
    /// With a Merton weight of one the domain is the single point `0` and `w == 1`.
    pub fn new(params: &MarketParams, lambda: f64) -> Result<Self> {
        let coef = Coefficients::new(params, lambda);
        let branch = coef.branch(params.gamma);
        let (y_lo, y_hi) = if params.is_degenerate() {
            (0.0, 0.0)
        } else {
            let (l, u) = boundary_ratios(params, lambda);
            let same_sign = l * u > 0.0;
            if !same_sign || !l.is_finite() || !u.is_finite() {
                return Err(Error::SignError { l, u });
            }
            let end = (u / l).ln();
            (end.min(0.0), end.max(0.0))
        };
        Ok(Self {
            params: *params,
            lambda,
            coef,
            branch,
            y_lo,
            y_hi,
        })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a(&self) -> f64 {
        self.coef.a
    }

    pub fn b(&self) -> f64 {
        self.coef.b
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// Closed domain `(y_lo, y_hi)`.
    pub fn domain(&self) -> (f64, f64) {
        (self.y_lo, self.y_hi)
    }

    /// `log(u/l)`: the sell boundary in log stock-cash coordinates.
    pub fn sell_boundary(&self) -> f64 {
        if self.params.is_leveraged() {
            self.y_lo
        } else {
            self.y_hi
        }
    }

    /// Weight at the buy boundary, `(mu - lambda) / (gamma sigma^2)`.
    pub fn m_minus(&self) -> f64 {
        self.coef.w0
    }

    /// Weight at the sell boundary, `(mu + lambda) / (gamma sigma^2)`.
    pub fn m_plus(&self) -> f64 {
        (self.params.mu + self.lambda) / self.params.gamma_var()
    }

    /// `T(y)` and `T'(y)`; fails if the `tan` argument leaves its principal branch.
    #[inline]
    fn transfer(&self, y: f64) -> Result<(f64, f64)> {
        let Coefficients { disc, a, .. } = self.coef;
        let t = if a < SERIES_THRESHOLD {
            let y2 = y * y;
            y * (1.0 + disc * y2 / 3.0 + 2.0 * disc * disc * y2 * y2 / 15.0)
        } else if disc > 0.0 {
            if (a * y).abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(self.pole(y));
            }
            (a * y).tan() / a
        } else {
            (a * y).tanh() / a
        };
        Ok((t, 1.0 + disc * t * t))
    }

    fn pole(&self, y: f64) -> Error {
        Error::PoleEncountered {
            lambda: self.lambda,
            y,
        }
    }

    /// `w(y)` and `w'(y)` from the branch formula and its analytic derivative.
    #[inline]
    pub fn eval_with_prime(&self, y: f64) -> Result<(f64, f64)> {
        let Coefficients { w0, c, k, b, .. } = self.coef;
        if self.branch == Branch::LogLinear {
            // w' = -2c w + k
            let x = -2.0 * c * y;
            let e = x.exp();
            let phi1 = if x.abs() < 1e-8 {
                1.0 + 0.5 * x
            } else {
                x.exp_m1() / x
            };
            return Ok((w0 * e + k * y * phi1, (k - 2.0 * c * w0) * e));
        }
        let (t, dt) = self.transfer(y)?;
        let den = 1.0 - b * t;
        let positive = den > 0.0;
        if !positive {
            return Err(self.pole(y));
        }
        let slope = k - c * w0;
        let w = (w0 + slope * t) / den;
        let wp = dt * (slope + b * w0) / (den * den);
        Ok((w, wp))
    }

    /// `w(y)`.
    pub fn eval(&self, y: f64) -> Result<f64> {
        self.eval_with_prime(y).map(|(w, _)| w)
    }

    /// `w'(y)`.
    pub fn prime(&self, y: f64) -> Result<f64> {
        self.eval_with_prime(y).map(|(_, wp)| wp)
    }

    /// `w''(y) = 2 (gamma - 1) w' w - (2 mu / sigma^2 - 1) w'`.
    pub fn second(&self, y: f64) -> Result<f64> {
        let (w, wp) = self.eval_with_prime(y)?;
        Ok(self.second_from(w, wp))
    }

    #[inline]
    pub(crate) fn second_from(&self, w: f64, wp: f64) -> f64 {
        2.0 * (self.params.gamma - 1.0) * wp * w - 2.0 * self.coef.c * wp
    }

    /// `w~(y) = w - w' / (1 - w)`, the integrand of the transient potential.
    pub fn w_tilde(&self, y: f64) -> Result<f64> {
        let (w, wp) = self.eval_with_prime(y)?;
        Ok(w - wp / (1.0 - w))
    }

    /// Left-hand side of the Riccati equation at `y`; zero up to rounding.
    pub fn ode_residual(&self, y: f64) -> Result<f64> {
        let (w, wp) = self.eval_with_prime(y)?;
        let Coefficients { c, k, .. } = self.coef;
        Ok(wp + (1.0 - self.params.gamma) * w * w + 2.0 * c * w - k)
    }
}

/// Stock-cash ratios `(l, u)` at the buy and sell boundaries.
pub fn boundary_ratios(params: &MarketParams, lambda: f64) -> (f64, f64) {
    let gv = params.gamma_var();
    let m_minus = (params.mu - lambda) / gv;
    let m_plus = (params.mu + lambda) / gv;
    let l = m_minus / (1.0 - m_minus);
    let u = m_plus / ((1.0 - m_plus) * (1.0 - params.eps));
    (l, u)
}
