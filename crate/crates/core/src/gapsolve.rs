//! The scalar boundary equation for the gap parameter `lambda`.
//!
//! Starting the Riccati equation at the buy boundary with `w(0) = m_-`, the
//! correct `lambda` is the one for which the solution also reaches `m_+`
//! exactly at the sell boundary `log(u/l)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate, MarketParams};
use crate::wfun::{boundary_ratios, WSolution};

/// Default absolute tolerance on the boundary residual.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_EXPANSIONS: usize = 60;
const MAX_ITERATIONS: usize = 200;
/// Extra iterations taken once the residual is within tolerance, keeping the best point.
const POLISH_STEPS: usize = 3;

/// Solved gap parameter and the implied trading boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    pub lambda: f64,
    /// Stock-cash ratio at the buy boundary.
    pub l: f64,
    /// Stock-cash ratio at the sell boundary (risky position valued at the ask).
    pub u: f64,
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

impl GapSolution {
    /// The reduced solution `w(lambda, .)` belonging to this gap.
    pub fn w_solution(&self, params: &MarketParams) -> Result<WSolution> {
        WSolution::new(params, self.lambda)
    }
}

/// `f(lambda, eps) = w(lambda, log(u/l)) - (mu + lambda) / (gamma sigma^2)`.
pub fn boundary_residual(params: &MarketParams, lambda: f64) -> Result<f64> {
    if params.is_degenerate() {
        return Err(Error::DegenerateMerton);
    }
    let w = WSolution::new(params, lambda)?;
    Ok(w.eval(w.sell_boundary())? - w.m_plus())
}

/// Leading-order small-spread gap parameter
/// `gamma sigma^2 (3/(4 gamma) pi^2 (1 - pi)^2)^(1/3) eps^(1/3)`; zero when `pi = 1`.
pub fn lambda_asymptotic(params: &MarketParams) -> f64 {
    let gv = params.gamma_var();
    gv * boundary_coefficient(params) * params.eps.cbrt()
}

/// `(3/(4 gamma) pi^2 (1 - pi)^2)^(1/3)`, the half-width of the no-trade region per `eps^(1/3)`.
pub fn boundary_coefficient(params: &MarketParams) -> f64 {
    let pi = params.merton_weight();
    (0.75 / params.gamma * pi * pi * (1.0 - pi) * (1.0 - pi)).cbrt()
}

/// Solves the boundary equation to `|f| <= tol`.
///
/// The bracket starts at `[lambda_hat / 2, 2 lambda_hat]` and grows
/// geometrically (capped below `mu`) until the residual changes sign; Brent's
/// method then refines it. Evaluations that hit a pole of `w` pull the upper
/// end back toward `lambda_hat`.
pub fn solve_lambda(params: &MarketParams, tol: f64) -> Result<GapSolution> {
    let params = validate(*params)?;
    if params.is_degenerate() {
        return Err(Error::DegenerateMerton);
    }
    let pi = params.merton_weight();
    let eps = params.eps;
    if eps * pi / (1.0 - eps) >= 1.0 {
        return Err(Error::SpreadTooLarge {
            eps,
            leverage_cost: eps * pi / (1.0 - eps),
        });
    }
    if eps == 0.0 {
        let (l, u) = boundary_ratios(&params, 0.0);
        return Ok(GapSolution {
            lambda: 0.0,
            l,
            u,
            residual: 0.0,
            iterations: 0,
            bracket: (0.0, 0.0),
        });
    }

    let f = |lambda: f64| boundary_residual(&params, lambda);
    let (lo, f_lo, hi, f_hi) = find_bracket(&params, &f)?;
    let (lambda, residual, iterations, bracket) = brent(&f, lo, f_lo, hi, f_hi, tol)?;

    let pi_plus = (params.mu + lambda) / params.gamma_var();
    let leverage_cost = eps * pi_plus / (1.0 - eps);
    if leverage_cost >= 1.0 {
        return Err(Error::SpreadTooLarge { eps, leverage_cost });
    }
    let (l, u) = boundary_ratios(&params, lambda);
    Ok(GapSolution {
        lambda,
        l,
        u,
        residual,
        iterations,
        bracket,
    })
}

fn find_bracket(
    params: &MarketParams,
    f: &impl Fn(f64) -> Result<f64>,
) -> Result<(f64, f64, f64, f64)> {
    let seed = lambda_asymptotic(params);
    let cap = params.mu * (1.0 - 1e-12);
    let mut lo = 0.5 * seed;
    let mut hi = (2.0 * seed).min(cap);
    let f_lo0 = f(lo)?;
    let mut f_lo = f_lo0;

    // upper end: retreat toward the seed while w has a pole in the domain
    let mut f_hi = None;
    for _ in 0..MAX_EXPANSIONS {
        match f(hi) {
            Ok(v) => {
                f_hi = Some(v);
                break;
            }
            Err(Error::PoleEncountered { .. }) | Err(Error::SignError { .. }) => {
                hi = (hi * seed).sqrt();
                if hi <= lo {
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    let mut hi_open = f_hi.is_some();
    let mut f_hi = f_hi.unwrap_or(f_lo);
    if hi_open && f_lo * f_hi <= 0.0 {
        return Ok((lo, f_lo, hi, f_hi));
    }

    for _ in 0..MAX_EXPANSIONS {
        let next_lo = 0.5 * lo;
        let f_next = f(next_lo)?;
        if f_next * f_lo <= 0.0 {
            return Ok((next_lo, f_next, lo, f_lo));
        }
        lo = next_lo;
        f_lo = f_next;

        if hi_open && hi < cap {
            let next_hi = (2.0 * hi).min(cap);
            match f(next_hi) {
                Ok(v) => {
                    if v * f_hi <= 0.0 {
                        return Ok((hi, f_hi, next_hi, v));
                    }
                    hi = next_hi;
                    f_hi = v;
                }
                Err(Error::PoleEncountered { .. }) | Err(Error::SignError { .. }) => {
                    hi_open = false
                }
                Err(e) => return Err(e),
            }
        }
    }
    Err(Error::NoBracket { lo, hi })
}

/// Brent's method on a sign-changing bracket. Returns the root, its residual,
/// the iteration count and the final bracket.
fn brent(
    f: &impl Fn(f64) -> Result<f64>,
    a0: f64,
    fa0: f64,
    b0: f64,
    fb0: f64,
    tol: f64,
) -> Result<(f64, f64, usize, (f64, f64))> {
    let (mut a, mut fa, mut b, mut fb) = (a0, fa0, b0, fb0);
    if fa == 0.0 {
        return Ok((a, 0.0, 0, (a, a)));
    }
    if fb == 0.0 {
        return Ok((b, 0.0, 0, (b, b)));
    }
    let (mut c, mut fc) = (a, fa);
    let (mut d, mut e) = (b - a, b - a);
    let mut best: Option<(f64, f64, usize, (f64, f64))> = None;
    let mut polish = 0;
    for iter in 1..=MAX_ITERATIONS {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let xtol = 2.0 * f64::EPSILON * b.abs();
        let m = 0.5 * (c - b);
        let bracket = (b.min(c), b.max(c));
        if fb.abs() <= tol && best.is_none_or(|(_, f, _, _)| fb.abs() < f.abs()) {
            best = Some((b, fb, iter, bracket));
        }
        if let Some(found) = best {
            if fb == 0.0 || m.abs() <= xtol || polish == POLISH_STEPS {
                return Ok(found);
            }
            polish += 1;
        } else if m.abs() <= xtol {
            return Err(Error::NoConvergence {
                lambda: b,
                residual: fb,
            });
        }
        if e.abs() >= xtol && fa.abs() > fb.abs() {
            // secant or inverse quadratic interpolation
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0)),
                    (qa - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * m * q - (xtol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > xtol { d } else { xtol.copysign(m) };
        fb = f(b)?;
    }
    if let Some(found) = best {
        return Ok(found);
    }
    Err(Error::NoConvergence {
        lambda: b,
        residual: fb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> MarketParams {
        MarketParams {
            mu: 0.08,
            sigma: 0.16,
            r: 0.02,
            gamma: 5.0,
            eps: 0.01,
        }
    }

    /// Plain bisection on the residual, independent of the bracketing logic.
    fn bisect(params: &MarketParams, mut lo: f64, mut hi: f64) -> f64 {
        let mut f_lo = boundary_residual(params, lo).unwrap();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = boundary_residual(params, mid).unwrap();
            if fm == 0.0 {
                return mid;
            }
            if fm * f_lo > 0.0 {
                lo = mid;
                f_lo = fm;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn frictionless_residual_vanishes() {
        assert_eq!(boundary_residual(&p1().with_eps(0.0), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn asymptotic_reference_values() {
        assert!((lambda_asymptotic(&p1()) - 5.570e-3).abs() < 1e-6);
        assert_eq!(lambda_asymptotic(&p1().with_eps(0.0)), 0.0);
        assert_eq!(
            lambda_asymptotic(&MarketParams {
                gamma: 3.125,
                ..p1()
            }),
            0.0
        );
    }

    #[test]
    fn matches_bisection_oracle() {
        let sol = solve_lambda(&p1(), DEFAULT_TOL).unwrap();
        let oracle = bisect(&p1(), 0.004, 0.007);
        assert!(
            (sol.lambda - oracle).abs() < 1e-13,
            "{} {}",
            sol.lambda,
            oracle
        );
        assert!(sol.residual.abs() <= DEFAULT_TOL);
        assert!(sol.bracket.0 <= sol.lambda && sol.lambda <= sol.bracket.1);
        // first-order remainder
        assert!((sol.lambda - 5.570e-3).abs() <= 0.01 * 0.01);
    }

    #[test]
    fn residual_changes_sign_across_root() {
        let lam = solve_lambda(&p1(), DEFAULT_TOL).unwrap().lambda;
        let below = boundary_residual(&p1(), 0.5 * lam).unwrap();
        let above = boundary_residual(&p1(), 2.0 * lam).unwrap();
        assert!(below != 0.0 && below * above < 0.0);
    }

    #[test]
    fn tiny_spread_matches_asymptotics() {
        let p = p1().with_eps(1e-6);
        let ratio = solve_lambda(&p, DEFAULT_TOL).unwrap().lambda / lambda_asymptotic(&p);
        assert!((0.99..=1.01).contains(&ratio), "{ratio}");
    }

    #[test]
    fn degenerate_and_oversized_spreads() {
        let deg = MarketParams {
            gamma: 3.125,
            ..p1()
        };
        assert_eq!(
            solve_lambda(&deg, DEFAULT_TOL),
            Err(Error::DegenerateMerton)
        );
        let wide = MarketParams {
            gamma: 1.25,
            eps: 0.5,
            ..p1()
        };
        assert!(matches!(
            solve_lambda(&wide, DEFAULT_TOL),
            Err(Error::SpreadTooLarge { .. })
        ));
    }

    #[test]
    fn coth_branch_with_pole_beyond_seed() {
        // 2 lambda_hat lies past a pole of w; the bracket must retreat
        let p = MarketParams { gamma: 0.5, ..p1() };
        let sol = solve_lambda(&p, DEFAULT_TOL).unwrap();
        let oracle = bisect(&p, 0.02, 0.04);
        assert!((sol.lambda - oracle).abs() < 1e-12);
    }

    #[test]
    fn leverage_case_solves() {
        let p = MarketParams {
            gamma: 1.25,
            ..p1()
        };
        let sol = solve_lambda(&p, DEFAULT_TOL).unwrap();
        assert!(sol.l < 0.0 && sol.u < 0.0);
        assert!((sol.lambda - bisect(&p, 0.01, 0.02)).abs() < 1e-12);
    }
}
