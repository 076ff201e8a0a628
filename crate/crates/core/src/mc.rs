//! Monte Carlo simulation of the long-run optimal strategy.
//!
//! The centered log stock-cash ratio `y` follows Brownian motion with drift
//! `mu - sigma^2/2`, reflected at the buy boundary `0` and the sell boundary
//! `log(u/l)`. Each step applies the Euler increment, projects back onto the
//! domain, and books the projection distance as local time. Whenever a
//! projection happens the portfolio is rebalanced, buying at the ask or
//! selling at the bid, so that the stock-cash ratio equals `l e^y` again.
//! Shares therefore change only at boundary steps, by
//! `d phi / phi = (1 - m_-) dL - (1 - m_+) dU` to first order.
//!
//! Each path draws its normals from its own ChaCha stream `(seed, path_id)`,
//! and statistics are reduced in path order, so results do not depend on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::MarketParams;
use crate::policy::{initial_state, NoTradePolicy, ShadowCoefficients, Solution};

/// Ten steps per business day.
pub const DEFAULT_DT: f64 = 1.0 / 2520.0;
pub const DEFAULT_PATHS: u64 = 10_000;
/// Environment variable capping the number of simulation workers.
pub const THREADS_ENV: &str = "NOTRADE_THREADS";

/// Slack allowed when checking that `w(y)` stays within `[m_-, m_+]`.
pub const TOL_REFLECT: f64 = 1e-12;
/// Relative slack for the liquidation sandwich and the self-financing replay.
pub const TOL_RELATIVE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Years.
    pub horizon: f64,
    /// Years per step; rounded so that a whole number of steps spans the horizon.
    pub dt: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub xi0: f64,
    pub xi: f64,
    pub s0: f64,
    pub s0_safe: f64,
    /// Track the pathwise invariants at every step.
    pub check_invariants: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 50.0,
            dt: DEFAULT_DT,
            n_paths: DEFAULT_PATHS,
            seed: 0,
            xi0: 1.0,
            xi: 0.0,
            s0: 1.0,
            s0_safe: 1.0,
            check_invariants: true,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSimConfig(m.to_owned()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return bad("horizon must be at least dt");
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1");
        }
        if !(self.s0 > 0.0 && self.s0_safe > 0.0) {
            return bad("initial prices must be positive");
        }
        if self.xi0 < 0.0 || self.xi < 0.0 {
            return Err(Error::NegativeEndowment {
                xi0: self.xi0,
                xi: self.xi,
            });
        }
        if self.xi0 == 0.0 && self.xi == 0.0 {
            return Err(Error::ZeroEndowment);
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        ((self.horizon / self.dt).round() as u64).max(1)
    }
}

/// State of one simulated investor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    /// Centered log stock-cash ratio.
    pub y: f64,
    /// Local time `L` at the buy boundary `y = 0` (nonincreasing under leverage).
    pub local_lo: f64,
    /// Local time `U` at the sell boundary `y = log(u/l)` (nonincreasing under leverage).
    pub local_hi: f64,
    /// Wealth with shares marked at the shadow price.
    pub x_shadow: f64,
    /// Shadow wealth propagated through its own exponential dynamics.
    pub x_shadow_sde: f64,
    pub phi: f64,
    pub phi0: f64,
    /// Ask price.
    pub s: f64,
    /// Safe asset price.
    pub s_safe: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Trade {
    None,
    /// Shares bought at the ask.
    Buy(f64),
    /// Shares sold at the bid.
    Sell(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub state: PathState,
    pub trade: Trade,
    /// `w(y)` after the step.
    pub w: f64,
    /// `w'(y)` after the step.
    pub w_prime: f64,
    /// `y` before projection.
    pub y_pre: f64,
    /// Safe units implied by the rebalanced stock-cash ratio, for the self-financing check.
    pub phi0_implied: f64,
}

/// Liquidation value: long positions sold at the bid, short positions bought back at the ask.
pub fn liquidation_value(state: &PathState, eps: f64) -> f64 {
    let long = state.phi.max(0.0);
    let short = (-state.phi).max(0.0);
    state.phi0 * state.s_safe + long * (1.0 - eps) * state.s - short * state.s
}

#[derive(Debug, Clone, Copy)]
enum Regime {
    Reflected {
        coeffs: ShadowCoefficients,
        sell_y: f64,
        /// +1 without leverage, -1 with leverage: the side of `0` on which buying is triggered is `orient * y < 0`.
        orient: f64,
        l: f64,
        u: f64,
        m_lo: f64,
        m_hi: f64,
    },
    /// Merton weight one: everything in the risky asset, never trade.
    Degenerate,
}

/// One-step transition kernel for a solved market.
#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    params: MarketParams,
    policy: NoTradePolicy,
    dt: f64,
    sqrt_dt: f64,
    safe_growth: f64,
    regime: Regime,
}

impl Simulator {
    pub fn new(sol: &Solution, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSimConfig("dt must be positive".into()));
        }
        let params = sol.params;
        let regime = match (sol.shadow(), sol.policy.l, sol.policy.u) {
            (Some(coeffs), Some(l), Some(u)) => {
                let w = coeffs.w();
                let (m_lo, m_hi) = {
                    let (a, b) = (w.m_minus(), w.m_plus());
                    (a.min(b), a.max(b))
                };
                Regime::Reflected {
                    coeffs,
                    sell_y: w.sell_boundary(),
                    orient: if params.is_leveraged() { -1.0 } else { 1.0 },
                    l,
                    u,
                    m_lo,
                    m_hi,
                }
            }
            _ => Regime::Degenerate,
        };
        Ok(Self {
            params,
            policy: sol.policy,
            dt,
            sqrt_dt: dt.sqrt(),
            safe_growth: (params.r * dt).exp(),
            regime,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Range `[m_min, m_max]` that `w(y)` must stay in.
    pub fn weight_range(&self) -> (f64, f64) {
        match self.regime {
            Regime::Reflected { m_lo, m_hi, .. } => (m_lo, m_hi),
            Regime::Degenerate => (1.0, 1.0),
        }
    }

    /// Moves the endowment `(xi0, xi)` onto the no-trade region at time zero.
    pub fn initial(&self, cfg: &SimConfig) -> Result<(PathState, f64, f64)> {
        let eps = self.params.eps;
        let (s, s_safe) = (cfg.s0, cfg.s0_safe);
        match self.regime {
            Regime::Degenerate => {
                let phi = cfg.xi + cfg.xi0 * s_safe / s;
                let x = phi * s;
                let st = PathState {
                    y: 0.0,
                    local_lo: 0.0,
                    local_hi: 0.0,
                    x_shadow: x,
                    x_shadow_sde: x,
                    phi,
                    phi0: 0.0,
                    s,
                    s_safe,
                };
                Ok((st, 1.0, 0.0))
            }
            Regime::Reflected { coeffs, l, .. } => {
                let y = initial_state(cfg.xi0, cfg.xi, s, s_safe, &self.policy)?;
                let target = l * y.exp();
                let (mut phi, mut phi0) = (cfg.xi, cfg.xi0);
                let buy = (target * phi0 * s_safe - phi * s) / (s * (1.0 + target));
                if buy > 0.0 {
                    phi += buy;
                    phi0 -= buy * s / s_safe;
                } else {
                    let sell =
                        (phi * s - target * phi0 * s_safe) / (s * (1.0 + target * (1.0 - eps)));
                    if sell > 0.0 {
                        phi -= sell;
                        phi0 += sell * (1.0 - eps) * s / s_safe;
                    }
                }
                let (w, wp) = coeffs.w().eval_with_prime(y)?;
                let x = phi0 * s_safe + phi * s * coeffs.g_from(y, w);
                let st = PathState {
                    y,
                    local_lo: 0.0,
                    local_hi: 0.0,
                    x_shadow: x,
                    x_shadow_sde: x,
                    phi,
                    phi0,
                    s,
                    s_safe,
                };
                Ok((st, w, wp))
            }
        }
    }

    /// Advances one step with Brownian increment `dw ~ N(0, dt)`.
    pub fn step(&self, state: &PathState, dw: f64) -> Result<Step> {
        let (w, wp) = match self.regime {
            Regime::Reflected { coeffs, .. } => coeffs.w().eval_with_prime(state.y)?,
            Regime::Degenerate => (1.0, 0.0),
        };
        self.advance(state, w, wp, dw)
    }

    /// `step` with `w(y)` and `w'(y)` at the current state already known.
    #[inline]
    fn advance(&self, state: &PathState, w: f64, wp: f64, dw: f64) -> Result<Step> {
        let MarketParams {
            mu, sigma, r, eps, ..
        } = self.params;
        let dt = self.dt;
        let s = state.s * ((mu + r - 0.5 * sigma * sigma) * dt + sigma * dw).exp();
        let s_safe = state.s_safe * self.safe_growth;

        let Regime::Reflected {
            coeffs,
            sell_y,
            orient,
            l,
            u,
            ..
        } = self.regime
        else {
            let next = PathState {
                s,
                s_safe,
                x_shadow: state.phi * s,
                x_shadow_sde: state.x_shadow_sde
                    * ((mu + r - 0.5 * sigma * sigma) * dt + sigma * dw).exp(),
                ..*state
            };
            return Ok(Step {
                state: next,
                trade: Trade::None,
                w: 1.0,
                w_prime: 0.0,
                y_pre: 0.0,
                phi0_implied: 0.0,
            });
        };

        // shadow wealth through d log X = (r + w mu~ - w^2 sigma~^2 / 2) dt + w sigma~ dW
        let mu_t = coeffs.mu_tilde_from(w, wp);
        let sig_t = coeffs.sigma_tilde_from(w, wp);
        let x_sde = state.x_shadow_sde
            * ((r + w * mu_t - 0.5 * w * w * sig_t * sig_t) * dt + w * sig_t * dw).exp();

        let y_pre = state.y + (mu - 0.5 * sigma * sigma) * dt + sigma * dw;
        let (mut phi, mut phi0) = (state.phi, state.phi0);
        let (mut local_lo, mut local_hi) = (state.local_lo, state.local_hi);
        let mut trade = Trade::None;
        let mut phi0_implied = phi0;
        let y = if orient * y_pre < 0.0 {
            local_lo -= y_pre;
            let delta = (l * phi0 * s_safe - phi * s) / (s * (1.0 + l));
            phi += delta;
            phi0 -= delta * s / s_safe;
            phi0_implied = phi * s / (l * s_safe);
            trade = Trade::Buy(delta);
            0.0
        } else if orient * (y_pre - sell_y) > 0.0 {
            local_hi += y_pre - sell_y;
            let delta = (phi * s - u * phi0 * s_safe) / (s * (1.0 + u * (1.0 - eps)));
            phi -= delta;
            phi0 += delta * (1.0 - eps) * s / s_safe;
            phi0_implied = phi * s / (u * s_safe);
            trade = Trade::Sell(delta);
            sell_y
        } else {
            y_pre
        };

        let (w_new, wp_new) = coeffs.w().eval_with_prime(y)?;
        let x_shadow = phi0 * s_safe + phi * s * coeffs.g_from(y, w_new);
        let next = PathState {
            y,
            local_lo,
            local_hi,
            x_shadow,
            x_shadow_sde: x_sde,
            phi,
            phi0,
            s,
            s_safe,
        };
        Ok(Step {
            state: next,
            trade,
            w: w_new,
            w_prime: wp_new,
            y_pre,
            phi0_implied,
        })
    }
}

/// Per-path summary, one CSV row each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub path_id: u64,
    pub terminal_xi: f64,
    /// Sum of `|d phi| / phi` per year.
    pub turnover: f64,
    pub occupancy_lo: f64,
    pub occupancy_hi: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// `log(x_shadow_sde / x_shadow)` at the horizon.
    pub sde_log_gap: f64,
    pub localization_violations: u64,
    pub containment_violations: u64,
    pub sandwich_violations: u64,
    pub self_financing_max_rel_err: f64,
}

/// Counts of pathwise invariant violations, summed over paths.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InvariantTally {
    /// Steps where shares changed without a boundary hit.
    pub localization: u64,
    /// Steps where `w(y)` left `[m_-, m_+]`.
    pub containment: u64,
    /// Steps where the liquidation value left `[(1 - eps w / (1 - eps)) X~, X~]`.
    pub sandwich: u64,
    pub self_financing_max_rel_err: f64,
}

impl InvariantTally {
    pub fn all_hold(&self) -> bool {
        self.localization == 0
            && self.containment == 0
            && self.sandwich == 0
            && self.self_financing_max_rel_err <= TOL_RELATIVE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Certainty-equivalent rate of the liquidation value, per year.
    pub ce_rate: f64,
    /// Delta-method standard error of `ce_rate`.
    pub ce_se: f64,
    pub mean_turnover: f64,
    /// Fraction of steps ending on the buy boundary.
    pub occupancy_lo: f64,
    /// Fraction of steps ending on the sell boundary.
    pub occupancy_hi: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub mean_sde_log_gap: f64,
    pub n_paths: u64,
    pub n_steps: u64,
    pub horizon: f64,
    pub dt: f64,
    pub invariants: InvariantTally,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub result: SimResult,
    pub paths: Vec<PathSummary>,
}

/// Worker count from `NOTRADE_THREADS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Deterministic normal stream for one path.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

pub fn estimate_ce_rate(cfg: &SimConfig, sol: &Solution) -> Result<SimOutput> {
    estimate_ce_rate_with_workers(cfg, sol, default_workers())
}

/// Simulates `cfg.n_paths` independent paths on `workers` threads.
pub fn estimate_ce_rate_with_workers(
    cfg: &SimConfig,
    sol: &Solution,
    workers: usize,
) -> Result<SimOutput> {
    cfg.validate()?;
    let n_steps = cfg.n_steps();
    let sim = Simulator::new(sol, cfg.horizon / n_steps as f64)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidSimConfig(e.to_string()))?;
    let paths: Vec<PathSummary> = pool.install(|| {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|id| run_path(&sim, cfg, n_steps, id))
            .collect::<Result<Vec<_>>>()
    })?;
    let result = aggregate(&sol.params, cfg, n_steps, sim.dt(), &paths)?;
    Ok(SimOutput { result, paths })
}

fn run_path(sim: &Simulator, cfg: &SimConfig, n_steps: u64, path_id: u64) -> Result<PathSummary> {
    let eps = sim.params.eps;
    let mut rng = path_rng(cfg.seed, path_id);
    let (mut state, mut w, mut wp) = sim.initial(cfg)?;
    let (m_lo, m_hi) = sim.weight_range();
    let mut summary = PathSummary {
        path_id,
        terminal_xi: 0.0,
        turnover: 0.0,
        occupancy_lo: 0.0,
        occupancy_hi: 0.0,
        w_min: w,
        w_max: w,
        sde_log_gap: 0.0,
        localization_violations: 0,
        containment_violations: 0,
        sandwich_violations: 0,
        self_financing_max_rel_err: 0.0,
    };
    let (mut hits_lo, mut hits_hi) = (0u64, 0u64);
    for _ in 0..n_steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        let step = sim.advance(&state, w, wp, sim.sqrt_dt * z)?;
        let next = step.state;
        match step.trade {
            Trade::Buy(d) => {
                hits_lo += 1;
                summary.turnover += (d / state.phi.abs().max(f64::MIN_POSITIVE))
                    .abs()
                    .min(f64::MAX);
            }
            Trade::Sell(d) => {
                hits_hi += 1;
                summary.turnover += (d / state.phi.abs().max(f64::MIN_POSITIVE))
                    .abs()
                    .min(f64::MAX);
            }
            Trade::None => {}
        }
        if cfg.check_invariants {
            if matches!(step.trade, Trade::None) && next.phi.to_bits() != state.phi.to_bits() {
                summary.localization_violations += 1;
            }
            if step.w < m_lo - TOL_REFLECT || step.w > m_hi + TOL_REFLECT {
                summary.containment_violations += 1;
            }
            let xi = liquidation_value(&next, eps);
            let x = next.x_shadow;
            let floor = (1.0 - eps / (1.0 - eps) * step.w) * x;
            let slack = TOL_RELATIVE * x.abs();
            if xi > x + slack || xi < floor - slack {
                summary.sandwich_violations += 1;
            }
            if !matches!(step.trade, Trade::None) {
                let err = ((next.phi0 - step.phi0_implied) / next.phi0).abs();
                summary.self_financing_max_rel_err = summary.self_financing_max_rel_err.max(err);
            }
        }
        summary.w_min = summary.w_min.min(step.w);
        summary.w_max = summary.w_max.max(step.w);
        state = next;
        w = step.w;
        wp = step.w_prime;
    }
    summary.terminal_xi = liquidation_value(&state, eps);
    summary.turnover /= cfg.horizon;
    summary.occupancy_lo = hits_lo as f64 / n_steps as f64;
    summary.occupancy_hi = hits_hi as f64 / n_steps as f64;
    summary.sde_log_gap = (state.x_shadow_sde / state.x_shadow).ln();
    Ok(summary)
}

fn aggregate(
    params: &MarketParams,
    cfg: &SimConfig,
    n_steps: u64,
    dt: f64,
    paths: &[PathSummary],
) -> Result<SimResult> {
    let n = paths.len() as f64;
    if let Some(bad) = paths
        .iter()
        .find(|p| !(p.terminal_xi > 0.0 && p.terminal_xi.is_finite()))
    {
        return Err(Error::NumericalOverflow {
            path: bad.path_id,
            value: bad.terminal_xi,
        });
    }
    let t = cfg.horizon;
    let one_minus_gamma = 1.0 - params.gamma;
    let (ce_rate, ce_se) = if one_minus_gamma == 0.0 {
        let logs: Vec<f64> = paths.iter().map(|p| p.terminal_xi.ln()).collect();
        let (mean, var) = mean_var(&logs);
        (mean / t, (var / n).sqrt() / t)
    } else {
        // log-mean-exp of (1 - gamma) log Xi, shifted by its maximum
        let expo: Vec<f64> = paths
            .iter()
            .map(|p| one_minus_gamma * p.terminal_xi.ln())
            .collect();
        let shift = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = expo.iter().map(|e| (e - shift).exp()).collect();
        let (mean, var) = mean_var(&scaled);
        let log_mean = shift + mean.ln();
        let se_log = (var / n).sqrt() / mean;
        (
            log_mean / (one_minus_gamma * t),
            se_log / (one_minus_gamma.abs() * t),
        )
    };
    let mut tally = InvariantTally::default();
    for p in paths {
        tally.localization += p.localization_violations;
        tally.containment += p.containment_violations;
        tally.sandwich += p.sandwich_violations;
        tally.self_financing_max_rel_err = tally
            .self_financing_max_rel_err
            .max(p.self_financing_max_rel_err);
    }
    let mean_of = |f: fn(&PathSummary) -> f64| paths.iter().map(f).sum::<f64>() / n;
    Ok(SimResult {
        ce_rate,
        ce_se,
        mean_turnover: mean_of(|p| p.turnover),
        occupancy_lo: mean_of(|p| p.occupancy_lo),
        occupancy_hi: mean_of(|p| p.occupancy_hi),
        w_min: paths.iter().map(|p| p.w_min).fold(f64::INFINITY, f64::min),
        w_max: paths
            .iter()
            .map(|p| p.w_max)
            .fold(f64::NEG_INFINITY, f64::max),
        mean_sde_log_gap: mean_of(|p| p.sde_log_gap),
        n_paths: cfg.n_paths,
        n_steps,
        horizon: t,
        dt,
        invariants: tally,
    })
}

/// Sample mean and unbiased variance.
fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}
