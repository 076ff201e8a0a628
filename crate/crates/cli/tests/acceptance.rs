//! Acceptance suite. Prints one line per criterion and exits nonzero if any fails.
//!
//! Every reference value here comes from an oracle that does not share the
//! production code path: Runge-Kutta integration of the Riccati equation with
//! bisection for the gap parameter, composite adaptive Simpson quadrature,
//! central finite differences, and the closed-form frictionless quantities.

use std::process::{Command, ExitCode};
use std::time::Instant;

use notrade_core::bounds::{
    finite_horizon_bounds, integral_w, integral_w_tilde, BoundMode, Endowment,
};
use notrade_core::mc::{default_workers, estimate_ce_rate_with_workers, SimConfig};
use notrade_core::{solve, Branch, MarketParams, Solution, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p1() -> MarketParams {
    MarketParams {
        mu: 0.08,
        sigma: 0.16,
        r: 0.02,
        gamma: 5.0,
        eps: 0.01,
    }
}

/// One market per closed-form branch.
fn branch_cases() -> Vec<(Branch, MarketParams)> {
    vec![
        (Branch::Tan, p1()),
        (
            Branch::Tanh,
            MarketParams {
                gamma: 1.25,
                ..p1()
            },
        ),
        (Branch::Coth, MarketParams { gamma: 0.5, ..p1() }),
        (
            Branch::LogLinear,
            MarketParams {
                gamma: 1.0,
                mu: 0.02,
                ..p1()
            },
        ),
    ]
}

const EPS_GRID: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn solved(p: &MarketParams) -> Solution {
    solve(p, DEFAULT_TOL).unwrap_or_else(|e| panic!("solve failed for {p:?}: {e}"))
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Riccati right-hand side: w' = -(1 - gamma) w^2 - (2 mu / sigma^2 - 1) w + (mu^2 - lambda^2) / (gamma sigma^4).
fn riccati_rhs(p: &MarketParams, lambda: f64, w: f64) -> f64 {
    let s2 = p.sigma * p.sigma;
    -(1.0 - p.gamma) * w * w - (2.0 * p.mu / s2 - 1.0) * w
        + (p.mu * p.mu - lambda * lambda) / (p.gamma * s2 * s2)
}

/// Boundary mismatch from classical RK4 integration of the Riccati equation.
fn rk4_residual(p: &MarketParams, lambda: f64) -> f64 {
    let gv = p.gamma * p.sigma * p.sigma;
    let (m_lo, m_hi) = ((p.mu - lambda) / gv, (p.mu + lambda) / gv);
    let l = m_lo / (1.0 - m_lo);
    let u = m_hi / ((1.0 - m_hi) * (1.0 - p.eps));
    let end = (u / l).ln();
    let n = 4000;
    let h = end / n as f64;
    let mut w = m_lo;
    for _ in 0..n {
        let k1 = riccati_rhs(p, lambda, w);
        let k2 = riccati_rhs(p, lambda, w + 0.5 * h * k1);
        let k3 = riccati_rhs(p, lambda, w + 0.5 * h * k2);
        let k4 = riccati_rhs(p, lambda, w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    w - m_hi
}

/// Gap parameter by bisection on the RK4 residual.
fn oracle_lambda(p: &MarketParams, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = rk4_residual(p, lo);
    assert!(
        f_lo * rk4_residual(p, hi) < 0.0,
        "oracle bracket [{lo}, {hi}] has no sign change"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = rk4_residual(p, mid);
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Composite adaptive Simpson quadrature with Richardson correction.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut count = 0;
    while count < 50 {
        let p = MarketParams {
            mu: rng.random_range(0.01..0.2),
            sigma: rng.random_range(0.05..0.5),
            r: rng.random_range(-0.01..0.06),
            gamma: rng.random_range(0.3..12.0),
            eps: 0.0,
        };
        let pi = p.mu / (p.gamma * p.sigma * p.sigma);
        if (pi - 1.0).abs() < 1e-6 {
            continue;
        }
        let sol = solved(&p);
        let esr = p.r + p.mu * p.mu / (2.0 * p.gamma * p.sigma * p.sigma);
        let errs = [
            sol.policy.lambda.abs(),
            (sol.policy.pi_minus - pi).abs() / pi.max(1.0),
            (sol.policy.pi_plus - pi).abs() / pi.max(1.0),
            (sol.policy.esr - esr).abs(),
        ];
        worst = errs.iter().copied().fold(worst, f64::max);
        count += 1;
    }
    outcome(
        worst <= 1e-14,
        format!("50 random markets, max deviation {worst:.2e} (tol 1e-14)"),
    )
}

fn criterion_2() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (branch, p) in branch_cases() {
        let sol = solved(&p);
        let w = sol.w.unwrap();
        let lambda = sol.policy.lambda;
        let (lo, hi) = w.domain();
        let mut worst = 0.0f64;
        for y in grid(lo, hi, 1000) {
            let (v, dv) = w.eval_with_prime(y).unwrap();
            worst = worst.max((dv - riccati_rhs(&p, lambda, v)).abs());
        }
        // the analytic derivative itself against a central difference
        let h = 1e-3 * (hi - lo).abs();
        let mid = 0.5 * (lo + hi);
        let at = |k: f64| w.eval(mid + k * h).unwrap();
        let fd = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h);
        let dv = w.prime(mid).unwrap();
        let fd_err = (fd - dv).abs() / dv.abs().max(1.0);
        let ok = w.branch() == branch && worst < 1e-10 && fd_err < 1e-8;
        pass &= ok;
        parts.push(format!("{}: {worst:.1e}, fd {fd_err:.1e}", w.branch()));
    }
    outcome(
        pass,
        format!("max residual per branch [{}] (tol 1e-10)", parts.join(", ")),
    )
}

fn criterion_3() -> Outcome {
    let mut markets: Vec<MarketParams> = branch_cases().into_iter().map(|(_, p)| p).collect();
    for eps in EPS_GRID {
        markets.push(p1().with_eps(eps));
        markets.push(
            MarketParams {
                gamma: 1.25,
                ..p1()
            }
            .with_eps(eps),
        );
    }
    let mut worst = 0.0f64;
    for p in &markets {
        let sol = solved(p);
        let w = sol.w.unwrap();
        let (m_lo, m_hi) = (sol.policy.pi_minus, sol.policy.pi_plus);
        worst = worst.max((w.prime(0.0).unwrap() - (m_lo - m_lo * m_lo)).abs());
        worst = worst.max((w.prime(w.sell_boundary()).unwrap() - (m_hi - m_hi * m_hi)).abs());
    }
    outcome(
        worst < 1e-8,
        format!(
            "{} solved markets, max |w' - (m - m^2)| = {worst:.2e} (tol 1e-8)",
            markets.len()
        ),
    )
}

fn coefficient(p: &MarketParams) -> f64 {
    let pi = p.mu / (p.gamma * p.sigma * p.sigma);
    (3.0 / (4.0 * p.gamma) * pi * pi * (1.0 - pi) * (1.0 - pi)).cbrt()
}

fn criterion_4() -> Outcome {
    let mut logs = Vec::new();
    let mut ratios = Vec::new();
    let mut oracle_err = 0.0f64;
    // the grid runs from the widest spread down
    let mut increasing = true;
    let mut prev = f64::INFINITY;
    for eps in EPS_GRID {
        let p = p1().with_eps(eps);
        let lam = solved(&p).policy.lambda;
        let gv = p.gamma * p.sigma * p.sigma;
        let asym = gv * coefficient(&p) * eps.cbrt();
        let oracle = oracle_lambda(&p, 0.5 * asym, (2.0 * asym).min(0.999 * p.mu));
        oracle_err = oracle_err.max((lam - oracle).abs() / oracle);
        increasing &= lam < prev;
        prev = lam;
        logs.push((eps.ln(), lam.ln()));
        ratios.push((lam - asym).abs() / eps);
    }
    let n = logs.len() as f64;
    let (sx, sy) = logs
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let slope = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum::<f64>();
    let bounded = ratios.iter().all(|r| *r < 10.0) && ratios.last().unwrap() <= &(2.0 * ratios[0]);
    let pass = (slope - 1.0 / 3.0).abs() <= 0.02 && bounded && increasing && oracle_err < 1e-8;
    outcome(
        pass,
        format!(
            "slope {slope:.5} (1/3 +- 0.02), |lambda - asym|/eps in [{:.3}, {:.3}], oracle rel err {oracle_err:.1e}",
            ratios.iter().copied().fold(f64::INFINITY, f64::min),
            ratios.iter().copied().fold(0.0, f64::max)
        ),
    )
}

fn criterion_5() -> Outcome {
    let p = p1().with_eps(1e-5);
    let gv = p.gamma * p.sigma * p.sigma;
    let esr0 = p.r + p.mu * p.mu / (2.0 * gv);
    let printed = 0.5 * gv * coefficient(&p).powi(2);
    let scaled = (esr0 - solved(&p).policy.esr) / p.eps.powf(2.0 / 3.0);
    let rel = (scaled / printed - 1.0).abs();
    outcome(
        rel < 0.05,
        format!(
            "scaled loss {scaled:.6e} vs coefficient {printed:.6e}, rel diff {rel:.2e} (tol 5%)"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut worst_out = 0.0f64;
    let mut worst_end = 0.0f64;
    let mut worst_match = 0.0f64;
    for (_, p) in branch_cases() {
        let sol = solved(&p);
        let w = sol.w.unwrap();
        let sh = sol.shadow().unwrap();
        let l = sol.policy.l.unwrap();
        let (lo, hi) = w.domain();
        for y in grid(lo, hi, 10_000) {
            let wy = w.eval(y).unwrap();
            let g = wy / (l * y.exp() * (1.0 - wy));
            worst_match = worst_match.max((g - sh.g(y).unwrap()).abs());
            worst_out = worst_out.max((1.0 - p.eps - g).max(g - 1.0));
        }
        worst_end = worst_end.max((sh.g(0.0).unwrap() - 1.0).abs());
        worst_end = worst_end.max((sh.g(w.sell_boundary()).unwrap() - (1.0 - p.eps)).abs());
    }
    let pass = worst_out <= 1e-12 && worst_end < 1e-10 && worst_match < 1e-12;
    outcome(
        pass,
        format!(
            "max excursion outside spread {:.1e}, endpoint error {worst_end:.1e} (tol 1e-10)",
            worst_out.max(0.0)
        ),
    )
}

fn criterion_7() -> Outcome {
    let p = MarketParams {
        gamma: 1.0,
        mu: 0.02,
        ..p1()
    };
    let lev = MarketParams { gamma: 1.0, ..p1() };
    let mut worst = 0.0f64;
    for p in [p, lev] {
        let sol = solved(&p);
        let sh = sol.shadow().unwrap();
        let (lo, hi) = sh.w().domain();
        for y in grid(lo, hi, 1000) {
            let s = sh.sigma_tilde(y).unwrap();
            worst = worst.max((sh.mu_tilde(y).unwrap() / (s * s) - sh.w().eval(y).unwrap()).abs());
        }
    }
    outcome(
        worst < 1e-10,
        format!("max |mu~/sigma~^2 - w| = {worst:.2e} (tol 1e-10)"),
    )
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (label, p) in [
        ("reference", p1()),
        (
            "leverage",
            MarketParams {
                gamma: 1.25,
                ..p1()
            },
        ),
        ("coth", MarketParams { gamma: 0.5, ..p1() }),
        ("small-spread", p1().with_eps(1e-4)),
    ] {
        let sol = solved(&p);
        let gap = sol.gap.unwrap();
        let w = sol.w.unwrap();
        let end = w.sell_boundary();
        let q_w = simpson(&|y| w.eval(y).unwrap(), 0.0, end, 1e-14);
        let q_wt = simpson(
            &|y| {
                let (v, dv) = w.eval_with_prime(y).unwrap();
                v - dv / (1.0 - v)
            },
            0.0,
            end,
            1e-14,
        );
        let err = (integral_w(&p, &gap).unwrap() - q_w)
            .abs()
            .max((integral_w_tilde(&p, &gap).unwrap() - q_wt).abs());
        worst = worst.max(err);
        parts.push(format!("{label}: {err:.1e}"));
    }
    outcome(
        worst < 1e-9,
        format!(
            "closed form vs adaptive Simpson [{}] (tol 1e-9)",
            parts.join(", ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let p = p1();
    let sol = solved(&p);
    let cfg = SimConfig {
        horizon: 50.0,
        dt: 1.0 / 2520.0,
        n_paths: 10_000,
        seed: 20240601,
        ..SimConfig::default()
    };
    let end = Endowment {
        xi0: cfg.xi0,
        xi: cfg.xi,
        s0: cfg.s0,
        s0_safe: cfg.s0_safe,
    };
    let b = finite_horizon_bounds(&sol, cfg.horizon, &end, BoundMode::Exact).unwrap();
    let started = Instant::now();
    let out = estimate_ce_rate_with_workers(&cfg, &sol, default_workers())
        .unwrap()
        .result;
    let secs = started.elapsed().as_secs_f64();
    let target = sol.policy.esr;
    let inside = b.lower <= out.ce_rate && out.ce_rate <= b.upper;
    let close = (out.ce_rate - target).abs() <= 3.0 * out.ce_se;
    let inv = out.invariants;
    let pass = inside && close && inv.all_hold();
    outcome(
        pass,
        format!(
            "ce {:.6} +- {:.6} (se); bounds [{:.6}, {:.6}] {}; r+beta {:.6} within 3 se: {}; \
             localization/containment/sandwich violations {}/{}/{}, self-financing err {:.1e}; {:.0}s",
            out.ce_rate,
            out.ce_se,
            b.lower,
            b.upper,
            if inside { "contain it" } else { "do not contain it" },
            target,
            close,
            inv.localization,
            inv.containment,
            inv.sandwich,
            inv.self_financing_max_rel_err,
            secs
        ),
    )
}

fn criterion_10() -> Outcome {
    let stock = Endowment {
        xi0: 0.0,
        xi: 1.0,
        s0: 1.0,
        s0_safe: 1.0,
    };
    let horizon = 50.0;
    let mut parts = Vec::new();
    let mut last = 0.0;
    let mut target = 0.0;
    for eps in EPS_GRID {
        let p = p1().with_eps(eps);
        let sol = solved(&p);
        let b = finite_horizon_bounds(&sol, horizon, &stock, BoundMode::Exact).unwrap();
        target = 3.0 * p.mu / (p.gamma * p.sigma * p.sigma) + 1.0;
        last = (b.upper - b.lower) * horizon / eps;
        parts.push(format!("{last:.4}"));
    }
    let rel = (last / target - 1.0).abs();
    outcome(
        rel < 0.05,
        format!(
            "(upper - lower) T / eps = [{}] -> {target:.4}, rel diff {rel:.2e} (tol 5%)",
            parts.join(", ")
        ),
    )
}

fn criterion_11() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_notrade");
    let run = |threads: &str| {
        let out = Command::new(bin)
            .args([
                "simulate",
                "--horizon",
                "5",
                "--dt",
                "0.004",
                "--paths",
                "400",
                "--seed",
                "99",
            ])
            .args(["--threads", threads])
            .output()
            .expect("run notrade");
        (out.status.code(), out.stdout)
    };
    let (code1, one) = run("1");
    let (code8, eight) = run("8");
    let same = one == eight && !one.is_empty();
    outcome(
        same && code1 == code8,
        format!(
            "{} bytes with 1 worker, {} bytes with 8 workers, identical: {same}",
            one.len(),
            eight.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("frictionless collapse", criterion_1),
        ("ODE residual", criterion_2),
        ("smooth pasting", criterion_3),
        ("eps^(1/3) law", criterion_4),
        ("eps^(2/3) welfare law", criterion_5),
        ("shadow containment", criterion_6),
        ("log-utility identity", criterion_7),
        ("closed-form integrals", criterion_8),
        ("Monte Carlo bracketing", criterion_9),
        ("loss-cap scaling", criterion_10),
        ("determinism", criterion_11),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || id == *f) {
            continue;
        }
        let r = run();
        if !r.pass {
            failed += 1;
        }
        println!(
            "{id:<12} {:<4} {name}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
