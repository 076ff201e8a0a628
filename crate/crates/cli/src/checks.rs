//! Invariant suite behind `notrade check`.

use notrade_core::bounds::{integral_w, integral_w_tilde};
use notrade_core::quad;
use notrade_core::{baseline, solve, Branch, Error, MarketParams, Solution, DEFAULT_TOL};

use crate::json::{number, Json};
use crate::report::{params_json, SCHEMA};
use crate::{CheckArgs, CliError, Format, Output, Status};

const ODE_GRID: usize = 1000;
const SHADOW_GRID: usize = 10_000;

/// Built-in cases covering every branch of the closed form.
pub fn builtin_cases() -> Vec<(&'static str, MarketParams)> {
    let base = MarketParams {
        mu: 0.08,
        sigma: 0.16,
        r: 0.02,
        gamma: 5.0,
        eps: 0.01,
    };
    vec![
        ("reference", base),
        (
            "leverage",
            MarketParams {
                gamma: 1.25,
                ..base
            },
        ),
        ("low-risk-aversion", MarketParams { gamma: 0.5, ..base }),
        (
            "log-utility",
            MarketParams {
                gamma: 1.0,
                mu: 0.02,
                ..base
            },
        ),
    ]
}

#[derive(Debug, Clone)]
pub struct CheckRow {
    pub case: String,
    pub branch: String,
    pub check: &'static str,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

fn row(case: &str, branch: &str, check: &'static str, value: f64, tol: f64) -> CheckRow {
    CheckRow {
        case: case.into(),
        branch: branch.into(),
        check,
        value,
        tol,
        pass: value <= tol,
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| lo + (hi - lo) * i as f64 / n as f64)
}

/// Every invariant for one solved market; errors from evaluation propagate.
pub fn check_solution(case: &str, sol: &Solution) -> Result<Vec<CheckRow>, Error> {
    let p = &sol.params;
    let esr0 = baseline(p).esr0;
    let (Some(gap), Some(w), Some(shadow)) = (&sol.gap, &sol.w, sol.shadow()) else {
        let gap = (sol.policy.esr - esr0).abs();
        return Ok(vec![row(
            case,
            "degenerate",
            "frictionless_rate",
            gap,
            1e-14,
        )]);
    };
    let branch = w.branch().to_string();
    let mut rows = Vec::new();
    let (lo, hi) = w.domain();

    let mut ode = 0.0f64;
    for y in grid(lo, hi, ODE_GRID) {
        ode = ode.max(w.ode_residual(y)?.abs());
    }
    rows.push(row(case, &branch, "ode_residual", ode, 1e-10));

    let mut pasting = 0.0f64;
    for y in [lo, hi] {
        let (v, dv) = w.eval_with_prime(y)?;
        pasting = pasting.max((dv - (v - v * v)).abs());
    }
    rows.push(row(case, &branch, "smooth_pasting", pasting, 1e-8));
    rows.push(row(
        case,
        &branch,
        "boundary_residual",
        gap.residual.abs(),
        DEFAULT_TOL,
    ));

    let pol = &sol.policy;
    let quad_err = pol
        .quadratic(p, pol.pi_minus)
        .abs()
        .max(pol.quadratic(p, pol.pi_plus).abs());
    rows.push(row(case, &branch, "quadratic_roots", quad_err, 1e-12));

    let mut outside = 0.0f64;
    for y in grid(lo, hi, SHADOW_GRID) {
        let g = shadow.g(y)?;
        outside = outside.max((1.0 - p.eps - g).max(g - 1.0)).max(0.0);
    }
    rows.push(row(case, &branch, "shadow_containment", outside, 1e-12));
    let end_err = (shadow.g(0.0)? - 1.0)
        .abs()
        .max((shadow.g(w.sell_boundary())? - (1.0 - p.eps)).abs());
    rows.push(row(case, &branch, "shadow_endpoints", end_err, 1e-10));

    let int_w = integral_w(p, gap)?;
    let int_wt = integral_w_tilde(p, gap)?;
    let q_w = quad::integrate(|y| w.eval(y), 0.0, w.sell_boundary(), 1e-13)?;
    let q_wt = quad::integrate(|y| w.w_tilde(y), 0.0, w.sell_boundary(), 1e-13)?;
    rows.push(row(case, &branch, "integral_w", (int_w - q_w).abs(), 1e-9));
    rows.push(row(
        case,
        &branch,
        "integral_w_tilde",
        (int_wt - q_wt).abs(),
        1e-9,
    ));

    rows.push(row(
        case,
        &branch,
        "esr_below_frictionless",
        (pol.esr - esr0).max(0.0),
        0.0,
    ));
    Ok(rows)
}

pub fn cmd_check(a: &CheckArgs) -> Result<Output, CliError> {
    let cases = if a.market.is_given() {
        vec![("given", a.market.resolve()?)]
    } else {
        builtin_cases()
    };
    let mut rows = Vec::new();
    let mut branches = Vec::new();
    for (name, p) in &cases {
        let sol = solve(p, DEFAULT_TOL)?;
        if let Some(w) = &sol.w {
            branches.push(w.branch());
        }
        rows.extend(check_solution(name, &sol)?);
    }
    if !a.market.is_given() {
        let missing = [Branch::Tan, Branch::Tanh, Branch::Coth, Branch::LogLinear]
            .iter()
            .filter(|b| !branches.contains(b))
            .count();
        rows.push(row(
            "builtin",
            "all",
            "branch_coverage",
            missing as f64,
            0.0,
        ));
    }
    let status = if rows.iter().all(|r| r.pass) {
        Status::Ok
    } else {
        Status::InvariantFailure
    };
    let text = match a.output.format {
        None => table(&rows),
        Some(Format::Csv) => csv_rows(&rows),
        Some(Format::Json) => Json::obj([
            ("schema", Json::from(SCHEMA)),
            ("command", Json::from("check")),
            (
                "cases",
                Json::Arr(
                    cases
                        .iter()
                        .map(|(n, p)| {
                            Json::obj([("name", Json::from(*n)), ("params", params_json(p))])
                        })
                        .collect(),
                ),
            ),
            ("checks", Json::Arr(rows.iter().map(row_json).collect())),
            ("pass", Json::from(status == Status::Ok)),
        ])
        .render(),
    };
    Ok(Output { text, status })
}

fn row_json(r: &CheckRow) -> Json {
    Json::obj([
        ("case", Json::from(r.case.as_str())),
        ("branch", Json::from(r.branch.as_str())),
        ("check", Json::from(r.check)),
        ("value", r.value.into()),
        ("tol", r.tol.into()),
        ("pass", r.pass.into()),
    ])
}

fn table(rows: &[CheckRow]) -> String {
    let mut out = format!(
        "{:<18} {:<10} {:<24} {:>12} {:>9}  result\n",
        "case", "branch", "check", "value", "tol"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<18} {:<10} {:<24} {:>12.3e} {:>9.1e}  {}\n",
            r.case,
            r.branch,
            r.check,
            r.value,
            r.tol,
            if r.pass { "pass" } else { "FAIL" }
        ));
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    out.push_str(&format!("{} checks, {} failed\n", rows.len(), failed));
    out
}

fn csv_rows(rows: &[CheckRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case", "branch", "check", "value", "tol", "pass"])
        .unwrap();
    for r in rows {
        w.write_record([
            r.case.clone(),
            r.branch.clone(),
            r.check.to_owned(),
            number(r.value),
            number(r.tol),
            r.pass.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).expect("csv output is utf-8")
}
