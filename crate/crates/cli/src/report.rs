//! Report sections shared by the commands.

use std::path::Path;

use notrade_core::bounds::{Endowment, HorizonBounds};
use notrade_core::gapsolve::lambda_asymptotic;
use notrade_core::mc::{PathSummary, SimConfig, SimResult};
use notrade_core::policy::{boundaries_asymptotic, esr_asymptotic};
use notrade_core::{baseline, MarketParams, NoTradePolicy, Solution};

use crate::json::{number, Json};
use crate::CliError;

/// Version tag carried by every JSON report.
pub const SCHEMA: &str = "notrade-report/1";

pub fn params_json(p: &MarketParams) -> Json {
    Json::obj([
        ("mu", p.mu.into()),
        ("sigma", p.sigma.into()),
        ("r", p.r.into()),
        ("gamma", p.gamma.into()),
        ("eps", p.eps.into()),
    ])
}

pub fn policy_json(p: &NoTradePolicy) -> Json {
    Json::obj([
        ("lambda", p.lambda.into()),
        ("pi_minus", p.pi_minus.into()),
        ("pi_plus", p.pi_plus.into()),
        ("l", p.l.into()),
        ("u", p.u.into()),
        ("beta", p.beta.into()),
        ("esr", p.esr.into()),
        ("degenerate", p.degenerate.into()),
    ])
}

pub fn asymptotics_json(p: &MarketParams, policy: &NoTradePolicy) -> Json {
    let (lo, hi) = boundaries_asymptotic(p);
    let esr0 = baseline(p).esr0;
    let esr = esr_asymptotic(p);
    Json::obj([
        ("lambda", lambda_asymptotic(p).into()),
        ("pi_minus", lo.into()),
        ("pi_plus", hi.into()),
        ("esr", esr.into()),
        ("esr_frictionless", esr0.into()),
        ("loss_exact", (esr0 - policy.esr).into()),
        ("loss_asym", (esr0 - esr).into()),
    ])
}

pub fn diagnostics_json(sol: &Solution) -> Json {
    match (&sol.gap, &sol.w) {
        (Some(gap), Some(w)) => Json::obj([
            ("branch", Json::from(w.branch().to_string().as_str())),
            ("residual", gap.residual.into()),
            ("iterations", Json::Int(gap.iterations as u64)),
            (
                "bracket",
                Json::Arr(vec![gap.bracket.0.into(), gap.bracket.1.into()]),
            ),
            ("sell_boundary", w.sell_boundary().into()),
        ]),
        _ => Json::obj([
            ("branch", Json::Null),
            ("residual", 0.0.into()),
            ("iterations", Json::Int(0)),
            ("bracket", Json::Null),
            ("sell_boundary", Json::Null),
        ]),
    }
}

/// Common head of a report followed by `extra` sections.
pub fn solution_report(command: &str, sol: &Solution, extra: Vec<(&str, Json)>) -> Json {
    let mut fields = vec![
        ("schema", Json::from(SCHEMA)),
        ("command", Json::from(command)),
        ("params", params_json(&sol.params)),
        ("policy", policy_json(&sol.policy)),
        ("asymptotics", asymptotics_json(&sol.params, &sol.policy)),
        ("diagnostics", diagnostics_json(sol)),
    ];
    fields.extend(extra);
    Json::obj(fields)
}

pub fn bounds_json(b: &HorizonBounds, end: &Endowment) -> Json {
    Json::obj([
        ("horizon", b.horizon.into()),
        ("xi0", end.xi0.into()),
        ("xi", end.xi.into()),
        ("upper", b.upper.into()),
        ("lower", b.lower.into()),
        ("loss_cap", b.loss_cap.into()),
        ("int_w", b.int_w.into()),
        ("int_w_tilde", b.int_w_tilde.into()),
        (
            "mode",
            Json::from(if b.leading_order_only {
                "leading_order"
            } else {
                "exact"
            }),
        ),
        ("leading_order_only", b.leading_order_only.into()),
    ])
}

pub fn sim_json(cfg: &SimConfig, r: &SimResult) -> Json {
    let inv = &r.invariants;
    Json::obj([
        ("horizon", r.horizon.into()),
        ("dt", r.dt.into()),
        ("n_steps", Json::Int(r.n_steps)),
        ("n_paths", Json::Int(r.n_paths)),
        ("seed", Json::Int(cfg.seed)),
        ("ce_rate", r.ce_rate.into()),
        ("ce_se", r.ce_se.into()),
        ("mean_turnover", r.mean_turnover.into()),
        ("occupancy_lo", r.occupancy_lo.into()),
        ("occupancy_hi", r.occupancy_hi.into()),
        ("w_min", r.w_min.into()),
        ("w_max", r.w_max.into()),
        ("mean_sde_log_gap", r.mean_sde_log_gap.into()),
        (
            "invariants",
            Json::obj([
                ("localization_violations", Json::Int(inv.localization)),
                ("containment_violations", Json::Int(inv.containment)),
                ("sandwich_violations", Json::Int(inv.sandwich)),
                (
                    "self_financing_max_rel_err",
                    inv.self_financing_max_rel_err.into(),
                ),
            ]),
        ),
    ])
}

/// Outcome of comparing a simulation with the finite-horizon bounds.
#[derive(Debug, Clone, Copy)]
pub struct Verdict {
    pub within_bounds: bool,
    pub within_3se: bool,
    pub invariants_hold: bool,
    /// Without a spread the bounds coincide, so only the standard-error test applies.
    pub frictionless: bool,
    pub target: f64,
}

impl Verdict {
    /// `target` is the long-run rate plus `log(initial wealth) / T`.
    pub fn new(target: f64, b: &HorizonBounds, r: &SimResult, frictionless: bool) -> Self {
        Self {
            within_bounds: b.lower <= r.ce_rate && r.ce_rate <= b.upper,
            within_3se: (r.ce_rate - target).abs() <= 3.0 * r.ce_se,
            invariants_hold: r.invariants.all_hold(),
            frictionless,
            target,
        }
    }

    pub fn pass(&self) -> bool {
        self.invariants_hold && self.within_3se && (self.frictionless || self.within_bounds)
    }

    pub fn to_json(&self) -> Json {
        Json::obj([
            ("target", self.target.into()),
            ("within_bounds", self.within_bounds.into()),
            ("within_3se", self.within_3se.into()),
            ("invariants_hold", self.invariants_hold.into()),
            ("pass", self.pass().into()),
        ])
    }
}

pub struct SweepRow {
    pub eps: f64,
    pub lambda_asym: f64,
    pub esr_asym: f64,
    pub esr0: f64,
    pub result: notrade_core::Result<Solution>,
}

impl SweepRow {
    pub fn status(&self) -> &'static str {
        match &self.result {
            Ok(_) => "ok",
            Err(e) => e.kind(),
        }
    }

    pub fn to_json(&self) -> Json {
        let mut fields = vec![
            ("eps", Json::from(self.eps)),
            ("lambda_asym", self.lambda_asym.into()),
            ("esr_asym", self.esr_asym.into()),
        ];
        if let Ok(sol) = &self.result {
            let p = &sol.policy;
            fields.extend([
                ("lambda_exact", Json::from(p.lambda)),
                ("pi_minus", p.pi_minus.into()),
                ("pi_plus", p.pi_plus.into()),
                ("l", p.l.into()),
                ("u", p.u.into()),
                ("esr_exact", p.esr.into()),
                ("loss", (self.esr0 - p.esr).into()),
            ]);
        }
        fields.push(("status", Json::from(self.status())));
        Json::obj(fields)
    }
}

pub const SWEEP_HEADER: [&str; 11] = [
    "eps",
    "lambda_exact",
    "lambda_asym",
    "pi_minus",
    "pi_plus",
    "l",
    "u",
    "esr_exact",
    "esr_asym",
    "loss",
    "status",
];

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::bad_input(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(io)?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, number);
    for row in rows {
        let mut rec = vec![number(row.eps)];
        match &row.result {
            Ok(sol) => {
                let p = &sol.policy;
                rec.extend([
                    number(p.lambda),
                    number(row.lambda_asym),
                    number(p.pi_minus),
                    number(p.pi_plus),
                    opt(p.l),
                    opt(p.u),
                    number(p.esr),
                    number(row.esr_asym),
                    number(row.esr0 - p.esr),
                ]);
            }
            Err(_) => {
                rec.extend([String::new(), number(row.lambda_asym)]);
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.extend([number(row.esr_asym), String::new()]);
            }
        }
        rec.push(row.status().to_owned());
        w.write_record(&rec).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::bad_input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Two-column `key,value` rendering of a report with dotted keys.
pub fn flatten_csv(doc: &Json) -> String {
    fn walk(prefix: &str, v: &Json, out: &mut Vec<(String, String)>) {
        let key = |k: &str| {
            if prefix.is_empty() {
                k.to_owned()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Json::Obj(fields) => fields.iter().for_each(|(k, v)| walk(&key(k), v, out)),
            Json::Arr(items) => items
                .iter()
                .enumerate()
                .for_each(|(i, v)| walk(&key(&i.to_string()), v, out)),
            Json::Null => out.push((prefix.to_owned(), String::new())),
            Json::Bool(b) => out.push((prefix.to_owned(), b.to_string())),
            Json::Num(x) => out.push((prefix.to_owned(), number(*x))),
            Json::Int(n) => out.push((prefix.to_owned(), n.to_string())),
            Json::Str(s) => out.push((prefix.to_owned(), s.clone())),
        }
    }
    let mut rows = Vec::new();
    walk("", doc, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"]).unwrap();
    for (k, v) in rows {
        w.write_record([k, v]).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).expect("csv output is utf-8")
}

pub fn write_path_csv(path: &Path, paths: &[PathSummary]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::bad_input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "path_id",
        "terminal_xi",
        "turnover",
        "occupancy_lo",
        "occupancy_hi",
    ])
    .map_err(io)?;
    for p in paths {
        w.write_record([
            p.path_id.to_string(),
            number(p.terminal_xi),
            number(p.turnover),
            number(p.occupancy_lo),
            number(p.occupancy_hi),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::bad_input(e.to_string()))
}
