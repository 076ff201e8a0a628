//! Command-line front end: argument parsing, command dispatch, and reports.

pub mod checks;
pub mod json;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use notrade_core::bounds::{finite_horizon_bounds, BoundMode, Endowment};
use notrade_core::gapsolve::lambda_asymptotic;
use notrade_core::mc::{
    default_workers, estimate_ce_rate_with_workers, SimConfig, DEFAULT_DT, DEFAULT_PATHS,
};
use notrade_core::policy::esr_asymptotic;
use notrade_core::{baseline, solve, Error, MarketParams, DEFAULT_TOL};
use serde::Deserialize;

use crate::json::Json;

/// Values used for any market parameter given neither on the command line nor in `--params`.
pub const DEFAULT_MARKET: MarketParams = MarketParams {
    mu: 0.08,
    sigma: 0.16,
    r: 0.02,
    gamma: 5.0,
    eps: 0.01,
};

#[derive(Debug, Parser)]
#[command(
    name = "notrade",
    version,
    about = "Optimal no-trade regions under proportional transaction costs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the no-trade region and compare with the small-spread expansion.
    Solve(SolveArgs),
    /// Solve over a grid of spreads and emit one row per spread.
    Sweep(SweepArgs),
    /// Finite-horizon bounds on the certainty-equivalent rate.
    Bounds(BoundsArgs),
    /// Monte Carlo estimate of the certainty-equivalent rate, checked against the bounds.
    Simulate(SimulateArgs),
    /// Run the invariant suite on a built-in parameter set or on the given market.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct MarketArgs {
    /// JSON file with any of the keys "mu", "sigma", "r", "gamma", "eps".
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Excess drift of the risky asset, per year.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Volatility, per square-root year.
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: Option<f64>,
    /// Safe rate, per year.
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Relative risk aversion.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Relative bid-ask spread.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Write the result here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct EndowmentArgs {
    /// Initial units of the safe asset.
    #[arg(long, default_value_t = 1.0)]
    pub xi0: f64,
    /// Initial shares of the risky asset.
    #[arg(long, default_value_t = 0.0)]
    pub xi: f64,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    /// Comma-separated spreads.
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5")]
    pub eps_grid: Vec<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    /// Years.
    #[arg(long, default_value_t = 50.0)]
    pub horizon: f64,
    #[command(flatten)]
    pub endowment: EndowmentArgs,
    /// Report the leading-order bounds instead of the exact ones.
    #[arg(long)]
    pub leading_order: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    /// Years.
    #[arg(long, default_value_t = 50.0)]
    pub horizon: f64,
    /// Years per step.
    #[arg(long, default_value_t = DEFAULT_DT)]
    pub dt: f64,
    #[arg(long, default_value_t = DEFAULT_PATHS)]
    pub paths: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub endowment: EndowmentArgs,
    /// Worker threads; defaults to NOTRADE_THREADS or the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write one CSV row per path to this file.
    #[arg(long)]
    pub path_csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub market: MarketArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    InvariantFailure = 1,
    BadInput = 2,
    SolverFailure = 3,
    BracketingFailure = 4,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn bad_input(message: impl Into<String>) -> Self {
        Self {
            status: Status::BadInput,
            kind: "BadInput".into(),
            message: message.into(),
        }
    }

    /// One-line JSON for standard error.
    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": self.kind,
            "message": self.message,
            "exit_code": self.status.code(),
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = if e.is_input_error() {
            Status::BadInput
        } else {
            Status::SolverFailure
        };
        Self {
            status,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

/// Rendered command output and the status to exit with.
#[derive(Debug)]
pub struct Output {
    pub text: String,
    pub status: Status,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    mu: Option<f64>,
    sigma: Option<f64>,
    r: Option<f64>,
    gamma: Option<f64>,
    eps: Option<f64>,
}

impl MarketArgs {
    /// File values, then flags, then [`DEFAULT_MARKET`] for anything still missing.
    pub fn resolve(&self) -> Result<MarketParams, CliError> {
        let file = match &self.params {
            Some(path) => read_params(path)?,
            None => ParamsFile::default(),
        };
        let d = DEFAULT_MARKET;
        let p = MarketParams {
            mu: self.mu.or(file.mu).unwrap_or(d.mu),
            sigma: self.sigma.or(file.sigma).unwrap_or(d.sigma),
            r: self.r.or(file.r).unwrap_or(d.r),
            gamma: self.gamma.or(file.gamma).unwrap_or(d.gamma),
            eps: self.eps.or(file.eps).unwrap_or(d.eps),
        };
        Ok(notrade_core::validate(p)?)
    }

    pub fn is_given(&self) -> bool {
        self.params.is_some()
            || self.mu.is_some()
            || self.sigma.is_some()
            || self.r.is_some()
            || self.gamma.is_some()
            || self.eps.is_some()
    }
}

fn read_params(path: &Path) -> Result<ParamsFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::bad_input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))
}

impl EndowmentArgs {
    pub fn endowment(&self) -> Endowment {
        Endowment {
            xi0: self.xi0,
            xi: self.xi,
            ..Endowment::default()
        }
    }
}

/// Runs one command and returns its rendered output.
pub fn execute(cli: &Cli) -> Result<Output, CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Check(a) => checks::cmd_check(a),
    }
}

/// Writes `text` to `--out` or standard output.
pub fn emit(output: &OutputArgs, text: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::bad_input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Output settings of whichever command `cli` holds.
pub fn output_args(cli: &Cli) -> &OutputArgs {
    match &cli.command {
        Command::Solve(a) => &a.output,
        Command::Sweep(a) => &a.output,
        Command::Bounds(a) => &a.output,
        Command::Simulate(a) => &a.output,
        Command::Check(a) => &a.output,
    }
}

fn render(doc: Json, format: Option<Format>) -> Result<String, CliError> {
    if let Some(path) = doc.first_non_finite() {
        return Err(CliError {
            status: Status::SolverFailure,
            kind: "NonFiniteOutput".into(),
            message: format!("non-finite value at {path}"),
        });
    }
    Ok(match format.unwrap_or(Format::Json) {
        Format::Json => doc.render(),
        Format::Csv => report::flatten_csv(&doc),
    })
}

pub fn cmd_solve(a: &SolveArgs) -> Result<Output, CliError> {
    let params = a.market.resolve()?;
    let sol = solve(&params, DEFAULT_TOL)?;
    let doc = report::solution_report("solve", &sol, Vec::new());
    Ok(Output {
        text: render(doc, a.output.format)?,
        status: Status::Ok,
    })
}

pub fn cmd_bounds(a: &BoundsArgs) -> Result<Output, CliError> {
    let params = a.market.resolve()?;
    let sol = solve(&params, DEFAULT_TOL)?;
    let mode = if a.leading_order {
        BoundMode::LeadingOrder
    } else {
        BoundMode::Exact
    };
    let end = a.endowment.endowment();
    let b = finite_horizon_bounds(&sol, a.horizon, &end, mode)?;
    let doc = report::solution_report(
        "bounds",
        &sol,
        vec![("bounds", report::bounds_json(&b, &end))],
    );
    Ok(Output {
        text: render(doc, a.output.format)?,
        status: Status::Ok,
    })
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<Output, CliError> {
    let params = a.market.resolve()?;
    let sol = solve(&params, DEFAULT_TOL)?;
    let end = a.endowment.endowment();
    let bounds = finite_horizon_bounds(&sol, a.horizon, &end, BoundMode::Exact)?;
    let cfg = SimConfig {
        horizon: a.horizon,
        dt: a.dt,
        n_paths: a.paths,
        seed: a.seed,
        xi0: end.xi0,
        xi: end.xi,
        s0: end.s0,
        s0_safe: end.s0_safe,
        check_invariants: true,
    };
    let workers = a.threads.filter(|&n| n > 0).unwrap_or_else(default_workers);
    let out = estimate_ce_rate_with_workers(&cfg, &sol, workers)?;
    if let Some(path) = &a.path_csv {
        report::write_path_csv(path, &out.paths)?;
    }
    let target = sol.policy.esr + end.wealth().ln() / a.horizon;
    let verdict = report::Verdict::new(target, &bounds, &out.result, params.eps == 0.0);
    let status = if verdict.pass() {
        Status::Ok
    } else {
        Status::BracketingFailure
    };
    let doc = report::solution_report(
        "simulate",
        &sol,
        vec![
            ("bounds", report::bounds_json(&bounds, &end)),
            ("sim", report::sim_json(&cfg, &out.result)),
            ("verdict", verdict.to_json()),
        ],
    );
    Ok(Output {
        text: render(doc, a.output.format)?,
        status,
    })
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<Output, CliError> {
    let base = a.market.resolve()?;
    if a.eps_grid.is_empty() {
        return Err(CliError::bad_input("empty --eps-grid"));
    }
    let rows: Vec<report::SweepRow> = a
        .eps_grid
        .iter()
        .map(|&eps| {
            let p = MarketParams { eps, ..base };
            report::SweepRow {
                eps,
                lambda_asym: lambda_asymptotic(&p),
                esr_asym: esr_asymptotic(&p),
                result: notrade_core::validate(p).and_then(|p| solve(&p, DEFAULT_TOL)),
                esr0: baseline(&p).esr0,
            }
        })
        .collect();
    let text = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => report::sweep_csv(&rows)?,
        Format::Json => {
            let doc = Json::obj([
                ("schema", Json::from(report::SCHEMA)),
                ("command", Json::from("sweep")),
                ("params", report::params_json(&base)),
                (
                    "rows",
                    Json::Arr(rows.iter().map(report::SweepRow::to_json).collect()),
                ),
            ]);
            render(doc, Some(Format::Json))?
        }
    };
    Ok(Output {
        text,
        status: Status::Ok,
    })
}
