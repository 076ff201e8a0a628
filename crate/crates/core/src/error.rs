use thiserror::Error;

/// Failures surfaced by the solver, bounds, and simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sigma must be positive and finite, got {sigma}")]
    NonPositiveVolatility { sigma: f64 },
    #[error("gamma must be positive and finite, got {gamma}")]
    NonPositiveRiskAversion { gamma: f64 },
    #[error("mu must be positive and finite, got {mu}")]
    NonPositiveDrift { mu: f64 },
    #[error("eps must lie in [0, 1), got {eps}")]
    SpreadOutOfRange { eps: f64 },
    #[error("r must be finite, got {r}")]
    NonFiniteRate { r: f64 },
    #[error("Merton weight mu/(gamma sigma^2) equals one; no reflected state exists")]
    DegenerateMerton,
    #[error("w has a pole between 0 and y = {y} (lambda = {lambda})")]
    PoleEncountered { lambda: f64, y: f64 },
    #[error("trading boundaries l = {l} and u = {u} do not share a sign")]
    SignError { l: f64, u: f64 },
    #[error("no sign change of the boundary residual found for lambda in ({lo}, {hi})")]
    NoBracket { lo: f64, hi: f64 },
    #[error("root finder stalled at lambda = {lambda} with residual {residual}")]
    NoConvergence { lambda: f64, residual: f64 },
    #[error("spread eps = {eps} too large: eps * pi_plus / (1 - eps) = {leverage_cost} >= 1")]
    SpreadTooLarge { eps: f64, leverage_cost: f64 },
    #[error("initial endowment is zero")]
    ZeroEndowment,
    #[error("initial endowment must be nonnegative, got ({xi0}, {xi})")]
    NegativeEndowment { xi0: f64, xi: f64 },
    #[error("horizon must be positive, got {horizon}")]
    NonPositiveHorizon { horizon: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
    #[error(
        "w solution (lambda = {w_lambda}) does not match gap solution (lambda = {gap_lambda})"
    )]
    InconsistentSolution { w_lambda: f64, gap_lambda: f64 },
    #[error("non-positive liquidation value {value} on path {path}")]
    NumericalOverflow { path: u64, value: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable short name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPositiveVolatility { .. } => "NonPositiveVolatility",
            Error::NonPositiveRiskAversion { .. } => "NonPositiveRiskAversion",
            Error::NonPositiveDrift { .. } => "NonPositiveDrift",
            Error::SpreadOutOfRange { .. } => "SpreadOutOfRange",
            Error::NonFiniteRate { .. } => "NonFiniteRate",
            Error::DegenerateMerton => "DegenerateMerton",
            Error::PoleEncountered { .. } => "PoleEncountered",
            Error::SignError { .. } => "SignError",
            Error::NoBracket { .. } => "NoBracket",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::SpreadTooLarge { .. } => "SpreadTooLarge",
            Error::ZeroEndowment => "ZeroEndowment",
            Error::NegativeEndowment { .. } => "NegativeEndowment",
            Error::NonPositiveHorizon { .. } => "NonPositiveHorizon",
            Error::InvalidSimConfig(_) => "InvalidSimConfig",
            Error::InconsistentSolution { .. } => "InconsistentSolution",
            Error::NumericalOverflow { .. } => "NumericalOverflow",
        }
    }

    /// True for rejected inputs, as opposed to numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveVolatility { .. }
                | Error::NonPositiveRiskAversion { .. }
                | Error::NonPositiveDrift { .. }
                | Error::SpreadOutOfRange { .. }
                | Error::NonFiniteRate { .. }
                | Error::ZeroEndowment
                | Error::NegativeEndowment { .. }
                | Error::NonPositiveHorizon { .. }
                | Error::InvalidSimConfig(_)
        )
    }
}
