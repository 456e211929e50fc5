use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("Newton polish did not converge from any of {seeds} grid seeds")]
    NoConvergence { seeds: usize },

    #[error("search box contains no critical point")]
    EmptySearch,

    #[error("state exploded at step {step} (t = {time}); reduce stab_c or dt")]
    Explosion { step: usize, time: f64 },

    #[error("step budget exceeded: {steps} steps requested, budget {budget}")]
    BudgetExceeded { steps: u64, budget: u64 },

    #[error("tail mass estimate {estimate:e} outside the quadrature box is too large; enlarge the box")]
    TailMassTooLarge { estimate: f64 },

    #[error("singular Hessian at a global minimum (det = {det:e}); use quadrature mode")]
    SingularHessian { det: f64 },

    #[error("W-graph enumeration supports at most 6 minima, got {0}")]
    TooManyMinima(usize),

    #[error("particle filter degenerate at step {step}: all likelihoods below floor")]
    Degenerate { step: usize },

    #[error("averaging window kappa = {kappa} spans fewer than 2 recorded steps (spacing {spacing})")]
    GridTooCoarse { kappa: f64, spacing: f64 },

    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
