use alloc::string::String;

/// Errors raised by the equilibrium engine.
///
/// Each variant is prefixed by the subsystem that produced it so the CLI can
/// surface a one-line diagnostic without extra context.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("market_model: {0}")]
    Model(String),
    #[error("market_model: length mismatch (expected {expected}, got {got})")]
    LengthMismatch { expected: usize, got: usize },
    #[error("info_kernel: {0}")]
    Kernel(String),
    #[error("info_kernel: degenerate kernel (c = {c:e}); all signals are observationally identical")]
    DegenerateKernel { c: f64 },
    #[error("info_kernel: kernel is not exchangeable (relative deviation {deviation:e}); symmetric ansatz refused for I = {signals}")]
    NotExchangeable { deviation: f64, signals: usize },
    #[error("posterior_engine: {0}")]
    Posterior(String),
    #[error("equilibrium_solver: {0}")]
    Solver(String),
    #[error("equilibrium_solver: no sign change of Phi before alpha = {cap:e}")]
    NoSignChange { cap: f64 },
    #[error("orderflow_sim: {0}")]
    OrderFlow(String),
    #[error("insider_objective: {0}")]
    Objective(String),
    #[error("analytics: {0}")]
    Analytics(String),
    #[error("options_bridge: {0}")]
    Options(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn ensure_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
