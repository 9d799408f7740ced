use thiserror::Error;

/// Errors produced across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside its mathematical domain (non-finite input,
    /// time outside `[0, T]`, `epsilon <= 0`, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation is violated; the message
    /// names the offending constraint.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The family or family pair does not support the requested operation.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// Self-normalized importance-sampling weights collapsed below the
    /// configured effective-sample-size threshold.
    #[error(
        "degenerate SNIS weights: effective sample size {ess:.1} of {n} below threshold \
         {threshold:.1}; increase the particle count or use the swapped proposal"
    )]
    DegenerateWeights { ess: f64, n: usize, threshold: f64 },

    /// A numerical routine failed to converge; the message carries
    /// diagnostics (worst panel, iteration counts).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An SDE chain left the finite region.
    #[error("chain {chain} diverged at step {step}: |Y| = {magnitude:.3e}")]
    Divergence {
        chain: usize,
        step: usize,
        magnitude: f64,
    },

    /// A multi-run study could not be completed.
    #[error("study error: {0}")]
    Study(String),
}

pub type Result<T> = std::result::Result<T, Error>;
