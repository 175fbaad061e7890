use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("length mismatch: grid has {expected} points, got a vector of length {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error(
        "iteration diverged at step {iteration}: non-finite value with lambda = {lambda:e}; \
         stability requires mu_max^(s+1) * lambda * tau < 2, i.e. lambda < {bound:e}"
    )]
    Divergence {
        iteration: usize,
        lambda: f64,
        bound: f64,
    },

    #[error("inner solver did not converge at outer step {step} ({iterations} iterations)")]
    NotConverged { step: usize, iterations: usize },

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
