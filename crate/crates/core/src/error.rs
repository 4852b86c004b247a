use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    Asymmetric(f64),

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { eigenvalue: f64 },

    #[error("singular values of R·Ω·R do not pair: {first} vs {second}")]
    Degenerate { first: f64, second: f64 },

    #[error("symplectic eigenvalue {value} violates the uncertainty bound")]
    Unphysical { value: f64 },

    #[error("mode index {index}: {reason}")]
    Index { index: usize, reason: &'static str },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("emission time {emission} must precede readout time {readout}")]
    Ordering { emission: f64, readout: f64 },

    #[error("quadrature did not converge after {panels} panels (estimate {estimate:e}, last change {change:e})")]
    Accuracy {
        estimate: f64,
        change: f64,
        panels: usize,
    },

    #[error("assembled covariance for {context} is unphysical (min symplectic eigenvalue {min_eigenvalue})")]
    Inconsistent {
        context: String,
        min_eigenvalue: f64,
    },

    #[error("collision run needs {requested} steps, limit is {limit}")]
    MemoryGuard { requested: usize, limit: usize },

    #[error("window ({t1}, {t2}) is not aligned to bin width {dt}")]
    Alignment { t1: f64, t2: f64, dt: f64 },

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("config line {line}: key `{key}`: {message}")]
    Parse {
        line: usize,
        key: String,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
