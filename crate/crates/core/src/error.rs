use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("evaluation failed at node {node:?}: {msg}")]
    Evaluation { node: Vec<f64>, msg: String },

    #[error("body `{label}` is not C2+: min eigenvalue {min_eigenvalue:e} at {node:?}")]
    Certification {
        label: String,
        node: Vec<f64>,
        min_eigenvalue: f64,
    },

    #[error("search failed: {0}")]
    Search(String),

    #[error("mollifier kernel: {0}")]
    Kernel(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
