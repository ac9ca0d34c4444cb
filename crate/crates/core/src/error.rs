use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("atom weights sum to {sum}, expected 1 within 1e-12")]
    WeightSum { sum: f64 },
    #[error("atoms {first} and {second} coincide")]
    DuplicateAtom { first: usize, second: usize },
    #[error("parameter `{name}` must be positive (got {value})")]
    NonpositiveParam { name: &'static str, value: f64 },
    #[error("z0 = {re}{im:+}i coincides with an atom; P00 is infinite there")]
    AtomCollision { re: f64, im: f64 },
    #[error("{0}")]
    NotBulk(NotBulkKind),
    #[error("no sign change of P00 - 1/tau inside the window")]
    EmptyLevelSet,
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("eigenvalue iteration did not converge: {0}")]
    Convergence(String),
    #[error("numerical check failed: {0}")]
    Numerical(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("expected maximizer is infeasible: {0}")]
    Infeasible(String),
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Why a point is not usable for bulk analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NotBulkKind {
    Edge,
    Exterior,
}

impl std::fmt::Display for NotBulkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NotBulkKind::Edge => f.write_str("edge-not-supported"),
            NotBulkKind::Exterior => f.write_str("not-bulk: z0 lies outside the limit support"),
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::WeightSum { .. }
            | Error::DuplicateAtom { .. }
            | Error::NonpositiveParam { .. }
            | Error::Dimension(_)
            | Error::Config(_)
            | Error::Json(_) => 2,
            Error::AtomCollision { .. } | Error::NotBulk(_) => 3,
            Error::EmptyLevelSet
            | Error::Convergence(_)
            | Error::Numerical(_)
            | Error::InsufficientData(_)
            | Error::Infeasible(_)
            | Error::DegenerateSpectrum(_) => 4,
            Error::MissingArtifact(_) => 5,
            Error::Io { .. } => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
