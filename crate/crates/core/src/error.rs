use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid angular ket |J={j}, M={m}>: |M| must not exceed J")]
    InvalidKet { j: u32, m: i32 },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("failed to parse {file}: {source}")]
    Parse {
        file: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("unknown unit conversion {from} -> {to}")]
    UnitPair { from: String, to: String },

    #[error("basis is empty for the requested truncation")]
    EmptyBasis,

    #[error("basis and system are inconsistent: {0}")]
    InconsistentBasis(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("requested block of {requested} vibro-photonic states but only {available} exist")]
    BlockTooLarge { requested: usize, available: usize },

    #[error("no degeneracy with gap below {threshold:.3e} cm-1 (smallest refined gap {min_gap:.3e} cm-1)")]
    NoDegeneracy { threshold: f64, min_gap: f64 },

    #[error("contour passes within {distance:.3e} rad of a degeneracy at phi = {phi:.6}")]
    ContourTooClose { phi: f64, distance: f64 },

    #[error("invalid contour: {0}")]
    InvalidContour(String),

    #[error("state group is not isolated along the contour: gap {gap:.3e} cm-1 vs max coupling {coupling:.3e}")]
    NotIsolated { gap: f64, coupling: f64 },

    #[error("time step {dt} fs too coarse: {reason}")]
    StepTooCoarse { dt: f64, reason: String },

    #[error("quadrature under-resolved: doubling nodes changed populations by {change:.3e}")]
    QuadratureUnderResolved { change: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures that come from the numerics rather than inputs or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::NoDegeneracy { .. }
                | Error::ContourTooClose { .. }
                | Error::NotIsolated { .. }
                | Error::StepTooCoarse { .. }
                | Error::QuadratureUnderResolved { .. }
        )
    }
}
