use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing configuration key `{0}`")]
    MissingKey(String),

    #[error("{path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("fock function n={n} has tail {tail:.3e} at the x boundary (limit 1e-8); enlarge the x box")]
    TailTruncation { n: usize, tail: f64 },

    #[error("relaxation did not converge after {iterations} iterations (last energy change {delta:.3e})")]
    NonConvergence { iterations: usize, delta: f64 },

    #[error("relaxed state left the cis basin (cis population {cis_population:.6}); use a shorter imaginary time or a deeper basin")]
    Delocalized { cis_population: f64 },

    #[error("norm drifted to {norm:.12} at t = {time_fs:.3} fs; the time step is too large for this coupling")]
    Conservation { norm: f64, time_fs: f64 },

    #[error("dense problem of dimension {dim} exceeds the cap of {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("estimated memory {required_mib} MiB exceeds the cap of {cap_mib} MiB ({detail})")]
    Resources { required_mib: u64, cap_mib: u64, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
