use thiserror::Error;

use crate::graded::SectorCharge;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("block at rows {row}, cols {col} violates charge shift {shift}")]
    SelectionRule { row: SectorCharge, col: SectorCharge, shift: SectorCharge },

    #[error("dimension mismatch in sector {sector}: expected {expected}, found {found}")]
    DimensionMismatch { sector: SectorCharge, expected: usize, found: usize },

    #[error("charge shift mismatch: {0} vs {1}")]
    ShiftMismatch(SectorCharge, SectorCharge),

    #[error("SVD did not converge in sector {sector} ({rows}x{cols} block)")]
    SvdNoConvergence { sector: SectorCharge, rows: usize, cols: usize },

    #[error("non-finite value produced in sector {sector}")]
    NonFinite { sector: SectorCharge },

    #[error("Taylor step norm drift {drift:.3e} exceeds {limit:.1e}; increase n_max or reduce delta_t")]
    NormDrift { drift: f64, limit: f64 },

    #[error("both spin branches vanish at site {site} (alpha sector {sector})")]
    DeadBranch { site: i64, sector: SectorCharge },

    #[error("window state has zero norm for the sampled boundary pair")]
    ZeroWindowNorm,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),

    #[error("not a checkpoint file (bad magic)")]
    BadMagic,

    #[error("unsupported checkpoint format version {0}")]
    VersionMismatch(u64),

    #[error("checkpoint payload CRC mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("checkpoint file is truncated")]
    Truncated,

    #[error("malformed checkpoint manifest: {0}")]
    Manifest(String),

    #[error("malformed data file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Incompatible(_) | Error::Parse(_) => 2,
            Error::SelectionRule { .. }
            | Error::DimensionMismatch { .. }
            | Error::ShiftMismatch(..)
            | Error::SvdNoConvergence { .. }
            | Error::NonFinite { .. }
            | Error::NormDrift { .. }
            | Error::DeadBranch { .. }
            | Error::ZeroWindowNorm => 3,
            Error::BadMagic
            | Error::VersionMismatch(_)
            | Error::ChecksumMismatch { .. }
            | Error::Truncated
            | Error::Manifest(_)
            | Error::Io(_) => 4,
        }
    }
}
