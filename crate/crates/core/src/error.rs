use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which of the two cell transistors an event refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Device {
    M1,
    M2,
}

impl std::fmt::Display for Device {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Device::M1 => f.write_str("M1"),
            Device::M2 => f.write_str("M2"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A gate pulse landed in the partial-switching band.
    #[error("disturb risk: |V_GS| = {v_gs} V lies between the disturb margin and V_write")]
    DisturbRisk { v_gs: f64 },

    /// Array-level disturb event, located.
    #[error("disturb risk at row {row}, col {col}, phase {phase}, {device}: V_GS = {v_gs} V")]
    WriteDisturb {
        row: usize,
        col: usize,
        phase: usize,
        device: Device,
        v_gs: f64,
    },

    #[error("complementarity violated: both FeFETs store '{0}'")]
    ComplementarityViolation(u8),

    #[error("invalid cell: both FeFETs store the same bit")]
    InvalidCell,

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
