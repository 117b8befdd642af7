use std::io;
use std::path::PathBuf;

/// Errors surfaced by the lab tools. Each maps to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Usage(String),
    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error(transparent)]
    Core(#[from] krylov_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    pub fn format(offset: u64, message: impl Into<String>) -> Self {
        LabError::Format { offset, message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        LabError::Io { path: path.into(), source }
    }

    /// 1 = usage / invalid argument, 2 = file format or I/O, 3 = numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Usage(_) => 1,
            LabError::Core(krylov_core::Error::InvalidArgument(_)) => 1,
            LabError::Core(_) => 3,
            LabError::Format { .. } | LabError::Io { .. } | LabError::Csv(_) => 2,
        }
    }
}

#[macro_export]
macro_rules! usage {
    ($($arg:tt)*) => {
        $crate::LabError::Usage(format!($($arg)*))
    };
}
