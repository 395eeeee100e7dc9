use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    /// Bad flags or config; maps to exit code 2.
    #[error("usage: {0}")]
    Usage(String),
    /// A verification command found a tolerance violation; exit code 1.
    #[error("verification failed: {0}")]
    Verification(String),
    #[error(transparent)]
    Core(#[from] sgnn_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl LabError {
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Usage(_) => 2,
            LabError::Core(
                sgnn_core::Error::InvalidArgument(_) | sgnn_core::Error::CapExceeded { .. },
            ) => 2,
            _ => 1,
        }
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        LabError::Usage(msg.into())
    }
}

pub type LabResult<T> = std::result::Result<T, LabError>;

pub(crate) fn read_file(path: &std::path::Path) -> LabResult<String> {
    std::fs::read_to_string(path).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> LabResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| LabError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, contents).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}
