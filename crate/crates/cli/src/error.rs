use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A malformed scene, region or seeds document.
    #[error("{file}:{line}:{column}: {message}")]
    Parse { file: String, line: usize, column: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    /// A well-formed request the scene cannot satisfy.
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Core(#[from] irisnp::Error),
}

impl CliError {
    pub fn parse(file: &str, line: usize, column: usize, message: impl Into<String>) -> Self {
        CliError::Parse { file: file.to_string(), line, column, message: message.into() }
    }

    /// 2 for problems with the seed configuration, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        use irisnp::Error as E;
        match self {
            CliError::Core(
                E::SeedInCollision
                | E::SeedOutsideLimits
                | E::SeedViolatesConstraint(_)
                | E::SeedExcluded
                | E::SeedInsideObstacle
                | E::SeedInsideRegion { .. }
                | E::EllipsoidCenterInCollision,
            ) => 2,
            CliError::Domain(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_file(path: &std::path::Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
