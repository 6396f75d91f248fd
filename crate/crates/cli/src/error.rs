use std::fmt;
use std::path::{Path, PathBuf};

/// Failure of a CLI run, tagged with the pipeline stage that failed.
#[derive(Debug)]
pub enum CliError {
    MissingInput(PathBuf),
    Stage { stage: &'static str, source: anyhow::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::MissingInput(_) => 2,
            CliError::Stage { .. } => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::MissingInput(p) => write!(f, "input file not found: {}", p.display()),
            CliError::Stage { stage, source } => write!(f, "{stage} failed: {source:#}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a stage name to any error.
pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> StageExt<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::Stage { stage, source: e.into() })
    }
}

pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::MissingInput(path.to_path_buf()))
    }
}
