use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("analysis error: {0}")]
    Analysis(#[from] rir_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 4 for a diverging simulation, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Analysis(rir_core::Error::Divergence { .. }) => 4,
            CliError::Analysis(_) | CliError::Io(_) => 3,
        }
    }
}
