use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] foresight::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for exhausted budgets.
    pub fn exit_code(&self) -> u8 {
        use foresight::Error as E;
        match self {
            CliError::Run(E::BudgetExceeded { .. } | E::EnumerationBudget(_)) => 3,
            CliError::Config(_) | CliError::Run(_) => 2,
            CliError::Io(_) | CliError::Csv(_) => 2,
        }
    }
}
