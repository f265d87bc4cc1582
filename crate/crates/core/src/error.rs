use thiserror::Error;

/// Errors produced by the numerical modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure in {context}{}", iteration_suffix(*.iteration))]
    NumericalFailure { context: String, iteration: Option<usize> },
}

fn iteration_suffix(iteration: Option<usize>) -> String {
    match iteration {
        Some(i) => format!(" at iteration {i}"),
        None => String::new(),
    }
}

impl NfError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        NfError::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(context: impl Into<String>, iteration: Option<usize>) -> Self {
        NfError::NumericalFailure {
            context: context.into(),
            iteration,
        }
    }
}

pub type Result<T, E = NfError> = std::result::Result<T, E>;
