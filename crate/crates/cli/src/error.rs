use std::io;
use std::path::PathBuf;

use dicke_sim::error::{AnalysisError, AsymptoteError, OracleError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown preset {0:?} (expected n2, n7 or n10)")]
    UnknownPreset(String),
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: key {key:?} already set on line {first}")]
    DuplicateKey { key: String, first: usize, line: usize },
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("invalid {key} = {value:?}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("invalid rates: {0}")]
    Rates(String),
    #[error("DICKE_SIM_THREADS must be a positive integer, got {0:?}")]
    Threads(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analysis(AnalysisError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("oracle identities deviate by {0:e} (limit 1e-12)")]
    OracleDeviation(f64),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Space(_) | AnalysisError::Generator(_) => {
                CliError::Config(ConfigError::Rates(e.to_string()))
            }
            other => CliError::Analysis(other),
        }
    }
}

impl CliError {
    /// 1: integration or numerical failure, 2: the two asymptote routes disagree,
    /// 3: invalid configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Oracle(_) => 3,
            CliError::Analysis(AnalysisError::Asymptote(AsymptoteError::MethodsDisagree { .. })) => 2,
            CliError::Analysis(AnalysisError::Integration(dicke_sim::error::IntegrationError::InvalidConfig(_))) => 3,
            CliError::Analysis(_) | CliError::OracleDeviation(_) | CliError::Io { .. } => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dicke_sim::error::{GeneratorError, IntegrationError};

    #[test]
    fn exit_codes() {
        let disagree = AnalysisError::Asymptote(AsymptoteError::MethodsDisagree {
            null_space: 0.0,
            long_horizon: 1.0,
        });
        assert_eq!(CliError::from(disagree).exit_code(), 2);
        let stiff = AnalysisError::Integration(IntegrationError::StepSizeUnderflow { t: 1.0, h: 1e-300 });
        assert_eq!(CliError::from(stiff).exit_code(), 1);
        let unstable = AnalysisError::Asymptote(AsymptoteError::Unstable(0.1));
        assert_eq!(CliError::from(unstable).exit_code(), 1);
        let weight = AnalysisError::Generator(GeneratorError::InvalidWeight(2.0));
        assert_eq!(CliError::from(weight).exit_code(), 3);
        assert_eq!(CliError::from(ConfigError::MissingKey("svg")).exit_code(), 3);
    }
}
