use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid trait level token {0:?}")]
pub struct ParseLevelError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("placeholder {{{0}}} left unbound")]
    UnboundPlaceholder(String),
    #[error("placeholder {{{0}}} is not part of the template")]
    UnknownPlaceholder(String),
    #[error("research tally does not cover company {0:?}")]
    TallyMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("credential error: {0}")]
    Credential(String),
    #[error("request budget of {0} exhausted")]
    BudgetExceeded(u64),
    #[error("no JSON object recoverable from model output")]
    Parse,
    #[error("prompt not recognized by the mock policy")]
    UnrecognizedPrompt,
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurveyError {
    #[error("malformed answer after {attempts} attempt(s): {reason}")]
    MalformedAnswer { attempts: u32, reason: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("unknown company {0:?}")]
    UnknownCompany(String),
    #[error("{0} has already been researched the maximum number of times")]
    ResearchCapReached(String),
    #[error("all research is exhausted; the only legal method is invest")]
    MustInvest,
    #[error("simulation already terminated")]
    Terminated,
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("action payload is missing field {0:?}")]
    MissingField(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid action: {0}")]
    InvalidAction(#[from] ActionError),
    #[error("malformed action after {attempts} attempt(s) at step {step}: {reason}")]
    MalformedAction {
        step: usize,
        attempts: u32,
        reason: String,
    },
    #[error("invalid catalog: {0}")]
    Catalog(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} values, got {got}")]
    Length { needed: usize, got: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("insufficient data: {rows} usable row(s) for {columns} column(s)")]
    InsufficientData { rows: usize, columns: usize },
    #[error("column {0} is constant")]
    DegenerateColumn(usize),
}

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("malformed artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl WorkbenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WorkbenchError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn artifact(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        WorkbenchError::Artifact {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
