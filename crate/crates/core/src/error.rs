use crate::domain::json::JsonError;
use crate::engine::EngineError;
use crate::eval::EvalError;
use crate::gateway::GatewayError;
use crate::library::PipelineError;
use crate::preference::TrainError;
use crate::prompts::PromptError;
use crate::selector::SelectionError;

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Json(#[from] JsonError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid {what}: {}", problems.join("; "))]
    Invalid { what: String, problems: Vec<String> },
}

impl Error {
    /// Short machine-readable category, used in JSON error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Json(_) => "input",
            Error::Gateway(_) => "provider",
            Error::Selection(_) => "selection",
            Error::Engine(_) => "engine",
            Error::Pipeline(_) => "pipeline",
            Error::Train(_) => "training",
            Error::Eval(_) => "evaluation",
            Error::Prompt(_) => "prompt",
            Error::Invalid { .. } => "validation",
        }
    }

    /// Turns a non-empty validation report into an error.
    pub fn check(what: &str, problems: Vec<String>) -> Result<()> {
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid {
                what: what.to_string(),
                problems,
            })
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
