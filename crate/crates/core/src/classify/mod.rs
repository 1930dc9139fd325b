//! Score keyword passages for crisis affectedness with a language-model
//! backend and roll passages up to one indicator per firm and snapshot.

mod aggregate;
mod backend;
mod output;
mod prompt;

pub use aggregate::{aggregate_firm_period, aggregate_indicators, ClassificationRecord, FirmPeriodIndicator};
pub use backend::{
    completion_text, Backend, ModelParams, RemoteBackend, StubBackend, API_KEY_ENV, STUB_DEFAULT_OUTPUT,
};
pub use output::{parse_model_output, Category, Classification};
pub use prompt::{build_prompt, build_prompt_from, template_examples, PLACEHOLDER, PROMPT_TEMPLATE};

use crate::net::NetError;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("empty paragraph")]
    EmptyParagraph,
    #[error("prompt template: {0}")]
    Template(String),
    #[error("unparseable model output ({message}): {raw:?}")]
    Parse { raw: String, message: String },
    #[error("backend response: {0}")]
    BadResponse(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
}
