use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tracing::warn;
use url::Url;

use super::prompt::{build_prompt_from, template_examples, PROMPT_TEMPLATE};
use super::{parse_model_output, Classification, ClassifyError};
use crate::net::{HttpClient, RetryPolicy};

pub const API_KEY_ENV: &str = "WAI_BACKEND_API_KEY";

/// Decoding parameters sent with every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub model_name: String,
    pub endpoint: Option<String>,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub seed: u64,
    pub stop_sequences: Vec<String>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            model_name: "llama-3.1".into(),
            endpoint: None,
            temperature: 0.0,
            max_output_tokens: 64,
            seed: 42,
            stop_sequences: vec!["0".into(), "}".into()],
        }
    }
}

impl ModelParams {
    /// Differences from the reference decoding settings, for logging.
    pub fn overrides(&self) -> Vec<String> {
        let d = Self::default();
        let mut out = Vec::new();
        if self.temperature != d.temperature {
            out.push(format!("temperature {} (reference {})", self.temperature, d.temperature));
        }
        if self.max_output_tokens != d.max_output_tokens {
            out.push(format!(
                "max_output_tokens {} (reference {})",
                self.max_output_tokens, d.max_output_tokens
            ));
        }
        if self.stop_sequences != d.stop_sequences {
            out.push(format!(
                "stop_sequences {:?} (reference {:?})",
                self.stop_sequences, d.stop_sequences
            ));
        }
        out
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model_name,
            "prompt": prompt,
            "temperature": self.temperature,
            "max_tokens": self.max_output_tokens,
            "seed": self.seed,
            "stop": self.stop_sequences,
        })
    }
}

/// Offline backend answering the template's worked examples with their
/// stated outputs and everything else with an unaffected verdict.
#[derive(Debug, Clone)]
pub struct StubBackend {
    answers: HashMap<String, String>,
}

pub const STUB_DEFAULT_OUTPUT: &str =
    r#"{"affected": 0, "affectedness_category": "", "tags": ""}"#;

impl StubBackend {
    pub fn new() -> Self {
        Self::from_template(PROMPT_TEMPLATE)
    }

    pub fn from_template(template: &str) -> Self {
        Self {
            answers: template_examples(template).into_iter().collect(),
        }
    }

    pub fn generate(&self, paragraph: &str) -> String {
        self.answers
            .get(paragraph)
            .cloned()
            .unwrap_or_else(|| STUB_DEFAULT_OUTPUT.to_string())
    }
}

impl Default for StubBackend {
    fn default() -> Self {
        Self::new()
    }
}

/// Single-turn completion over HTTP.
#[derive(Debug, Clone)]
pub struct RemoteBackend {
    url: Url,
    params: ModelParams,
    template: String,
    http: HttpClient,
    api_key: Option<String>,
}

impl RemoteBackend {
    pub fn new(params: ModelParams, retry: RetryPolicy, rps: u32, timeout: Duration) -> Result<Self, ClassifyError> {
        let raw = params
            .endpoint
            .clone()
            .ok_or_else(|| ClassifyError::Config("remote backend needs a model endpoint".into()))?;
        let url = Url::parse(&raw).map_err(|e| ClassifyError::Config(format!("model endpoint {raw:?}: {e}")))?;
        for o in params.overrides() {
            warn!(%o, "decoding parameter differs from the reference setting");
        }
        Ok(Self {
            url,
            params,
            template: PROMPT_TEMPLATE.to_string(),
            http: HttpClient::new(retry, rps, timeout),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
        })
    }

    pub fn with_template(mut self, template: String) -> Self {
        self.template = template;
        self
    }

    pub async fn generate(&self, paragraph: &str) -> Result<String, ClassifyError> {
        let prompt = build_prompt_from(&self.template, paragraph)?;
        let body = self.params.request_body(&prompt);
        let bytes = self
            .http
            .post_json(&self.url, &body, self.api_key.as_deref())
            .await?;
        completion_text(&bytes)
    }
}

/// Generated text from `{"text": ...}` or `{"choices": [{"text": ...}]}`.
pub fn completion_text(bytes: &[u8]) -> Result<String, ClassifyError> {
    let v: Value = serde_json::from_slice(bytes)
        .map_err(|e| ClassifyError::BadResponse(format!("response is not JSON: {e}")))?;
    v.get("text")
        .and_then(Value::as_str)
        .or_else(|| v.pointer("/choices/0/text").and_then(Value::as_str))
        .map(str::to_string)
        .ok_or_else(|| ClassifyError::BadResponse("response carries no generated text".into()))
}

#[derive(Debug, Clone)]
pub enum Backend {
    Stub(StubBackend),
    Remote(Box<RemoteBackend>),
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Stub(_) => "stub",
            Backend::Remote(_) => "remote",
        }
    }

    pub async fn generate(&self, paragraph: &str) -> Result<String, ClassifyError> {
        if paragraph.trim().is_empty() {
            return Err(ClassifyError::EmptyParagraph);
        }
        match self {
            Backend::Stub(s) => Ok(s.generate(paragraph)),
            Backend::Remote(r) => r.generate(paragraph).await,
        }
    }

    /// Score one passage: generate, then parse.
    pub async fn classify(&self, paragraph: &str) -> Result<Classification, ClassifyError> {
        let raw = self.generate(paragraph).await?;
        parse_model_output(&raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_params() {
        let p = ModelParams::default();
        assert_eq!(p.temperature, 0.0);
        assert_eq!(p.max_output_tokens, 64);
        assert_eq!(p.stop_sequences, ["0", "}"]);
        assert!(p.overrides().is_empty());
        let body = p.request_body("hi");
        assert_eq!(body["max_tokens"], 64);
        assert_eq!(body["stop"], json!(["0", "}"]));
    }

    #[test]
    fn response_shapes() {
        assert_eq!(completion_text(br#"{"text":"a"}"#).unwrap(), "a");
        assert_eq!(completion_text(br#"{"choices":[{"text":"b"}]}"#).unwrap(), "b");
        assert!(completion_text(b"{}").is_err());
        assert!(completion_text(b"nope").is_err());
    }

    #[tokio::test]
    async fn stub_defaults_to_unaffected() {
        let b = Backend::Stub(StubBackend::new());
        let c = b.classify("Something about covid that is not an example.").await.unwrap();
        assert_eq!(c.affected, 0);
        assert!(matches!(b.classify(" ").await, Err(ClassifyError::EmptyParagraph)));
    }

    #[test]
    fn remote_requires_endpoint() {
        let r = RemoteBackend::new(ModelParams::default(), RetryPolicy::default(), 1, Duration::from_secs(1));
        assert!(matches!(r, Err(ClassifyError::Config(_))));
    }
}
