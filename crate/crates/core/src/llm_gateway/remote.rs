//! OpenAI-compatible HTTP backend (`/chat/completions`, `/embeddings`).

use std::env;
use std::time::Duration;

use serde_json::{json, Value};

use super::prompts::PromptTemplates;
use super::{Backend, EmbeddingRequest, GatewayError, GenerationRequest, SelectionRequest, SummaryRequest};

pub const ENV_API_KEY: &str = "ERAG_API_KEY";
pub const ENV_BASE_URL: &str = "ERAG_BASE_URL";
pub const ENV_SUMMARIZER_MODEL: &str = "ERAG_SUMMARIZER_MODEL";
pub const ENV_SELECTOR_MODEL: &str = "ERAG_SELECTOR_MODEL";
pub const ENV_GENERATOR_MODEL: &str = "ERAG_GENERATOR_MODEL";
pub const ENV_EMBEDDING_MODEL: &str = "ERAG_EMBEDDING_MODEL";

const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
const DEFAULT_CHAT_MODEL: &str = "gpt-4o";
const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-small";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub summarizer_model: String,
    pub selector_model: String,
    pub generator_model: String,
    pub embedding_model: String,
    pub timeout: Duration,
    pub generation_max_tokens: usize,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: DEFAULT_BASE_URL.into(),
            api_key: None,
            summarizer_model: DEFAULT_CHAT_MODEL.into(),
            selector_model: DEFAULT_CHAT_MODEL.into(),
            generator_model: DEFAULT_CHAT_MODEL.into(),
            embedding_model: DEFAULT_EMBEDDING_MODEL.into(),
            timeout: Duration::from_secs(60),
            generation_max_tokens: 512,
        }
    }
}

impl RemoteConfig {
    /// Defaults overridden by the `ERAG_*` environment variables.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        let var = |k: &str| env::var(k).ok().filter(|v| !v.is_empty());
        if let Some(v) = var(ENV_BASE_URL) {
            cfg.base_url = v;
        }
        cfg.api_key = var(ENV_API_KEY);
        if let Some(v) = var(ENV_SUMMARIZER_MODEL) {
            cfg.summarizer_model = v;
        }
        if let Some(v) = var(ENV_SELECTOR_MODEL) {
            cfg.selector_model = v;
        }
        if let Some(v) = var(ENV_GENERATOR_MODEL) {
            cfg.generator_model = v;
        }
        if let Some(v) = var(ENV_EMBEDDING_MODEL) {
            cfg.embedding_model = v;
        }
        cfg
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    prompts: PromptTemplates,
    agent: ureq::Agent,
    name: String,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig, prompts: PromptTemplates) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        let name = format!("remote:{}", config.base_url);
        RemoteBackend {
            config,
            prompts,
            agent,
            name,
        }
    }

    fn post(&self, endpoint: &str, body: Value) -> Result<Value, GatewayError> {
        let url = format!("{}/{endpoint}", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url).set("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(resp) => resp
                .into_json::<Value>()
                .map_err(|e| GatewayError::MalformedResponse(format!("response is not JSON: {e}"))),
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                Err(GatewayError::Provider {
                    retryable: code == 429 || code >= 500,
                    message: format!("HTTP {code} from {url}: {}", text.chars().take(300).collect::<String>()),
                })
            }
            Err(ureq::Error::Transport(t)) => Err(GatewayError::Provider {
                retryable: true,
                message: format!("transport error calling {url}: {t}"),
            }),
        }
    }

    fn chat(&self, model: &str, prompt: String, max_tokens: usize) -> Result<String, GatewayError> {
        let body = json!({
            "model": model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": 0,
            "max_tokens": max_tokens,
        });
        let value = self.post("chat/completions", body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| GatewayError::MalformedResponse("missing choices[0].message.content".into()))
    }
}

impl Backend for RemoteBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn summarize(&self, req: &SummaryRequest) -> Result<String, GatewayError> {
        // rough words-to-tokens allowance
        let max_tokens = req.budget() * 2 + 16;
        self.chat(&self.config.summarizer_model, self.prompts.summarize(req), max_tokens)
    }

    fn select(&self, req: &SelectionRequest) -> Result<String, GatewayError> {
        self.chat(&self.config.selector_model, self.prompts.select(req), 32)
    }

    fn generate(&self, req: &GenerationRequest) -> Result<String, GatewayError> {
        self.chat(
            &self.config.generator_model,
            self.prompts.generate(req),
            self.config.generation_max_tokens,
        )
    }

    fn embed(&self, req: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError> {
        let value = self.post(
            "embeddings",
            json!({ "model": self.config.embedding_model, "input": req.text() }),
        )?;
        value["data"][0]["embedding"]
            .as_array()
            .and_then(|xs| xs.iter().map(Value::as_f64).collect::<Option<Vec<f64>>>())
            .ok_or_else(|| GatewayError::MalformedResponse("missing data[0].embedding".into()))
    }
}
