//! HTTP chat and embedding providers speaking the common
//! chat-completions wire shape.
//!
//! Requests go to `{base_url}/chat/completions` and
//! `{base_url}/embeddings` with an optional bearer token. Responses with
//! status 429 or 5xx are retried with exponential backoff (three
//! attempts total); other error statuses fail immediately.

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{
    chars_to_tokens, validate_conversation, ChatProvider, ChatReply, ChatTurn, EmbedConfig,
    EmbedProvider, GatewayError, GenerationConfig, Role, TokenUsage, ToolCall, ToolDescriptor,
};
use crate::embedding::EmbeddingVector;

/// Environment variable naming the chat endpoint base URL.
pub const MODEL_API_BASE: &str = "MODEL_API_BASE";
/// Environment variable holding the chat endpoint bearer token.
pub const MODEL_API_KEY: &str = "MODEL_API_KEY";
/// Environment variable naming the embedding endpoint base URL.
pub const EMBED_API_BASE: &str = "EMBED_API_BASE";
/// Environment variable holding the embedding endpoint bearer token.
pub const EMBED_API_KEY: &str = "EMBED_API_KEY";

const MAX_ATTEMPTS: u32 = 3;

fn build_client() -> Result<reqwest::blocking::Client, GatewayError> {
    reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(120))
        .build()
        .map_err(|err| GatewayError::Transport(err.to_string()))
}

/// POST `body` to `url`, retrying 429/5xx with exponential backoff.
fn post_with_retries(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
    retry_delay: Duration,
) -> Result<Value, GatewayError> {
    let mut last_failure = None;
    for attempt in 0..MAX_ATTEMPTS {
        if attempt > 0 {
            std::thread::sleep(retry_delay * 2u32.pow(attempt - 1));
        }
        let mut request = client.post(url).json(body);
        if let Some(key) = api_key {
            request = request.bearer_auth(key);
        }
        let response = request
            .send()
            .map_err(|err| GatewayError::Transport(err.to_string()))?;
        let status = response.status();
        if status.is_success() {
            return response
                .json::<Value>()
                .map_err(|err| GatewayError::MalformedReply(err.to_string()));
        }
        let failure = GatewayError::Provider {
            status: status.as_u16(),
            body: response.text().unwrap_or_default(),
        };
        let retryable = status.as_u16() == 429 || status.is_server_error();
        if !retryable {
            return Err(failure);
        }
        last_failure = Some(failure);
    }
    Err(last_failure.expect("at least one attempt ran"))
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    tool_calls: Vec<WireToolCall>,
}

#[derive(Deserialize)]
struct WireToolCall {
    id: String,
    function: WireFunction,
}

#[derive(Deserialize)]
struct WireFunction {
    name: String,
    arguments: String,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

fn wire_message(turn: &ChatTurn) -> Value {
    let role = match turn.role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool => "tool",
    };
    let mut message = json!({"role": role, "content": turn.content});
    if !turn.tool_calls.is_empty() {
        message["tool_calls"] = Value::Array(
            turn.tool_calls
                .iter()
                .map(|call| {
                    json!({
                        "id": call.id,
                        "type": "function",
                        "function": {
                            "name": call.name,
                            "arguments": call.arguments.to_string(),
                        }
                    })
                })
                .collect(),
        );
    }
    if let Some(id) = &turn.tool_call_id {
        message["tool_call_id"] = json!(id);
    }
    message
}

/// Chat provider backed by an HTTP chat-completions endpoint.
pub struct HttpChat {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    retry_delay: Duration,
}

impl HttpChat {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, GatewayError> {
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            client: build_client()?,
            retry_delay: Duration::from_millis(500),
        })
    }

    /// Configure from `MODEL_API_BASE` and `MODEL_API_KEY`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let base =
            std::env::var(MODEL_API_BASE).map_err(|_| GatewayError::EmptyInput(MODEL_API_BASE))?;
        Self::new(base, std::env::var(MODEL_API_KEY).ok())
    }

    /// Shorten the backoff delay (tests).
    pub fn with_retry_delay(mut self, delay: Duration) -> Self {
        self.retry_delay = delay;
        self
    }
}

impl ChatProvider for HttpChat {
    fn chat(
        &self,
        messages: &[ChatTurn],
        tools: &[ToolDescriptor],
        config: &GenerationConfig,
    ) -> Result<ChatReply, GatewayError> {
        validate_conversation(messages)?;
        let mut body = json!({
            "model": config.model_id,
            "temperature": config.temperature,
            "messages": messages.iter().map(wire_message).collect::<Vec<_>>(),
        });
        if let Some(effort) = config.reasoning_effort {
            body["reasoning_effort"] = json!(effort.as_str());
        }
        if let Some(limit) = config.max_output_tokens {
            body["max_tokens"] = json!(limit);
        }
        if !tools.is_empty() {
            body["tool_choice"] = json!("auto");
            body["tools"] = Value::Array(
                tools
                    .iter()
                    .map(|tool| {
                        json!({
                            "type": "function",
                            "function": {
                                "name": tool.name,
                                "description": tool.description,
                                "parameters": tool.input_schema,
                            }
                        })
                    })
                    .collect(),
            );
        }

        let url = format!("{}/chat/completions", self.base_url);
        let raw = post_with_retries(
            &self.client,
            &url,
            self.api_key.as_deref(),
            &body,
            self.retry_delay,
        )?;
        let response: WireResponse = serde_json::from_value(raw)
            .map_err(|err| GatewayError::MalformedReply(err.to_string()))?;
        let choice = response
            .choices
            .into_iter()
            .next()
            .ok_or(GatewayError::MalformedReply("no choices".to_string()))?;
        if choice.finish_reason.as_deref() == Some("length") {
            return Err(GatewayError::TruncatedOutput);
        }

        let content = choice.message.content.unwrap_or_default();
        let tool_calls: Vec<ToolCall> = choice
            .message
            .tool_calls
            .into_iter()
            .map(|call| {
                let arguments = serde_json::from_str(&call.function.arguments)
                    .unwrap_or(Value::String(call.function.arguments));
                ToolCall {
                    id: call.id,
                    name: call.function.name,
                    arguments,
                }
            })
            .collect();

        let usage = match response.usage {
            Some(usage) => TokenUsage::new(usage.prompt_tokens, usage.completion_tokens),
            None => {
                let prompt_chars: usize = messages.iter().map(|m| m.content.chars().count()).sum();
                TokenUsage::new(
                    chars_to_tokens(prompt_chars),
                    chars_to_tokens(content.chars().count()),
                )
            }
        };

        Ok(ChatReply {
            turn: ChatTurn {
                role: Role::Assistant,
                content,
                tool_calls,
                tool_call_id: None,
            },
            usage,
        })
    }
}

#[derive(Deserialize)]
struct WireEmbedResponse {
    data: Vec<WireEmbedRow>,
}

#[derive(Deserialize)]
struct WireEmbedRow {
    embedding: Vec<f32>,
}

/// Embedding provider backed by an HTTP embeddings endpoint.
pub struct HttpEmbedder {
    base_url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    retry_delay: Duration,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Result<Self, GatewayError> {
        Ok(Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            client: build_client()?,
            retry_delay: Duration::from_millis(500),
        })
    }

    /// Configure from `EMBED_API_BASE` and `EMBED_API_KEY`.
    pub fn from_env() -> Result<Self, GatewayError> {
        let base =
            std::env::var(EMBED_API_BASE).map_err(|_| GatewayError::EmptyInput(EMBED_API_BASE))?;
        Self::new(base, std::env::var(EMBED_API_KEY).ok())
    }

    /// Shorten the backoff delay (tests).
    pub fn with_retry_delay(mut self, delay: Duration) -> Self {
        self.retry_delay = delay;
        self
    }
}

impl EmbedProvider for HttpEmbedder {
    fn embed(&self, text: &str, config: &EmbedConfig) -> Result<EmbeddingVector, GatewayError> {
        if text.is_empty() {
            return Err(GatewayError::EmptyInput("text"));
        }
        let body = json!({"model": config.model_id, "input": text});
        let url = format!("{}/embeddings", self.base_url);
        let raw = post_with_retries(
            &self.client,
            &url,
            self.api_key.as_deref(),
            &body,
            self.retry_delay,
        )?;
        let response: WireEmbedResponse = serde_json::from_value(raw)
            .map_err(|err| GatewayError::MalformedReply(err.to_string()))?;
        let row = response
            .data
            .into_iter()
            .next()
            .ok_or(GatewayError::MalformedReply(
                "no embedding rows".to_string(),
            ))?;
        if row.embedding.len() != config.dimension {
            return Err(GatewayError::MalformedReply(format!(
                "embedding dimension {} does not match configured {}",
                row.embedding.len(),
                config.dimension
            )));
        }
        EmbeddingVector::new(row.embedding)
            .map_err(|err| GatewayError::MalformedReply(err.to_string()))
    }
}
