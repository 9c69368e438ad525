//! Chat and embedding provider abstractions.
//!
//! Two backends implement the traits: a deterministic scripted backend
//! for tests and offline runs ([`ScriptedChat`], [`ScriptedEmbedder`])
//! and an HTTP backend speaking the common chat-completions wire shape
//! ([`HttpChat`], [`HttpEmbedder`]).

mod http;
mod playbook;
mod scripted;

pub use http::{HttpChat, HttpEmbedder};
pub use scripted::{
    Matcher, ScenarioEntry, ScriptedChat, ScriptedEmbedder, ScriptedReply, ScriptedToolCall,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid conversation: {0}")]
    InvalidConversation(&'static str),
    #[error("provider returned status {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("output truncated by the provider's token limit")]
    TruncatedOutput,
    #[error("no scripted reply for prompt (key {key}, assistant turn {turn})")]
    UnscriptedPrompt { key: String, turn: usize },
    #[error("provider reply was malformed: {0}")]
    MalformedReply(String),
}

/// Speaker of a conversation turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

/// A tool invocation requested by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: serde_json::Value,
}

/// One turn of a chat conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatTurn {
    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn tool(tool_call_id: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(tool_call_id.into()),
        }
    }

    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }
}

/// Prompt/completion token counts for one call or an aggregate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

impl TokenUsage {
    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self {
            prompt_tokens,
            completion_tokens,
            total_tokens: prompt_tokens + completion_tokens,
        }
    }

    pub fn add(&mut self, other: TokenUsage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.total_tokens += other.total_tokens;
    }
}

/// Sum usage across calls.
pub fn accumulate_usage<I: IntoIterator<Item = TokenUsage>>(usages: I) -> TokenUsage {
    let mut total = TokenUsage::default();
    for usage in usages {
        total.add(usage);
    }
    total
}

/// Requested reasoning effort, where the backing model supports it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningEffort {
    Low,
    Medium,
    High,
}

impl ReasoningEffort {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReasoningEffort::Low => "low",
            ReasoningEffort::Medium => "medium",
            ReasoningEffort::High => "high",
        }
    }
}

/// Per-call generation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub model_id: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_effort: Option<ReasoningEffort>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_output_tokens: Option<u64>,
}

impl GenerationConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            temperature: 0.0,
            reasoning_effort: None,
            max_output_tokens: None,
        }
    }

    /// Short label used in row keys and reports: the model id, plus the
    /// reasoning tier when one is set.
    pub fn tier_label(&self) -> String {
        match self.reasoning_effort {
            Some(effort) => effort.as_str().to_string(),
            None => "default".to_string(),
        }
    }
}

/// Embedding model settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub model_id: String,
    pub dimension: usize,
}

/// A chat reply: the assistant turn plus usage.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub turn: ChatTurn,
    pub usage: TokenUsage,
}

/// Description of a tool offered to the model. The JSON schema uses the
/// wire name `inputSchema`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    #[serde(rename = "inputSchema")]
    pub input_schema: serde_json::Value,
}

/// A synchronous chat completion backend.
///
/// Implementations must be pure with respect to their inputs: the reply
/// is a function of `(messages, tools, config)` and internal
/// configuration only.
pub trait ChatProvider: Send + Sync {
    fn chat(
        &self,
        messages: &[ChatTurn],
        tools: &[ToolDescriptor],
        config: &GenerationConfig,
    ) -> Result<ChatReply, GatewayError>;
}

/// A synchronous text embedding backend.
pub trait EmbedProvider: Send + Sync {
    fn embed(
        &self,
        text: &str,
        config: &EmbedConfig,
    ) -> Result<crate::embedding::EmbeddingVector, GatewayError>;
}

pub(crate) fn validate_conversation(messages: &[ChatTurn]) -> Result<(), GatewayError> {
    if messages.is_empty() {
        return Err(GatewayError::EmptyInput("messages"));
    }
    match messages[0].role {
        Role::System | Role::User => Ok(()),
        _ => Err(GatewayError::InvalidConversation(
            "conversation must open with a system or user turn",
        )),
    }
}

/// Last user turn of a conversation, if any.
pub(crate) fn last_user_content(messages: &[ChatTurn]) -> Option<&str> {
    messages
        .iter()
        .rev()
        .find(|turn| turn.role == Role::User)
        .map(|turn| turn.content.as_str())
}

/// Character-count token rule shared by scripted providers: every four
/// characters (rounded up) count as one token.
pub(crate) fn chars_to_tokens(chars: usize) -> u64 {
    (chars as u64).div_ceil(4)
}
