//! Deterministic scripted chat and embedding providers.
//!
//! [`ScriptedChat`] replies from a scenario table: the last user turn is
//! matched to an entry, and the reply is picked by how many assistant
//! turns the conversation already contains. The reply is therefore a
//! pure function of `(messages, tools, config)`, which makes multi-turn
//! agent loops replayable.
//!
//! [`ScriptedEmbedder`] derives a unit vector from a SHA-256 hash of the
//! input text, so equal texts embed identically across runs and
//! processes.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::playbook;
use super::{
    chars_to_tokens, last_user_content, validate_conversation, ChatProvider, ChatReply, ChatTurn,
    EmbedConfig, EmbedProvider, GatewayError, GenerationConfig, Role, TokenUsage, ToolCall,
    ToolDescriptor,
};
use crate::embedding::EmbeddingVector;
use crate::sha256_hex;

/// How a scenario entry is matched against the last user turn.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matcher {
    /// SHA-256 hex digest of the full last user turn content.
    Hash(String),
    /// Substring of the last user turn content.
    Contains(String),
    /// Matches anything; at most one makes sense per scenario.
    Default,
}

impl Matcher {
    /// Hash matcher for a known prompt text.
    pub fn hash_of(prompt: &str) -> Self {
        Matcher::Hash(sha256_hex(prompt.as_bytes()))
    }
}

/// A tool call requested by a scripted reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedToolCall {
    pub name: String,
    pub arguments: Value,
}

/// One scripted assistant reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedReply {
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ScriptedToolCall>,
}

impl ScriptedReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            tool_calls: Vec::new(),
        }
    }

    pub fn tool_call(name: impl Into<String>, arguments: Value) -> Self {
        Self {
            text: String::new(),
            tool_calls: vec![ScriptedToolCall {
                name: name.into(),
                arguments,
            }],
        }
    }
}

/// A matcher plus the reply sequence it plays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub replies: Vec<ScriptedReply>,
    /// Keep replaying the final reply once the sequence is exhausted.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeat_last: bool,
}

impl ScenarioEntry {
    pub fn new(matcher: Matcher, replies: Vec<ScriptedReply>) -> Self {
        Self {
            matcher,
            replies,
            repeat_last: false,
        }
    }
}

#[derive(Deserialize)]
struct ScenarioFile {
    entries: Vec<ScenarioEntry>,
}

/// Deterministic scripted chat provider.
#[derive(Debug, Clone)]
pub struct ScriptedChat {
    entries: Vec<ScenarioEntry>,
    playbook_fallback: bool,
}

impl ScriptedChat {
    /// Scenario-only provider; unmatched prompts are an error.
    pub fn new(entries: Vec<ScenarioEntry>) -> Self {
        Self {
            entries,
            playbook_fallback: false,
        }
    }

    /// Scenario provider that falls back to the built-in deterministic
    /// playbook for unmatched prompts.
    pub fn with_playbook(entries: Vec<ScenarioEntry>) -> Self {
        Self {
            entries,
            playbook_fallback: true,
        }
    }

    /// Playbook-only provider: replies are synthesized from the prompt
    /// itself, deterministically.
    pub fn playbook() -> Self {
        Self::with_playbook(Vec::new())
    }

    /// Parse a scenario document: either `{"entries": [...]}` or a bare
    /// entry array.
    pub fn from_json(raw: &str) -> Result<Self, GatewayError> {
        let entries = serde_json::from_str::<ScenarioFile>(raw)
            .map(|file| file.entries)
            .or_else(|_| serde_json::from_str::<Vec<ScenarioEntry>>(raw))
            .map_err(|err| GatewayError::MalformedReply(format!("bad scenario document: {err}")))?;
        Ok(Self::new(entries))
    }

    /// Enable or disable playbook fallback on an existing provider.
    pub fn set_playbook_fallback(&mut self, enabled: bool) {
        self.playbook_fallback = enabled;
    }

    fn select(&self, content: &str, key: &str) -> Option<&ScenarioEntry> {
        self.entries
            .iter()
            .find(|entry| matches!(&entry.matcher, Matcher::Hash(h) if h == key))
            .or_else(|| {
                self.entries.iter().find(
                    |entry| matches!(&entry.matcher, Matcher::Contains(s) if content.contains(s.as_str())),
                )
            })
            .or_else(|| {
                self.entries
                    .iter()
                    .find(|entry| entry.matcher == Matcher::Default)
            })
    }
}

impl ChatProvider for ScriptedChat {
    fn chat(
        &self,
        messages: &[ChatTurn],
        tools: &[ToolDescriptor],
        config: &GenerationConfig,
    ) -> Result<ChatReply, GatewayError> {
        validate_conversation(messages)?;
        let content = last_user_content(messages).unwrap_or("");
        let key = sha256_hex(content.as_bytes());
        let turn = messages
            .iter()
            .filter(|m| m.role == Role::Assistant)
            .count();

        let scripted = match self.select(content, &key) {
            Some(entry) => match entry.replies.get(turn) {
                Some(reply) => Some(reply.clone()),
                None if entry.repeat_last && !entry.replies.is_empty() => {
                    Some(entry.replies[entry.replies.len() - 1].clone())
                }
                None => None,
            },
            None => None,
        };
        let reply = match scripted {
            Some(reply) => reply,
            None if self.playbook_fallback => playbook::reply(messages, tools),
            None => {
                return Err(GatewayError::UnscriptedPrompt { key, turn });
            }
        };

        let prompt_chars: usize = messages.iter().map(|m| m.content.chars().count()).sum();
        let mut completion_chars = reply.text.chars().count();
        let tool_calls: Vec<ToolCall> = reply
            .tool_calls
            .iter()
            .enumerate()
            .map(|(idx, call)| {
                let arguments_text = call.arguments.to_string();
                completion_chars += call.name.chars().count() + arguments_text.chars().count();
                ToolCall {
                    id: format!("call_{turn}_{idx}"),
                    name: call.name.clone(),
                    arguments: call.arguments.clone(),
                }
            })
            .collect();

        let usage = TokenUsage::new(
            chars_to_tokens(prompt_chars),
            chars_to_tokens(completion_chars),
        );
        if let Some(limit) = config.max_output_tokens {
            if usage.completion_tokens > limit {
                return Err(GatewayError::TruncatedOutput);
            }
        }

        Ok(ChatReply {
            turn: ChatTurn {
                role: Role::Assistant,
                content: reply.text,
                tool_calls,
                tool_call_id: None,
            },
            usage,
        })
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic embedding provider that hashes the text into a unit
/// vector of the configured dimension.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedEmbedder;

impl EmbedProvider for ScriptedEmbedder {
    fn embed(&self, text: &str, config: &EmbedConfig) -> Result<EmbeddingVector, GatewayError> {
        if text.is_empty() {
            return Err(GatewayError::EmptyInput("text"));
        }
        if config.dimension == 0 {
            return Err(GatewayError::EmptyInput("dimension"));
        }
        let digest = sha256_hex(text.as_bytes());
        let mut seed = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
        let mut values = Vec::with_capacity(config.dimension);
        for _ in 0..config.dimension {
            let bits = splitmix64(&mut seed);
            // Map the top 53 bits onto [-1, 1).
            let unit = (bits >> 11) as f64 / (1u64 << 53) as f64;
            values.push(unit * 2.0 - 1.0);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let values: Vec<f32> = if norm < 1e-12 {
            let mut v = vec![0.0f32; config.dimension];
            v[0] = 1.0;
            v
        } else {
            values.iter().map(|v| (v / norm) as f32).collect()
        };
        EmbeddingVector::new(values).map_err(|err| GatewayError::MalformedReply(err.to_string()))
    }
}
