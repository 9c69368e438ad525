//! The three authoring workflows.
//!
//! Baseline asks the model once with no context. Sequential extracts
//! retrieval seeds, pulls similar detections from the store, and asks
//! again with exemplars inlined. Agentic runs a tool-calling loop
//! against the full MCP tool surface until the model produces a fenced
//! code block or hits the iteration cap.

pub mod batch;
pub mod prompts;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::gateway::{ChatProvider, ChatTurn, GenerationConfig, TokenUsage};
use crate::mcp::{tool_descriptors_for, ToolExecutor};
use crate::sha256_hex;

pub use batch::{
    read_results_jsonl, run_batch, write_results_jsonl, write_summary_csv, BatchContext,
    WorkflowError,
};
pub use prompts::Exemplar;

const SEQUENTIAL_RETRIEVAL_K: usize = 10;
const SEQUENTIAL_EXEMPLARS: usize = 3;
pub const DEFAULT_MAX_ITERATIONS: u32 = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Baseline,
    Sequential,
    Agentic,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::Baseline, Approach::Sequential, Approach::Agentic];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Baseline => "baseline",
            Approach::Sequential => "sequential",
            Approach::Agentic => "agentic",
        }
    }
}

/// One authoring task: what to detect, where, and which reference
/// detection it will be scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTask {
    pub gold_detection_id: String,
    pub description: String,
    pub target_platform: String,
    pub target_language: String,
    #[serde(default)]
    pub target_techniques: Vec<String>,
}

/// One executed tool call with a digest of its result text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub tool_name: String,
    pub arguments: Value,
    pub result_digest: String,
}

fn result_digest(text: &str) -> String {
    sha256_hex(text.as_bytes())[..16].to_string()
}

/// A finished run that produced detection code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    pub task: GenerationTask,
    pub approach: Approach,
    pub config: GenerationConfig,
    pub transcript: Vec<ChatTurn>,
    pub tool_invocations: Vec<ToolInvocation>,
    pub generated_code: String,
    pub iterations: u32,
    pub usage: TokenUsage,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FailureReason {
    IterationCapWithoutAnswer,
    ProviderError { message: String },
    NoCodeBlock,
}

impl FailureReason {
    pub fn slug(&self) -> &'static str {
        match self {
            FailureReason::IterationCapWithoutAnswer => "iteration-cap-without-answer",
            FailureReason::ProviderError { .. } => "provider-error",
            FailureReason::NoCodeBlock => "no-code-block",
        }
    }
}

/// A run that ended without usable code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowFailure {
    pub task: GenerationTask,
    pub approach: Approach,
    pub config: GenerationConfig,
    pub reason: FailureReason,
    pub transcript: Vec<ChatTurn>,
    pub tool_invocations: Vec<ToolInvocation>,
    pub iterations: u32,
    pub usage: TokenUsage,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum WorkflowOutcome {
    Success(GenerationResult),
    Failure(WorkflowFailure),
}

impl WorkflowOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, WorkflowOutcome::Success(_))
    }

    pub fn task(&self) -> &GenerationTask {
        match self {
            WorkflowOutcome::Success(r) => &r.task,
            WorkflowOutcome::Failure(f) => &f.task,
        }
    }

    pub fn approach(&self) -> Approach {
        match self {
            WorkflowOutcome::Success(r) => r.approach,
            WorkflowOutcome::Failure(f) => f.approach,
        }
    }

    pub fn config(&self) -> &GenerationConfig {
        match self {
            WorkflowOutcome::Success(r) => &r.config,
            WorkflowOutcome::Failure(f) => &f.config,
        }
    }

    pub fn transcript(&self) -> &[ChatTurn] {
        match self {
            WorkflowOutcome::Success(r) => &r.transcript,
            WorkflowOutcome::Failure(f) => &f.transcript,
        }
    }

    pub fn tool_invocations(&self) -> &[ToolInvocation] {
        match self {
            WorkflowOutcome::Success(r) => &r.tool_invocations,
            WorkflowOutcome::Failure(f) => &f.tool_invocations,
        }
    }

    pub fn generated_code(&self) -> Option<&str> {
        match self {
            WorkflowOutcome::Success(r) => Some(&r.generated_code),
            WorkflowOutcome::Failure(_) => None,
        }
    }

    pub fn iterations(&self) -> u32 {
        match self {
            WorkflowOutcome::Success(r) => r.iterations,
            WorkflowOutcome::Failure(f) => f.iterations,
        }
    }

    pub fn usage(&self) -> TokenUsage {
        match self {
            WorkflowOutcome::Success(r) => r.usage,
            WorkflowOutcome::Failure(f) => f.usage,
        }
    }

    pub fn wall_time_s(&self) -> f64 {
        match self {
            WorkflowOutcome::Success(r) => r.wall_time_s,
            WorkflowOutcome::Failure(f) => f.wall_time_s,
        }
    }

    /// `success`, or the failure reason slug.
    pub fn status_slug(&self) -> &'static str {
        match self {
            WorkflowOutcome::Success(_) => "success",
            WorkflowOutcome::Failure(f) => f.reason.slug(),
        }
    }
}

/// Knobs shared by all workflows.
#[derive(Debug, Clone)]
pub struct WorkflowOptions {
    /// Upper bound on assistant turns in the agentic loop.
    pub max_iterations: u32,
    /// Offer the four schema-backed tools to the agent.
    pub schema_tools: bool,
    /// Record wall_time_s as 0 so offline outputs are byte-stable.
    pub zero_wall_time: bool,
}

impl Default for WorkflowOptions {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            schema_tools: true,
            zero_wall_time: false,
        }
    }
}

/// Content of the last complete fenced code block, fences stripped.
/// An unterminated trailing fence is ignored.
pub fn extract_code_block(text: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(lines) => blocks.push(lines.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    blocks.pop()
}

fn final_code(text: &str) -> Option<String> {
    extract_code_block(text).filter(|code| !code.trim().is_empty())
}

struct RunState {
    task: GenerationTask,
    approach: Approach,
    config: GenerationConfig,
    started: Instant,
    zero_wall_time: bool,
    transcript: Vec<ChatTurn>,
    tool_invocations: Vec<ToolInvocation>,
    iterations: u32,
    usage: TokenUsage,
    flags: Vec<String>,
}

impl RunState {
    fn new(
        task: &GenerationTask,
        approach: Approach,
        config: &GenerationConfig,
        options: &WorkflowOptions,
    ) -> Self {
        Self {
            task: task.clone(),
            approach,
            config: config.clone(),
            started: Instant::now(),
            zero_wall_time: options.zero_wall_time,
            transcript: Vec::new(),
            tool_invocations: Vec::new(),
            iterations: 0,
            usage: TokenUsage::default(),
            flags: Vec::new(),
        }
    }

    fn wall_time(&self) -> f64 {
        if self.zero_wall_time {
            0.0
        } else {
            self.started.elapsed().as_secs_f64()
        }
    }

    fn succeed(self, generated_code: String) -> WorkflowOutcome {
        let wall_time_s = self.wall_time();
        WorkflowOutcome::Success(GenerationResult {
            task: self.task,
            approach: self.approach,
            config: self.config,
            transcript: self.transcript,
            tool_invocations: self.tool_invocations,
            generated_code,
            iterations: self.iterations,
            usage: self.usage,
            wall_time_s,
            flags: self.flags,
        })
    }

    fn fail(self, reason: FailureReason) -> WorkflowOutcome {
        let wall_time_s = self.wall_time();
        WorkflowOutcome::Failure(WorkflowFailure {
            task: self.task,
            approach: self.approach,
            config: self.config,
            reason,
            transcript: self.transcript,
            tool_invocations: self.tool_invocations,
            iterations: self.iterations,
            usage: self.usage,
            wall_time_s,
            flags: self.flags,
        })
    }
}

/// One chat call, no tools, no context beyond the task itself.
pub fn run_baseline(
    task: &GenerationTask,
    config: &GenerationConfig,
    chat: &dyn ChatProvider,
    options: &WorkflowOptions,
) -> WorkflowOutcome {
    let mut state = RunState::new(task, Approach::Baseline, config, options);
    state.transcript = vec![
        ChatTurn::system(prompts::system_prompt()),
        ChatTurn::user(prompts::baseline_user_prompt(task)),
    ];
    let reply = match chat.chat(&state.transcript, &[], config) {
        Ok(reply) => reply,
        Err(e) => {
            return state.fail(FailureReason::ProviderError {
                message: e.to_string(),
            });
        }
    };
    state.iterations = 1;
    state.usage.add(reply.usage);
    state.transcript.push(reply.turn.clone());
    match final_code(&reply.turn.content) {
        Some(code) => state.succeed(code),
        None => state.fail(FailureReason::NoCodeBlock),
    }
}

fn parse_seed_document(reply: &str) -> (Vec<String>, Vec<String>) {
    let Ok(value) = serde_json::from_str::<Value>(reply.trim()) else {
        return (Vec::new(), Vec::new());
    };
    let strings = |key: &str| -> Vec<String> {
        value
            .get(key)
            .and_then(Value::as_array)
            .map(|items| {
                items
                    .iter()
                    .filter_map(Value::as_str)
                    .map(str::to_string)
                    .collect()
            })
            .unwrap_or_default()
    };
    (strings("keywords"), strings("techniques"))
}

/// Extract seeds, retrieve exemplars through the store tools, then
/// generate with the exemplars inlined. The recorded transcript is the
/// extraction exchange followed by the generation exchange under one
/// system turn.
pub fn run_sequential(
    task: &GenerationTask,
    config: &GenerationConfig,
    chat: &dyn ChatProvider,
    executor: &ToolExecutor<'_>,
    options: &WorkflowOptions,
) -> WorkflowOutcome {
    let mut state = RunState::new(task, Approach::Sequential, config, options);
    state.transcript = vec![
        ChatTurn::system(prompts::system_prompt()),
        ChatTurn::user(prompts::extract_user_prompt(task)),
    ];
    let extract_reply = match chat.chat(&state.transcript, &[], config) {
        Ok(reply) => reply,
        Err(e) => {
            return state.fail(FailureReason::ProviderError {
                message: e.to_string(),
            });
        }
    };
    state.iterations = 1;
    state.usage.add(extract_reply.usage);
    state.transcript.push(extract_reply.turn.clone());

    let (keywords, _techniques) = parse_seed_document(&extract_reply.turn.content);
    let seed = if keywords.is_empty() {
        task.description.clone()
    } else {
        format!("{} {}", keywords.join(" "), task.description)
    };

    let search_args = json!({
        "query_text": seed,
        "k": SEQUENTIAL_RETRIEVAL_K,
        "platform": task.target_platform,
    });
    let hits = match executor.execute("semantic_search", &search_args) {
        Ok(result) => {
            state.tool_invocations.push(ToolInvocation {
                tool_name: "semantic_search".to_string(),
                arguments: search_args,
                result_digest: result_digest(&result.to_string()),
            });
            result["hits"].as_array().cloned().unwrap_or_default()
        }
        Err(e) => {
            return state.fail(FailureReason::ProviderError {
                message: e.to_string(),
            });
        }
    };
    if hits.is_empty() {
        state.flags.push("empty_retrieval".to_string());
    }

    let mut exemplars = Vec::new();
    for hit in hits.iter().take(SEQUENTIAL_EXEMPLARS) {
        let Some(id) = hit["detection_id"].as_str() else {
            continue;
        };
        let args = json!({ "detection_id": id });
        match executor.execute("get_content", &args) {
            Ok(result) => {
                state.tool_invocations.push(ToolInvocation {
                    tool_name: "get_content".to_string(),
                    arguments: args,
                    result_digest: result_digest(&result.to_string()),
                });
                exemplars.push(Exemplar {
                    detection_id: id.to_string(),
                    name: result["name"].as_str().unwrap_or(id).to_string(),
                    content: result["original_content"]
                        .as_str()
                        .unwrap_or("")
                        .to_string(),
                });
            }
            Err(e) => {
                return state.fail(FailureReason::ProviderError {
                    message: e.to_string(),
                });
            }
        }
    }

    let generate_user = ChatTurn::user(prompts::sequential_user_prompt(task, &exemplars));
    let generate_messages = vec![
        ChatTurn::system(prompts::system_prompt()),
        generate_user.clone(),
    ];
    state.transcript.push(generate_user);
    let generate_reply = match chat.chat(&generate_messages, &[], config) {
        Ok(reply) => reply,
        Err(e) => {
            return state.fail(FailureReason::ProviderError {
                message: e.to_string(),
            });
        }
    };
    state.iterations = 2;
    state.usage.add(generate_reply.usage);
    state.transcript.push(generate_reply.turn.clone());
    match final_code(&generate_reply.turn.content) {
        Some(code) => state.succeed(code),
        None => state.fail(FailureReason::NoCodeBlock),
    }
}

/// Tool-calling loop: the model may invoke any offered tool each turn;
/// tool failures are fed back as in-band error text. The loop ends on a
/// tool-call-free turn containing a fenced code block, or at the
/// iteration cap.
pub fn run_agentic(
    task: &GenerationTask,
    config: &GenerationConfig,
    chat: &dyn ChatProvider,
    executor: &ToolExecutor<'_>,
    options: &WorkflowOptions,
) -> WorkflowOutcome {
    let tools = tool_descriptors_for(options.schema_tools);
    let mut state = RunState::new(task, Approach::Agentic, config, options);
    state.transcript = vec![
        ChatTurn::system(prompts::agentic_system_prompt()),
        ChatTurn::user(prompts::agentic_user_prompt(task)),
    ];
    loop {
        if state.iterations >= options.max_iterations {
            return state.fail(FailureReason::IterationCapWithoutAnswer);
        }
        let reply = match chat.chat(&state.transcript, &tools, config) {
            Ok(reply) => reply,
            Err(e) => {
                return state.fail(FailureReason::ProviderError {
                    message: e.to_string(),
                });
            }
        };
        state.iterations += 1;
        state.usage.add(reply.usage);
        state.transcript.push(reply.turn.clone());
        if reply.turn.tool_calls.is_empty() {
            if let Some(code) = final_code(&reply.turn.content) {
                return state.succeed(code);
            }
            continue;
        }
        for call in &reply.turn.tool_calls {
            let text = match executor.execute(&call.name, &call.arguments) {
                Ok(value) => value.to_string(),
                Err(e) => format!("error: {e}"),
            };
            state.tool_invocations.push(ToolInvocation {
                tool_name: call.name.clone(),
                arguments: call.arguments.clone(),
                result_digest: result_digest(&text),
            });
            state.transcript.push(ChatTurn::tool(call.id.clone(), text));
        }
    }
}
