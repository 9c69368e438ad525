//! Ten-criterion LLM judge.
//!
//! A single chat call presents the reference and candidate detections
//! with ten yes/no quality criteria; the reply must be a strict JSON
//! object with one boolean per criterion. One re-ask is allowed on
//! malformed output.

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::gateway::{ChatProvider, ChatTurn, GenerationConfig, TokenUsage};

/// Criterion field names, in prompt order.
pub const CRITERIA: [&str; 10] = [
    "ttp_match",
    "logic_equivalence",
    "schema_accuracy",
    "syntax_validity",
    "indicator_alignment",
    "exclusion_parity",
    "robustness",
    "data_source_correct",
    "output_alignment",
    "library_usage",
];

/// Marker sentence present in every judge prompt; scripted backends key
/// on it.
pub(crate) const JUDGE_MARKER: &str = "Answer each criterion with true or false.";

/// One boolean per quality criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgeVerdict {
    pub ttp_match: bool,
    pub logic_equivalence: bool,
    pub schema_accuracy: bool,
    pub syntax_validity: bool,
    pub indicator_alignment: bool,
    pub exclusion_parity: bool,
    pub robustness: bool,
    pub data_source_correct: bool,
    pub output_alignment: bool,
    pub library_usage: bool,
}

impl JudgeVerdict {
    pub const fn all(value: bool) -> Self {
        Self {
            ttp_match: value,
            logic_equivalence: value,
            schema_accuracy: value,
            syntax_validity: value,
            indicator_alignment: value,
            exclusion_parity: value,
            robustness: value,
            data_source_correct: value,
            output_alignment: value,
            library_usage: value,
        }
    }

    /// Build a verdict from the low ten bits; bit 0 is `ttp_match`, bit
    /// 9 `library_usage`.
    pub fn from_bits(bits: u16) -> Self {
        let bit = |i: u16| bits & (1 << i) != 0;
        Self {
            ttp_match: bit(0),
            logic_equivalence: bit(1),
            schema_accuracy: bit(2),
            syntax_validity: bit(3),
            indicator_alignment: bit(4),
            exclusion_parity: bit(5),
            robustness: bit(6),
            data_source_correct: bit(7),
            output_alignment: bit(8),
            library_usage: bit(9),
        }
    }

    pub fn to_bits(self) -> u16 {
        self.as_array()
            .iter()
            .enumerate()
            .fold(0u16, |acc, (i, &c)| acc | (u16::from(c) << i))
    }

    /// Criterion values in [`CRITERIA`] order.
    pub fn as_array(self) -> [bool; 10] {
        [
            self.ttp_match,
            self.logic_equivalence,
            self.schema_accuracy,
            self.syntax_validity,
            self.indicator_alignment,
            self.exclusion_parity,
            self.robustness,
            self.data_source_correct,
            self.output_alignment,
            self.library_usage,
        ]
    }

    pub fn true_count(self) -> u32 {
        self.as_array().iter().filter(|&&c| c).count() as u32
    }
}

/// Fraction of criteria judged true.
pub fn llm_judge_score(verdict: &JudgeVerdict) -> f64 {
    f64::from(verdict.true_count()) / 10.0
}

const JUDGE_SYSTEM: &str = include_str!("../templates/judge_system_v1.txt");
const JUDGE_USER: &str = include_str!("../templates/judge_user_v1.txt");

/// Render the fixed judge prompt for one reference/candidate pair.
pub fn judge_prompt(candidate_code: &str, gold_code: &str, task_context: &str) -> String {
    JUDGE_USER
        .replace("{{task_context}}", task_context)
        .replace("{{reference}}", gold_code)
        .replace("{{candidate}}", candidate_code)
}

fn parse_verdict(reply: &str) -> Option<JudgeVerdict> {
    serde_json::from_str(reply.trim()).ok()
}

/// The verdict plus the judge's own token usage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JudgeOutcome {
    pub verdict: JudgeVerdict,
    pub usage: TokenUsage,
}

/// Run the judge once (with a single re-ask on malformed output).
///
/// The judge model must run at temperature 0.
pub fn judge(
    candidate_code: &str,
    gold_code: &str,
    task_context: &str,
    provider: &dyn ChatProvider,
    config: &GenerationConfig,
) -> Result<JudgeOutcome, EvalError> {
    if candidate_code.is_empty() {
        return Err(EvalError::EmptyInput("candidate_code"));
    }
    if gold_code.is_empty() {
        return Err(EvalError::EmptyInput("gold_code"));
    }
    if config.temperature != 0.0 {
        return Err(EvalError::InvalidConfig(format!(
            "judge temperature must be 0, got {}",
            config.temperature
        )));
    }

    let mut messages = vec![
        ChatTurn::system(JUDGE_SYSTEM),
        ChatTurn::user(judge_prompt(candidate_code, gold_code, task_context)),
    ];
    let first = provider.chat(&messages, &[], config)?;
    let mut usage = first.usage;
    if let Some(verdict) = parse_verdict(&first.turn.content) {
        return Ok(JudgeOutcome { verdict, usage });
    }

    messages.push(first.turn);
    messages.push(ChatTurn::user(format!(
        "That reply was not a bare JSON object. {JUDGE_MARKER} Reply with only a JSON object holding exactly these boolean keys: {}.",
        CRITERIA.join(", ")
    )));
    let second = provider.chat(&messages, &[], config)?;
    usage.add(second.usage);
    match parse_verdict(&second.turn.content) {
        Some(verdict) => Ok(JudgeOutcome { verdict, usage }),
        None => Err(EvalError::UnparseableVerdict),
    }
}
