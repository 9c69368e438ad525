//! Built-in deterministic reply synthesis for offline runs.
//!
//! When a scripted provider has no scenario entry for a prompt, the
//! playbook derives a plausible reply from the prompt itself: extraction
//! prompts get a strict JSON seed document, judge prompts get a strict
//! JSON verdict, tool-bearing conversations get a short
//! search-read-write trace, and anything else gets a fenced code block
//! synthesized from the task fields. Replies depend only on the message
//! content, never on the stored corpus, so offline outputs are stable
//! and cannot leak reference material.

use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::scripted::ScriptedReply;
use super::{last_user_content, ChatTurn, Role, ToolDescriptor};
use crate::corpus::scan_technique_ids;
use crate::eval::judge::{CRITERIA, JUDGE_MARKER};
use crate::sha256_hex;
use crate::workflows::prompts::EXTRACT_MARKER;

pub(crate) fn reply(messages: &[ChatTurn], tools: &[ToolDescriptor]) -> ScriptedReply {
    let content = last_user_content(messages).unwrap_or("");
    if content.contains(EXTRACT_MARKER) {
        return extraction_reply(content);
    }
    if content.contains(JUDGE_MARKER) {
        return judge_reply(content);
    }
    if !tools.is_empty() {
        return agentic_reply(messages, content);
    }
    final_code_reply(content)
}

/// Text following a `header` line, up to the next blank line.
fn section_after<'a>(content: &'a str, header: &str) -> &'a str {
    let Some(start) = content.find(header) else {
        return "";
    };
    let rest = &content[start + header.len()..];
    let end = rest.find("\n\n").unwrap_or(rest.len());
    rest[..end].trim()
}

/// Value of a `prefix` line such as `Platform: azure`.
fn field_line<'a>(content: &'a str, prefix: &str) -> Option<&'a str> {
    content
        .lines()
        .find_map(|line| line.strip_prefix(prefix))
        .map(str::trim)
        .filter(|v| !v.is_empty())
}

fn extraction_reply(content: &str) -> ScriptedReply {
    let description = section_after(content, "Threat description:");
    let mut keywords = Vec::new();
    let mut seen = BTreeSet::new();
    for word in description.split(|c: char| !c.is_ascii_alphanumeric()) {
        let lower = word.to_ascii_lowercase();
        if lower.len() >= 5
            && lower.chars().all(|c| c.is_ascii_alphabetic())
            && seen.insert(lower.clone())
        {
            keywords.push(lower);
            if keywords.len() == 4 {
                break;
            }
        }
    }
    let techniques: Vec<String> = scan_technique_ids(content).into_iter().collect();
    ScriptedReply::text(json!({"keywords": keywords, "techniques": techniques}).to_string())
}

fn judge_reply(content: &str) -> ScriptedReply {
    let digest = sha256_hex(content.as_bytes());
    let bytes = digest.as_bytes();
    let mut doc = serde_json::Map::new();
    for (idx, criterion) in CRITERIA.iter().enumerate() {
        doc.insert(
            (*criterion).to_string(),
            Value::Bool(bytes[idx].is_multiple_of(2)),
        );
    }
    ScriptedReply::text(Value::Object(doc).to_string())
}

fn seed_text(content: &str) -> String {
    let description = section_after(content, "Threat description:");
    let base = if description.is_empty() {
        content
    } else {
        description
    };
    base.split_whitespace()
        .take(12)
        .collect::<Vec<_>>()
        .join(" ")
}

fn first_hit_id(messages: &[ChatTurn]) -> Option<String> {
    let tool_turn = messages.iter().rev().find(|m| m.role == Role::Tool)?;
    let value: Value = serde_json::from_str(&tool_turn.content).ok()?;
    value
        .get("hits")?
        .get(0)?
        .get("detection_id")?
        .as_str()
        .map(str::to_string)
}

fn agentic_reply(messages: &[ChatTurn], content: &str) -> ScriptedReply {
    let assistant_turns = messages
        .iter()
        .filter(|m| m.role == Role::Assistant)
        .count();
    match assistant_turns {
        0 => ScriptedReply::tool_call(
            "semantic_search",
            json!({"k": 5, "query_text": seed_text(content)}),
        ),
        1 => match first_hit_id(messages) {
            Some(id) => ScriptedReply::tool_call("get_content", json!({"detection_id": id})),
            None => final_code_reply(content),
        },
        _ => final_code_reply(content),
    }
}

fn final_code_reply(content: &str) -> ScriptedReply {
    let platform = field_line(content, "Platform:").unwrap_or("generic");
    let language = field_line(content, "Language:").unwrap_or("query");
    let techniques: Vec<String> = scan_technique_ids(content).into_iter().collect();
    let quoted = if techniques.is_empty() {
        "\"unmapped\"".to_string()
    } else {
        techniques
            .iter()
            .map(|t| format!("\"{t}\""))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let digest = &sha256_hex(content.as_bytes())[..12];
    let body = format!(
        "// synthesized draft {digest}\n\
         // platform: {platform}\n\
         SecurityEvents\n\
         | where TechniqueTags has_any ({quoted})\n\
         | where PlatformName == \"{platform}\"\n\
         | summarize Hits = count() by AccountName, bin(TimeGenerated, 15m)\n\
         | where Hits > 5\n\
         | project TimeGenerated, AccountName, Hits"
    );
    ScriptedReply::text(format!("Draft complete.\n\n```{language}\n{body}\n```\n"))
}
