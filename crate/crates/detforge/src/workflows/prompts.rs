//! Versioned prompt rendering for the authoring workflows.

use super::GenerationTask;

/// First sentence of the extraction prompt; offline providers key on it.
pub(crate) const EXTRACT_MARKER: &str = "Extract retrieval seeds from the task below.";

const SYSTEM: &str = include_str!("../templates/system_v1.txt");
const AGENTIC_SYSTEM: &str = include_str!("../templates/agentic_system_v1.txt");
const BASELINE_USER: &str = include_str!("../templates/baseline_user_v1.txt");
const EXTRACT_USER: &str = include_str!("../templates/extract_user_v1.txt");
const SEQUENTIAL_USER: &str = include_str!("../templates/sequential_user_v1.txt");
const AGENTIC_USER: &str = include_str!("../templates/agentic_user_v1.txt");

/// One retrieved detection shown to the model as grounding material.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub detection_id: String,
    pub name: String,
    pub content: String,
}

fn render_task(template: &str, task: &GenerationTask) -> String {
    template
        .replace("{{platform}}", &task.target_platform)
        .replace("{{language}}", &task.target_language)
        .replace("{{techniques}}", &task.target_techniques.join(", "))
        .replace("{{description}}", &task.description)
        .trim_end()
        .to_string()
}

pub fn system_prompt() -> String {
    SYSTEM.trim_end().to_string()
}

pub fn agentic_system_prompt() -> String {
    AGENTIC_SYSTEM.trim_end().to_string()
}

pub fn baseline_user_prompt(task: &GenerationTask) -> String {
    render_task(BASELINE_USER, task)
}

pub fn extract_user_prompt(task: &GenerationTask) -> String {
    render_task(EXTRACT_USER, task)
}

pub fn agentic_user_prompt(task: &GenerationTask) -> String {
    render_task(AGENTIC_USER, task)
}

pub fn sequential_user_prompt(task: &GenerationTask, exemplars: &[Exemplar]) -> String {
    let block = if exemplars.is_empty() {
        "(no exemplars retrieved)".to_string()
    } else {
        exemplars
            .iter()
            .enumerate()
            .map(|(index, exemplar)| {
                format!(
                    "### Exemplar {}: {} ({})\n{}\n",
                    index + 1,
                    exemplar.name,
                    exemplar.detection_id,
                    exemplar.content
                )
            })
            .collect::<Vec<_>>()
            .join("\n")
    };
    SEQUENTIAL_USER
        .replace("{{platform}}", &task.target_platform)
        .replace("{{language}}", &task.target_language)
        .replace("{{techniques}}", &task.target_techniques.join(", "))
        .replace("{{description}}", &task.description)
        .replace("{{exemplars}}", &block)
        .trim_end()
        .to_string()
}

/// Task summary handed to the judge as shared context.
pub fn task_context(task: &GenerationTask) -> String {
    format!(
        "Platform: {}\nLanguage: {}\nTechniques: {}\n\n{}",
        task.target_platform,
        task.target_language,
        task.target_techniques.join(", "),
        task.description
    )
}
