//! Batch execution: tasks crossed with approaches and model configs,
//! run under a worker pool, with JSONL and summary CSV persistence.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use thiserror::Error;

use crate::gateway::{ChatProvider, EmbedConfig, EmbedProvider, GenerationConfig};
use crate::mcp::ToolExecutor;
use crate::store::KnowledgeStore;

use super::{
    run_agentic, run_baseline, run_sequential, Approach, GenerationTask, WorkflowOptions,
    WorkflowOutcome,
};

#[derive(Debug, Error)]
pub enum WorkflowError {
    /// Gold references must be withheld from retrieval before
    /// generation runs against them.
    #[error("gold detections not held out: {}", ids.join(", "))]
    GoldNotHeldOut { ids: Vec<String> },
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("results line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Shared execution environment for one batch.
pub struct BatchContext<'a> {
    pub chat: &'a dyn ChatProvider,
    pub store: &'a KnowledgeStore,
    pub embedder: &'a dyn EmbedProvider,
    pub embed_config: EmbedConfig,
    /// Platforms whose agents are offered the schema-backed tools.
    pub schema_enabled_platforms: BTreeSet<String>,
    pub max_iterations: u32,
    pub zero_wall_time: bool,
    pub parallelism: usize,
}

fn validate(tasks: &[GenerationTask], store: &KnowledgeStore) -> Result<(), WorkflowError> {
    let mut missing = Vec::new();
    let mut visible = Vec::new();
    for task in tasks {
        if task.description.trim().is_empty() {
            return Err(WorkflowError::InvalidTask(format!(
                "task {} has an empty description",
                task.gold_detection_id
            )));
        }
        if task.target_platform.trim().is_empty() || task.target_language.trim().is_empty() {
            return Err(WorkflowError::InvalidTask(format!(
                "task {} is missing a target platform or language",
                task.gold_detection_id
            )));
        }
        match store.get_by_id(&task.gold_detection_id) {
            Err(_) => missing.push(task.gold_detection_id.clone()),
            Ok(entry) if !entry.holdout => visible.push(task.gold_detection_id.clone()),
            Ok(_) => {}
        }
    }
    if !missing.is_empty() {
        return Err(WorkflowError::InvalidTask(format!(
            "unknown gold detection ids: {}",
            missing.join(", ")
        )));
    }
    if !visible.is_empty() {
        return Err(WorkflowError::GoldNotHeldOut { ids: visible });
    }
    Ok(())
}

/// Run every task under every approach and config. Results come back
/// in cartesian order (tasks outermost, configs innermost) regardless
/// of parallelism.
pub fn run_batch(
    tasks: &[GenerationTask],
    approaches: &[Approach],
    configs: &[GenerationConfig],
    ctx: &BatchContext<'_>,
) -> Result<Vec<WorkflowOutcome>, WorkflowError> {
    validate(tasks, ctx.store)?;

    let mut cells = Vec::new();
    for task in tasks {
        for &approach in approaches {
            for config in configs {
                cells.push((task, approach, config));
            }
        }
    }
    let slots: Vec<Mutex<Option<WorkflowOutcome>>> =
        (0..cells.len()).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = ctx.parallelism.max(1).min(cells.len().max(1));

    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let executor = ToolExecutor::new(ctx.store, ctx.embedder, ctx.embed_config.clone());
                loop {
                    let index = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&(task, approach, config)) = cells.get(index) else {
                        break;
                    };
                    let options = WorkflowOptions {
                        max_iterations: ctx.max_iterations,
                        schema_tools: ctx.schema_enabled_platforms.contains(&task.target_platform),
                        zero_wall_time: ctx.zero_wall_time,
                    };
                    let outcome = match approach {
                        Approach::Baseline => run_baseline(task, config, ctx.chat, &options),
                        Approach::Sequential => {
                            run_sequential(task, config, ctx.chat, &executor, &options)
                        }
                        Approach::Agentic => {
                            run_agentic(task, config, ctx.chat, &executor, &options)
                        }
                    };
                    *slots[index].lock().expect("result slot") = Some(outcome);
                }
            });
        }
    });

    Ok(slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot")
                .expect("every cell completes")
        })
        .collect())
}

/// One outcome per line, transcripts included.
pub fn write_results_jsonl<W: Write>(
    outcomes: &[WorkflowOutcome],
    mut writer: W,
) -> Result<(), WorkflowError> {
    for outcome in outcomes {
        let line = serde_json::to_string(outcome).map_err(|e| WorkflowError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn read_results_jsonl<R: BufRead>(reader: R) -> Result<Vec<WorkflowOutcome>, WorkflowError> {
    let mut outcomes = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let outcome = serde_json::from_str(&line).map_err(|e| WorkflowError::Parse {
            line: index + 1,
            message: e.to_string(),
        })?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Compact per-run summary table.
pub fn write_summary_csv<W: Write>(outcomes: &[WorkflowOutcome], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record([
        "task",
        "approach",
        "model",
        "tier",
        "total_tokens",
        "iterations",
        "wall_time_s",
        "status",
    ])?;
    for outcome in outcomes {
        writer.write_record([
            outcome.task().gold_detection_id.clone(),
            outcome.approach().as_str().to_string(),
            outcome.config().model_id.clone(),
            outcome.config().tier_label(),
            outcome.usage().total_tokens.to_string(),
            outcome.iterations().to_string(),
            format!("{:.3}", outcome.wall_time_s()),
            outcome.status_slug().to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
