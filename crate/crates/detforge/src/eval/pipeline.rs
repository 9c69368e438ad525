//! Scoring orchestration: one workflow outcome in, one scored row out.

use log::warn;

use crate::corpus::DetectionRecord;
use crate::gateway::{ChatProvider, EmbedConfig, EmbedProvider, GenerationConfig};
use crate::store::KnowledgeStore;
use crate::workflows::{prompts, WorkflowOutcome};

use super::judge::{judge, llm_judge_score};
use super::metrics::{levenshtein_similarity, rouge_l_f1_text};
use super::score::{composite, embedding_similarity, MetricComponents, ScoredRow, WeightConfig};

/// Everything needed to score outcomes: a judge, an embedder, and the
/// blend weights.
pub struct ScoringContext<'a> {
    pub judge_chat: &'a dyn ChatProvider,
    pub judge_config: &'a GenerationConfig,
    pub embedder: &'a dyn EmbedProvider,
    pub embed_config: &'a EmbedConfig,
    pub weights: WeightConfig,
}

fn base_row(outcome: &WorkflowOutcome, status: &str) -> ScoredRow {
    let task = outcome.task();
    let config = outcome.config();
    let tier = config.tier_label();
    ScoredRow {
        row_id: ScoredRow::row_id_for(
            &task.gold_detection_id,
            outcome.approach().as_str(),
            &config.model_id,
            &tier,
        ),
        gold_detection_id: task.gold_detection_id.clone(),
        approach: outcome.approach().as_str().to_string(),
        model_id: config.model_id.clone(),
        tier,
        status: status.to_string(),
        iterations: outcome.iterations(),
        usage: outcome.usage(),
        s_embed_raw: None,
        breakdown: None,
    }
}

/// Score one outcome against its gold reference. Generation failures
/// and scoring-stage errors come back as rows without metrics, status
/// explaining why.
pub fn score_outcome(
    outcome: &WorkflowOutcome,
    gold: Option<&DetectionRecord>,
    ctx: &ScoringContext<'_>,
) -> ScoredRow {
    let Some(generated) = outcome.generated_code() else {
        return base_row(outcome, outcome.status_slug());
    };
    let Some(gold) = gold else {
        return base_row(outcome, "missing-gold");
    };
    let reference = gold.original_content.as_str();

    let s_rouge_l = rouge_l_f1_text(generated, reference);
    let s_lev = levenshtein_similarity(generated, reference);

    let embed = match embedding_similarity(generated, reference, ctx.embedder, ctx.embed_config) {
        Ok(similarity) => similarity,
        Err(e) => {
            warn!(
                "embedding failed for {}: {e}",
                outcome.task().gold_detection_id
            );
            return base_row(outcome, "embed-error");
        }
    };

    let context = prompts::task_context(outcome.task());
    let judged = match judge(
        generated,
        reference,
        &context,
        ctx.judge_chat,
        ctx.judge_config,
    ) {
        Ok(judged) => judged,
        Err(e) => {
            warn!("judge failed for {}: {e}", outcome.task().gold_detection_id);
            return base_row(outcome, "judge-error");
        }
    };

    let components = MetricComponents {
        s_llm: llm_judge_score(&judged.verdict),
        s_embed: embed.clamped,
        s_rouge_l,
        s_lev,
        verdict: judged.verdict,
    };
    let breakdown = match composite(&components, &ctx.weights) {
        Ok(breakdown) => breakdown,
        Err(e) => {
            warn!(
                "compositing failed for {}: {e}",
                outcome.task().gold_detection_id
            );
            return base_row(outcome, "score-error");
        }
    };

    let mut row = base_row(outcome, "success");
    row.s_embed_raw = Some(embed.raw);
    row.breakdown = Some(breakdown);
    row
}

/// Score a batch, resolving each gold reference through the store's
/// audit read (gold records are normally holdout).
pub fn score_outcomes(
    outcomes: &[WorkflowOutcome],
    store: &KnowledgeStore,
    ctx: &ScoringContext<'_>,
) -> Vec<ScoredRow> {
    outcomes
        .iter()
        .map(|outcome| {
            let gold = store
                .get_by_id(&outcome.task().gold_detection_id)
                .ok()
                .map(|entry| &entry.record);
            score_outcome(outcome, gold, ctx)
        })
        .collect()
}
