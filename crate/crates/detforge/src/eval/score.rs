//! Composite score assembly: weights, components, and the blended
//! syntactic/semantic/overall scores.

use serde::{Deserialize, Serialize};

use super::judge::JudgeVerdict;
use super::EvalError;
use crate::gateway::{EmbedConfig, EmbedProvider, GatewayError, TokenUsage};

const WEIGHT_PAIR_TOLERANCE: f64 = 1e-9;

/// Blend weights for the three composite equations. Each pair must sum
/// to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub w_rouge: f64,
    pub w_lev: f64,
    pub w_llm: f64,
    pub w_embed: f64,
    pub w_semantic: f64,
    pub w_syntactic: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            w_rouge: 0.5,
            w_lev: 0.5,
            w_llm: 0.8,
            w_embed: 0.2,
            w_semantic: 0.8,
            w_syntactic: 0.2,
        }
    }
}

impl WeightConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        let pairs = [
            ("w_rouge/w_lev", self.w_rouge, self.w_lev),
            ("w_llm/w_embed", self.w_llm, self.w_embed),
            ("w_semantic/w_syntactic", self.w_semantic, self.w_syntactic),
        ];
        for (name, a, b) in pairs {
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
                return Err(EvalError::InvalidWeights(format!(
                    "{name} must lie in [0, 1], got ({a}, {b})"
                )));
            }
            if (a + b - 1.0).abs() > WEIGHT_PAIR_TOLERANCE {
                return Err(EvalError::InvalidWeights(format!(
                    "{name} must sum to 1, got {a} + {b} = {}",
                    a + b
                )));
            }
        }
        Ok(())
    }

    /// Copy with an overridden semantic/syntactic split.
    pub fn with_semantic_weight(&self, w_semantic: f64) -> Self {
        Self {
            w_semantic,
            w_syntactic: 1.0 - w_semantic,
            ..*self
        }
    }
}

/// Raw metric inputs for one candidate/reference pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricComponents {
    pub s_llm: f64,
    pub s_embed: f64,
    pub s_rouge_l: f64,
    pub s_lev: f64,
    pub verdict: JudgeVerdict,
}

/// All component and composite scores with the weights that produced
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub s_llm: f64,
    pub s_embed: f64,
    pub s_rouge_l: f64,
    pub s_lev: f64,
    pub s_syntactic: f64,
    pub s_semantic: f64,
    pub s_overall: f64,
    pub verdict: JudgeVerdict,
    pub weights: WeightConfig,
}

fn check_component(name: &'static str, value: f64) -> Result<(), EvalError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(EvalError::ComponentOutOfRange { name, value });
    }
    Ok(())
}

/// Blend components into syntactic, semantic, and overall scores:
///
/// ```text
/// s_syntactic = w_rouge    * s_rouge_l + w_lev       * s_lev
/// s_semantic  = w_llm      * s_llm     + w_embed     * s_embed
/// s_overall   = w_semantic * s_semantic + w_syntactic * s_syntactic
/// ```
pub fn composite(
    components: &MetricComponents,
    weights: &WeightConfig,
) -> Result<ScoreBreakdown, EvalError> {
    weights.validate()?;
    check_component("s_llm", components.s_llm)?;
    check_component("s_embed", components.s_embed)?;
    check_component("s_rouge_l", components.s_rouge_l)?;
    check_component("s_lev", components.s_lev)?;

    let s_syntactic = weights.w_rouge * components.s_rouge_l + weights.w_lev * components.s_lev;
    let s_semantic = weights.w_llm * components.s_llm + weights.w_embed * components.s_embed;
    let s_overall = weights.w_semantic * s_semantic + weights.w_syntactic * s_syntactic;

    Ok(ScoreBreakdown {
        s_llm: components.s_llm,
        s_embed: components.s_embed,
        s_rouge_l: components.s_rouge_l,
        s_lev: components.s_lev,
        s_syntactic,
        s_semantic,
        s_overall,
        verdict: components.verdict,
        weights: *weights,
    })
}

/// Cosine similarity of two text embeddings, clamped for compositing
/// with the raw value preserved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSimilarity {
    /// Raw cosine clamped into [0, 1]; this is what feeds `s_embed`.
    pub clamped: f64,
    /// Unclamped cosine in [-1, 1].
    pub raw: f64,
}

/// Embed both texts and take their cosine similarity.
pub fn embedding_similarity(
    generated_code: &str,
    reference_code: &str,
    embedder: &dyn EmbedProvider,
    config: &EmbedConfig,
) -> Result<EmbeddingSimilarity, GatewayError> {
    let generated = embedder.embed(generated_code, config)?;
    let reference = embedder.embed(reference_code, config)?;
    let raw = generated.cosine(&reference);
    Ok(EmbeddingSimilarity {
        clamped: raw.clamp(0.0, 1.0),
        raw,
    })
}

/// One scored result row, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    /// `{gold_id}:{approach}:{model}:{tier}`.
    pub row_id: String,
    pub gold_detection_id: String,
    pub approach: String,
    pub model_id: String,
    pub tier: String,
    /// `success` or the failure/error slug explaining why metrics are
    /// absent.
    pub status: String,
    pub iterations: u32,
    pub usage: TokenUsage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_embed_raw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<ScoreBreakdown>,
}

impl ScoredRow {
    pub fn row_id_for(gold: &str, approach: &str, model: &str, tier: &str) -> String {
        format!("{gold}:{approach}:{model}:{tier}")
    }
}
