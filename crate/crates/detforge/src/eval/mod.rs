//! Scoring and reporting for generated detections.
//!
//! [`metrics`] holds the text-similarity primitives (ROUGE-L over code
//! tokens, character-level Levenshtein), [`judge`] the ten-criterion
//! LLM judge, [`score`] the composite weighting machinery, [`stats`]
//! rank correlations, and [`reports`] the calibration, criterion,
//! leaderboard, and token-consumption report builders.

pub mod judge;
pub mod metrics;
pub mod pipeline;
pub mod reports;
pub mod score;
pub mod stats;

use thiserror::Error;

use crate::gateway::GatewayError;
use stats::StatsError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("component {name} = {value} is outside [0, 1]")]
    ComponentOutOfRange { name: &'static str, value: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("judge reply was not a valid ten-criterion verdict, even after one retry")]
    UnparseableVerdict,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}
