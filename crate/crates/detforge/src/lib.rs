//! Detection authoring workbench.
//!
//! The crate bundles everything needed to author and score security
//! detections with LLM assistance:
//!
//! * [`corpus`]: parsing and normalization of detection records and
//!   telemetry table schemas.
//! * [`embedding`]: fixed-dimension vectors and cosine similarity.
//! * [`store`]: an in-memory knowledge store with exact cosine retrieval,
//!   holdout enforcement, and deterministic on-disk persistence.
//! * [`mcp`]: a JSON-RPC 2.0 stdio tool server exposing the store to
//!   agent frameworks.
//! * [`gateway`]: chat and embedding provider abstractions with a
//!   deterministic scripted backend and an HTTP backend.
//! * [`workflows`]: baseline, sequential, and agentic authoring loops
//!   plus batch orchestration.
//! * [`eval`]: similarity metrics, judge verdicts, composite scoring,
//!   rank statistics, and report builders.

pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod gateway;
pub mod mcp;
pub mod store;
pub mod workflows;

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
