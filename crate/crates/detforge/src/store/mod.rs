//! Detection knowledge store.
//!
//! Holds detection records with their embeddings plus telemetry table
//! schemas, and answers exact cosine retrieval, metadata queries, and
//! schema lookups. Records marked as holdout are invisible to every
//! query path; only [`KnowledgeStore::get_by_id`] can read them, for
//! audits.

mod persist;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    contains_identifier, normalize_mitre_id, CorpusError, DetectionRecord, MitreKind,
    TelemetryTableSchema,
};
use crate::embedding::EmbeddingVector;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("query embedding has zero magnitude")]
    ZeroVector,
    #[error("unknown detection id(s): {}", ids.join(", "))]
    NotFound { ids: Vec<String> },
    #[error("unknown platform: {0}")]
    UnknownPlatform(String),
    #[error("unknown table {table:?} on platform {platform:?}")]
    UnknownTable { platform: String, table: String },
    #[error("no table on platform {platform:?} supports action {action:?}")]
    NoTableSupportsAction { platform: String, action: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("corrupt store data: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl StoreError {
    fn not_found(id: &str) -> Self {
        StoreError::NotFound {
            ids: vec![id.to_string()],
        }
    }
}

/// A stored record with its embedding and holdout flag.
#[derive(Debug, Clone)]
pub struct StoredDetection {
    pub record: DetectionRecord,
    pub embedding: EmbeddingVector,
    pub holdout: bool,
}

/// One retrieval result: id, cosine score, and 1-based rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub detection_id: String,
    pub score: f64,
    pub rank: usize,
}

/// Optional metadata filters applied before ranking.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SearchFilters {
    pub platform: Option<String>,
    pub language: Option<String>,
    pub technique: Option<String>,
}

impl SearchFilters {
    fn matches(&self, record: &DetectionRecord) -> Result<bool, StoreError> {
        if let Some(platform) = &self.platform {
            if &record.platform != platform {
                return Ok(false);
            }
        }
        if let Some(language) = &self.language {
            if &record.language != language {
                return Ok(false);
            }
        }
        if let Some(technique) = &self.technique {
            let id = normalize_mitre_id(technique)?;
            if id.kind == MitreKind::Tactic {
                return Err(CorpusError::InvalidMitreId(technique.clone()).into());
            }
            if !technique_matches(&record.mitre_techniques, &id.canonical) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// True when `canonical` (a technique or sub-technique id) matches the
/// list: exact entry, or any sub-technique under a queried technique.
fn technique_matches(listed: &[String], canonical: &str) -> bool {
    listed.iter().any(|entry| {
        entry == canonical
            || (canonical.len() == 5
                && entry.len() > 5
                && entry.starts_with(canonical)
                && entry.as_bytes()[5] == b'.')
    })
}

/// In-memory detection knowledge store.
#[derive(Debug)]
pub struct KnowledgeStore {
    dimension: usize,
    entries: BTreeMap<String, StoredDetection>,
    /// platform -> table name -> schema
    schemas: BTreeMap<String, BTreeMap<String, TelemetryTableSchema>>,
}

impl KnowledgeStore {
    /// Create an empty store for embeddings of the given dimension.
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: BTreeMap::new(),
            schemas: BTreeMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert or replace a record with its embedding.
    ///
    /// A replaced record keeps its previous holdout flag.
    pub fn upsert(
        &mut self,
        record: DetectionRecord,
        embedding: EmbeddingVector,
    ) -> Result<(), StoreError> {
        if embedding.dimension() != self.dimension {
            return Err(StoreError::DimensionMismatch {
                expected: self.dimension,
                got: embedding.dimension(),
            });
        }
        let holdout = self
            .entries
            .get(&record.detection_id)
            .map(|e| e.holdout)
            .unwrap_or(false);
        self.entries.insert(
            record.detection_id.clone(),
            StoredDetection {
                record,
                embedding,
                holdout,
            },
        );
        Ok(())
    }

    /// Direct read by id, holdout included. This is the audit path; every
    /// query API refuses holdout records.
    pub fn get_by_id(&self, detection_id: &str) -> Result<&StoredDetection, StoreError> {
        self.entries
            .get(detection_id)
            .ok_or_else(|| StoreError::not_found(detection_id))
    }

    /// Like [`Self::get_by_id`] but treats holdout records as absent.
    pub fn get_visible(&self, detection_id: &str) -> Result<&StoredDetection, StoreError> {
        match self.entries.get(detection_id) {
            Some(entry) if !entry.holdout => Ok(entry),
            _ => Err(StoreError::not_found(detection_id)),
        }
    }

    /// Replace the holdout set. Every id must exist; on error the previous
    /// flags are left untouched.
    pub fn mark_holdout(&mut self, ids: &BTreeSet<String>) -> Result<(), StoreError> {
        let missing: Vec<String> = ids
            .iter()
            .filter(|id| !self.entries.contains_key(*id))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(StoreError::NotFound { ids: missing });
        }
        for (id, entry) in self.entries.iter_mut() {
            entry.holdout = ids.contains(id);
        }
        Ok(())
    }

    /// Ids currently marked holdout, sorted.
    pub fn holdout_ids(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, e)| e.holdout)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Iterate all entries (holdout included) in id order.
    pub fn iter_all(&self) -> impl Iterator<Item = &StoredDetection> {
        self.entries.values()
    }

    /// Exact cosine retrieval over the visible corpus.
    ///
    /// Scores every non-holdout record passing `filters`, then returns the
    /// top `k` sorted by score descending with ties broken by ascending
    /// detection id. Ranks are 1-based and contiguous.
    pub fn top_k_by_cosine(
        &self,
        query: &EmbeddingVector,
        k: usize,
        filters: &SearchFilters,
    ) -> Result<Vec<RankedHit>, StoreError> {
        if query.dimension() != self.dimension {
            return Err(StoreError::DimensionMismatch {
                expected: self.dimension,
                got: query.dimension(),
            });
        }
        if query.norm() == 0.0 {
            return Err(StoreError::ZeroVector);
        }
        let mut scored: Vec<(String, f64)> = Vec::new();
        for (id, entry) in &self.entries {
            if entry.holdout || !filters.matches(&entry.record)? {
                continue;
            }
            scored.push((id.clone(), query.cosine(&entry.embedding)));
        }
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("cosine scores are finite")
                .then_with(|| a.0.cmp(&b.0))
        });
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(idx, (detection_id, score))| RankedHit {
                detection_id,
                score,
                rank: idx + 1,
            })
            .collect())
    }

    /// Records nearest to an existing record's embedding, the seed record
    /// itself excluded. Errors if the seed is unknown or holdout.
    pub fn similar_to(&self, detection_id: &str, k: usize) -> Result<Vec<RankedHit>, StoreError> {
        let seed = self.get_visible(detection_id)?;
        let seed_embedding = seed.embedding.clone();
        let mut hits = self.top_k_by_cosine(&seed_embedding, k + 1, &SearchFilters::default())?;
        hits.retain(|hit| hit.detection_id != detection_id);
        hits.truncate(k);
        for (idx, hit) in hits.iter_mut().enumerate() {
            hit.rank = idx + 1;
        }
        Ok(hits)
    }

    /// All visible records carrying the given ATT&CK id, in id order.
    ///
    /// A tactic id matches the tactic list. A technique id matches exact
    /// entries and any of its sub-techniques. A sub-technique id matches
    /// exactly.
    pub fn query_by_mitre(&self, mitre_id: &str) -> Result<Vec<&DetectionRecord>, StoreError> {
        let id = normalize_mitre_id(mitre_id)?;
        let records = self
            .entries
            .values()
            .filter(|e| !e.holdout)
            .map(|e| &e.record)
            .filter(|record| match id.kind {
                MitreKind::Tactic => record.mitre_tactics.iter().any(|t| t == &id.canonical),
                _ => technique_matches(&record.mitre_techniques, &id.canonical),
            })
            .collect();
        Ok(records)
    }

    /// All visible records for a platform, optionally narrowed by
    /// language, in id order. Unknown platforms yield an empty list.
    pub fn query_by_platform(
        &self,
        platform: &str,
        language: Option<&str>,
    ) -> Vec<&DetectionRecord> {
        self.entries
            .values()
            .filter(|e| !e.holdout)
            .map(|e| &e.record)
            .filter(|record| {
                record.platform == platform
                    && language.map(|l| record.language == l).unwrap_or(true)
            })
            .collect()
    }

    /// Insert or replace a telemetry table schema.
    pub fn add_schema(&mut self, schema: TelemetryTableSchema) {
        self.schemas
            .entry(schema.platform.clone())
            .or_default()
            .insert(schema.table_name.clone(), schema);
    }

    /// All table schemas for a platform, sorted by table name.
    pub fn platform_tables(
        &self,
        platform: &str,
    ) -> Result<Vec<&TelemetryTableSchema>, StoreError> {
        self.schemas
            .get(platform)
            .map(|tables| tables.values().collect())
            .ok_or_else(|| StoreError::UnknownPlatform(platform.to_string()))
    }

    /// Schema of one table on one platform.
    pub fn table_schema(
        &self,
        platform: &str,
        table: &str,
    ) -> Result<&TelemetryTableSchema, StoreError> {
        let tables = self
            .schemas
            .get(platform)
            .ok_or_else(|| StoreError::UnknownPlatform(platform.to_string()))?;
        tables.get(table).ok_or_else(|| StoreError::UnknownTable {
            platform: platform.to_string(),
            table: table.to_string(),
        })
    }

    /// Pick the table best suited for an action on a platform.
    ///
    /// Candidates are the platform's tables listing the action among their
    /// supported actions. Each candidate is scored by how many of its
    /// fields occur (as whole identifiers) in the visible rule bodies of
    /// that platform; the highest count wins, ties broken by ascending
    /// table name.
    pub fn best_table_for_action(
        &self,
        platform: &str,
        action: &str,
    ) -> Result<String, StoreError> {
        let tables = self
            .schemas
            .get(platform)
            .ok_or_else(|| StoreError::UnknownPlatform(platform.to_string()))?;
        let candidates: Vec<&TelemetryTableSchema> = tables
            .values()
            .filter(|t| t.supported_actions.iter().any(|a| a == action))
            .collect();
        if candidates.is_empty() {
            return Err(StoreError::NoTableSupportsAction {
                platform: platform.to_string(),
                action: action.to_string(),
            });
        }
        let bodies: Vec<&str> = self
            .entries
            .values()
            .filter(|e| !e.holdout && e.record.platform == platform)
            .map(|e| e.record.original_content.as_str())
            .collect();
        let mut best: Option<(usize, &str)> = None;
        for candidate in candidates {
            let usage: usize = candidate
                .fields
                .iter()
                .filter(|field| {
                    bodies
                        .iter()
                        .any(|body| contains_identifier(body, &field.field_name))
                })
                .count();
            let better = match best {
                None => true,
                Some((best_usage, best_name)) => {
                    usage > best_usage
                        || (usage == best_usage && candidate.table_name.as_str() < best_name)
                }
            };
            if better {
                best = Some((usage, candidate.table_name.as_str()));
            }
        }
        Ok(best.expect("candidates is non-empty").1.to_string())
    }

    /// Iterate all schemas in (platform, table) order.
    pub fn iter_schemas(&self) -> impl Iterator<Item = &TelemetryTableSchema> {
        self.schemas.values().flat_map(|tables| tables.values())
    }
}
