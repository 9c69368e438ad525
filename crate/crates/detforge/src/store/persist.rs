//! Deterministic on-disk persistence for the knowledge store.
//!
//! A store directory holds four files:
//!
//! * `records.jsonl`: one JSON record per line, sorted by detection id.
//! * `embeddings.bin`: an 8-byte little-endian record count, a 4-byte
//!   little-endian dimension, then row-major `f32` little-endian values
//!   in the same id order as `records.jsonl`.
//! * `holdout.json`: a JSON array of the holdout ids, sorted.
//! * `schemas.json`: telemetry table schema documents, sorted by
//!   platform and table name. Older directories without this file load
//!   with an empty schema set.
//!
//! Saving the same store twice produces byte-identical files.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde_json::json;

use super::{KnowledgeStore, StoreError};
use crate::corpus::{parse_schema_documents, DetectionRecord};
use crate::embedding::EmbeddingVector;

const RECORDS_FILE: &str = "records.jsonl";
const EMBEDDINGS_FILE: &str = "embeddings.bin";
const HOLDOUT_FILE: &str = "holdout.json";
const SCHEMAS_FILE: &str = "schemas.json";

impl KnowledgeStore {
    /// Write the store to `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir)?;

        let mut records = BufWriter::new(fs::File::create(dir.join(RECORDS_FILE))?);
        for entry in self.iter_all() {
            let line = serde_json::to_string(&entry.record)
                .map_err(|err| StoreError::Corrupt(err.to_string()))?;
            records.write_all(line.as_bytes())?;
            records.write_all(b"\n")?;
        }
        records.flush()?;

        let mut embeddings = BufWriter::new(fs::File::create(dir.join(EMBEDDINGS_FILE))?);
        embeddings.write_all(&(self.len() as u64).to_le_bytes())?;
        embeddings.write_all(&(self.dimension() as u32).to_le_bytes())?;
        for entry in self.iter_all() {
            for value in entry.embedding.values() {
                embeddings.write_all(&value.to_le_bytes())?;
            }
        }
        embeddings.flush()?;

        let holdout = json!(self.holdout_ids());
        fs::write(dir.join(HOLDOUT_FILE), format!("{holdout}\n"))?;

        let mut platform_docs = Vec::new();
        let mut current_platform: Option<(String, Vec<serde_json::Value>)> = None;
        for schema in self.iter_schemas() {
            let table = json!({
                "table_name": schema.table_name,
                "fields": schema.fields,
                "supported_actions": schema.supported_actions,
            });
            match &mut current_platform {
                Some((platform, tables)) if *platform == schema.platform => tables.push(table),
                _ => {
                    if let Some((platform, tables)) = current_platform.take() {
                        platform_docs.push(json!({"platform": platform, "tables": tables}));
                    }
                    current_platform = Some((schema.platform.clone(), vec![table]));
                }
            }
        }
        if let Some((platform, tables)) = current_platform.take() {
            platform_docs.push(json!({"platform": platform, "tables": tables}));
        }
        let schemas_doc = serde_json::to_string_pretty(&serde_json::Value::Array(platform_docs))
            .map_err(|err| StoreError::Corrupt(err.to_string()))?;
        fs::write(dir.join(SCHEMAS_FILE), format!("{schemas_doc}\n"))?;

        Ok(())
    }

    /// Load a store previously written by [`Self::save`].
    pub fn load(dir: &Path) -> Result<KnowledgeStore, StoreError> {
        let mut embeddings = BufReader::new(fs::File::open(dir.join(EMBEDDINGS_FILE))?);
        let mut count_bytes = [0u8; 8];
        let mut dim_bytes = [0u8; 4];
        embeddings
            .read_exact(&mut count_bytes)
            .map_err(|_| StoreError::Corrupt("embeddings header truncated".to_string()))?;
        embeddings
            .read_exact(&mut dim_bytes)
            .map_err(|_| StoreError::Corrupt("embeddings header truncated".to_string()))?;
        let count = u64::from_le_bytes(count_bytes) as usize;
        let dimension = u32::from_le_bytes(dim_bytes) as usize;
        if dimension == 0 {
            return Err(StoreError::Corrupt(
                "embedding dimension is zero".to_string(),
            ));
        }

        let mut store = KnowledgeStore::new(dimension);
        let records = BufReader::new(fs::File::open(dir.join(RECORDS_FILE))?);
        let mut row = vec![0u8; dimension * 4];
        let mut parsed = 0usize;
        for line in records.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: DetectionRecord = serde_json::from_str(&line)
                .map_err(|err| StoreError::Corrupt(format!("bad record line: {err}")))?;
            embeddings.read_exact(&mut row).map_err(|_| {
                StoreError::Corrupt(format!(
                    "embeddings file ends before record {:?}",
                    record.detection_id
                ))
            })?;
            let values: Vec<f32> = row
                .chunks_exact(4)
                .map(|chunk| f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
                .collect();
            let embedding = EmbeddingVector::new(values)
                .map_err(|err| StoreError::Corrupt(format!("bad embedding row: {err}")))?;
            store.upsert(record, embedding)?;
            parsed += 1;
        }
        if parsed != count {
            return Err(StoreError::Corrupt(format!(
                "embeddings header claims {count} records, records file has {parsed}"
            )));
        }
        if store.len() != parsed {
            return Err(StoreError::Corrupt(
                "duplicate detection ids in records file".to_string(),
            ));
        }

        let holdout_raw = fs::read_to_string(dir.join(HOLDOUT_FILE))?;
        let holdout_ids: Vec<String> = serde_json::from_str(&holdout_raw)
            .map_err(|err| StoreError::Corrupt(format!("bad holdout file: {err}")))?;
        let holdout: BTreeSet<String> = holdout_ids.into_iter().collect();
        store.mark_holdout(&holdout).map_err(|err| match err {
            StoreError::NotFound { ids } => StoreError::Corrupt(format!(
                "holdout file names unknown ids: {}",
                ids.join(", ")
            )),
            other => other,
        })?;

        let schemas_path = dir.join(SCHEMAS_FILE);
        if schemas_path.exists() {
            let raw = fs::read_to_string(&schemas_path)?;
            let value: serde_json::Value = serde_json::from_str(&raw)
                .map_err(|err| StoreError::Corrupt(format!("bad schemas file: {err}")))?;
            for schema in parse_schema_documents(&value)? {
                store.add_schema(schema);
            }
        }

        Ok(store)
    }
}
