//! Detection corpus parsing and normalization.
//!
//! Input records arrive as JSON documents, one per detection. Parsing
//! validates required fields, canonicalizes ATT&CK ids, and drops
//! duplicate list entries. [`infer_missing_metadata`] then backfills
//! technique ids and telemetry data sources that are visible verbatim in
//! the rule body but absent from the metadata.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("missing or empty required field: {0}")]
    MissingField(&'static str),
    #[error("invalid ATT&CK id: {0:?}")]
    InvalidMitreId(String),
    #[error("invalid detection document: {0}")]
    InvalidDocument(String),
    #[error("invalid telemetry schema: {0}")]
    InvalidSchema(String),
}

/// One detection rule plus its catalog metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub detection_id: String,
    pub name: String,
    pub description: String,
    pub original_content: String,
    pub platform: String,
    pub language: String,
    pub mitre_tactics: Vec<String>,
    pub mitre_techniques: Vec<String>,
    pub data_sources: Vec<String>,
    pub repository: String,
    pub file_path: String,
}

/// Kind of an ATT&CK identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MitreKind {
    Tactic,
    Technique,
    SubTechnique,
}

/// A validated, canonical ATT&CK identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MitreId {
    pub kind: MitreKind,
    pub canonical: String,
}

impl MitreId {
    /// Parent technique id for a sub-technique, otherwise the id itself.
    pub fn parent(&self) -> &str {
        match self.kind {
            MitreKind::SubTechnique => &self.canonical[..5],
            _ => &self.canonical,
        }
    }
}

static TACTIC_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^TA\d{4}$").unwrap());
static TECHNIQUE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^T\d{4}(\.\d{3})?$").unwrap());
static TECHNIQUE_SCAN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bT\d{4}(\.\d{3})?\b").unwrap());

/// Canonicalize an ATT&CK id: trim, uppercase, and classify.
pub fn normalize_mitre_id(raw: &str) -> Result<MitreId, CorpusError> {
    let canonical = raw.trim().to_ascii_uppercase();
    if TACTIC_RE.is_match(&canonical) {
        return Ok(MitreId {
            kind: MitreKind::Tactic,
            canonical,
        });
    }
    if TECHNIQUE_RE.is_match(&canonical) {
        let kind = if canonical.len() > 5 {
            MitreKind::SubTechnique
        } else {
            MitreKind::Technique
        };
        return Ok(MitreId { kind, canonical });
    }
    Err(CorpusError::InvalidMitreId(raw.to_string()))
}

fn required_string(
    doc: &serde_json::Map<String, Value>,
    key: &'static str,
) -> Result<String, CorpusError> {
    match doc.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.clone()),
        Some(Value::String(_)) | None | Some(Value::Null) => Err(CorpusError::MissingField(key)),
        Some(other) => Err(CorpusError::InvalidDocument(format!(
            "field {key:?} must be a string, got {other}"
        ))),
    }
}

fn optional_string(doc: &serde_json::Map<String, Value>, key: &str) -> Result<String, CorpusError> {
    match doc.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        None | Some(Value::Null) => Ok(String::new()),
        Some(other) => Err(CorpusError::InvalidDocument(format!(
            "field {key:?} must be a string, got {other}"
        ))),
    }
}

fn string_list(
    doc: &serde_json::Map<String, Value>,
    key: &str,
) -> Result<Vec<String>, CorpusError> {
    match doc.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => Ok(s.clone()),
                other => Err(CorpusError::InvalidDocument(format!(
                    "entry in {key:?} must be a string, got {other}"
                ))),
            })
            .collect(),
        Some(other) => Err(CorpusError::InvalidDocument(format!(
            "field {key:?} must be an array, got {other}"
        ))),
    }
}

fn dedup_preserving_order(values: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    values
        .into_iter()
        .filter(|v| seen.insert(v.clone()))
        .collect()
}

/// Parse one detection document.
///
/// `detection_id`, `original_content`, `platform`, and `language` are
/// required and must be non-empty. ATT&CK lists are canonicalized and
/// deduplicated; a tactic id in the technique list (or vice versa) is an
/// error.
pub fn parse_detection_record(raw: &Value) -> Result<DetectionRecord, CorpusError> {
    let doc = raw
        .as_object()
        .ok_or_else(|| CorpusError::InvalidDocument(format!("expected an object, got {raw}")))?;

    let mut tactics = Vec::new();
    for value in string_list(doc, "mitre_tactics")? {
        let id = normalize_mitre_id(&value)?;
        if id.kind != MitreKind::Tactic {
            return Err(CorpusError::InvalidMitreId(value));
        }
        tactics.push(id.canonical);
    }

    let mut techniques = Vec::new();
    for value in string_list(doc, "mitre_techniques")? {
        let id = normalize_mitre_id(&value)?;
        if id.kind == MitreKind::Tactic {
            return Err(CorpusError::InvalidMitreId(value));
        }
        techniques.push(id.canonical);
    }

    Ok(DetectionRecord {
        detection_id: required_string(doc, "detection_id")?,
        name: optional_string(doc, "name")?,
        description: optional_string(doc, "description")?,
        original_content: required_string(doc, "original_content")?,
        platform: required_string(doc, "platform")?,
        language: required_string(doc, "language")?,
        mitre_tactics: dedup_preserving_order(tactics),
        mitre_techniques: dedup_preserving_order(techniques),
        data_sources: dedup_preserving_order(string_list(doc, "data_sources")?),
        repository: optional_string(doc, "repository")?,
        file_path: optional_string(doc, "file_path")?,
    })
}

/// One telemetry field of a table schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetryField {
    pub field_name: String,
    pub semantic_type: String,
}

/// Schema of one telemetry table on one platform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TelemetryTableSchema {
    pub platform: String,
    pub table_name: String,
    pub fields: Vec<TelemetryField>,
    pub supported_actions: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformDoc {
    platform: String,
    tables: Vec<TableDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    table_name: String,
    fields: Vec<TelemetryField>,
    #[serde(default)]
    supported_actions: Vec<String>,
}

/// Parse telemetry schema documents: either a single platform document
/// `{"platform", "tables"}` or an array of them.
pub fn parse_schema_documents(raw: &Value) -> Result<Vec<TelemetryTableSchema>, CorpusError> {
    let docs: Vec<PlatformDoc> = if raw.is_array() {
        serde_json::from_value(raw.clone())
    } else {
        serde_json::from_value(raw.clone()).map(|doc: PlatformDoc| vec![doc])
    }
    .map_err(|err| CorpusError::InvalidSchema(err.to_string()))?;

    let mut schemas = Vec::new();
    for doc in docs {
        if doc.platform.trim().is_empty() {
            return Err(CorpusError::InvalidSchema(
                "empty platform name".to_string(),
            ));
        }
        let mut seen_tables = BTreeSet::new();
        for table in doc.tables {
            if table.table_name.trim().is_empty() {
                return Err(CorpusError::InvalidSchema(format!(
                    "empty table name on platform {:?}",
                    doc.platform
                )));
            }
            if !seen_tables.insert(table.table_name.clone()) {
                return Err(CorpusError::InvalidSchema(format!(
                    "duplicate table {:?} on platform {:?}",
                    table.table_name, doc.platform
                )));
            }
            if table.fields.is_empty() {
                return Err(CorpusError::InvalidSchema(format!(
                    "table {:?} on platform {:?} has no fields",
                    table.table_name, doc.platform
                )));
            }
            let mut seen_fields = BTreeSet::new();
            for field in &table.fields {
                if !seen_fields.insert(field.field_name.clone()) {
                    return Err(CorpusError::InvalidSchema(format!(
                        "duplicate field {:?} in table {:?}",
                        field.field_name, table.table_name
                    )));
                }
            }
            schemas.push(TelemetryTableSchema {
                platform: doc.platform.clone(),
                table_name: table.table_name,
                fields: table.fields,
                supported_actions: table.supported_actions,
            });
        }
    }
    Ok(schemas)
}

/// True when `ident` occurs in `haystack` delimited by non-identifier
/// characters (identifier characters are ASCII alphanumerics and `_`).
pub fn contains_identifier(haystack: &str, ident: &str) -> bool {
    if ident.is_empty() {
        return false;
    }
    let is_ident_char = |c: char| c.is_ascii_alphanumeric() || c == '_';
    let bytes = haystack.as_bytes();
    let mut search_from = 0;
    while let Some(pos) = haystack[search_from..].find(ident) {
        let start = search_from + pos;
        let end = start + ident.len();
        let left_ok = start == 0 || !is_ident_char(bytes[start - 1] as char);
        let right_ok = end == bytes.len() || !is_ident_char(bytes[end] as char);
        if left_ok && right_ok {
            return true;
        }
        search_from = start + 1;
    }
    false
}

/// Technique ids matching `T\d{4}(\.\d{3})?` found verbatim in a text,
/// sorted and deduplicated.
pub fn scan_technique_ids(text: &str) -> BTreeSet<String> {
    TECHNIQUE_SCAN_RE
        .find_iter(text)
        .map(|m| m.as_str().to_string())
        .collect()
}

/// Backfill metadata visible verbatim in a record's text.
///
/// Technique ids matching `T\d{4}(\.\d{3})?` found in the description or
/// rule body are appended to `mitre_techniques`; known table names found
/// in the rule body are appended to `data_sources`. Existing entries are
/// never removed; new entries are appended in sorted order, which makes
/// the pass idempotent.
pub fn infer_missing_metadata(record: &mut DetectionRecord, schemas: &[TelemetryTableSchema]) {
    let mut found_techniques = BTreeSet::new();
    for text in [&record.description, &record.original_content] {
        found_techniques.extend(scan_technique_ids(text));
    }
    for technique in found_techniques {
        if !record.mitre_techniques.contains(&technique) {
            record.mitre_techniques.push(technique);
        }
    }

    let mut found_tables = BTreeSet::new();
    for schema in schemas {
        if contains_identifier(&record.original_content, &schema.table_name) {
            found_tables.insert(schema.table_name.clone());
        }
    }
    for table in found_tables {
        if !record.data_sources.contains(&table) {
            record.data_sources.push(table);
        }
    }
}

/// The text that gets embedded for a record: name, description, and rule
/// body joined by newlines.
pub fn embedding_text(record: &DetectionRecord) -> String {
    format!(
        "{}\n{}\n{}",
        record.name, record.description, record.original_content
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample_doc() -> Value {
        json!({
            "detection_id": "det-0001",
            "name": "Suspicious sign-in burst",
            "description": "Flags bursts of failed sign-ins tied to T1110.",
            "original_content": "SigninLogs | where ResultType != 0 | summarize count() by UserPrincipalName",
            "platform": "azure",
            "language": "kql",
            "mitre_tactics": ["ta0006"],
            "mitre_techniques": ["t1110", "T1110"],
            "data_sources": ["SigninLogs"],
            "repository": "corp/detections",
            "file_path": "azure/signin_burst.kql"
        })
    }

    #[test]
    fn parses_and_canonicalizes() {
        let record = parse_detection_record(&sample_doc()).unwrap();
        assert_eq!(record.detection_id, "det-0001");
        assert_eq!(record.mitre_tactics, vec!["TA0006"]);
        assert_eq!(record.mitre_techniques, vec!["T1110"]);
        assert_eq!(record.language, "kql");
    }

    #[test]
    fn missing_required_field_is_rejected() {
        let mut doc = sample_doc();
        doc.as_object_mut().unwrap().remove("platform");
        assert_eq!(
            parse_detection_record(&doc),
            Err(CorpusError::MissingField("platform"))
        );
        let mut doc = sample_doc();
        doc["original_content"] = json!("   ");
        assert_eq!(
            parse_detection_record(&doc),
            Err(CorpusError::MissingField("original_content"))
        );
    }

    #[test]
    fn tactic_in_technique_list_is_rejected() {
        let mut doc = sample_doc();
        doc["mitre_techniques"] = json!(["TA0006"]);
        assert!(matches!(
            parse_detection_record(&doc),
            Err(CorpusError::InvalidMitreId(_))
        ));
    }

    #[test]
    fn non_object_input_is_rejected() {
        assert!(matches!(
            parse_detection_record(&json!([1, 2])),
            Err(CorpusError::InvalidDocument(_))
        ));
    }

    #[test]
    fn normalize_classifies_kinds() {
        assert_eq!(
            normalize_mitre_id(" t1059 ").unwrap(),
            MitreId {
                kind: MitreKind::Technique,
                canonical: "T1059".to_string()
            }
        );
        assert_eq!(
            normalize_mitre_id("t1059.001").unwrap().kind,
            MitreKind::SubTechnique
        );
        assert_eq!(
            normalize_mitre_id("TA0001").unwrap().kind,
            MitreKind::Tactic
        );
        assert_eq!(normalize_mitre_id("t1059.001").unwrap().parent(), "T1059");
        assert!(normalize_mitre_id("T123").is_err());
        assert!(normalize_mitre_id("T1059.1").is_err());
        assert!(normalize_mitre_id("TA12345").is_err());
        assert!(normalize_mitre_id("").is_err());
    }

    #[test]
    fn identifier_matching_respects_boundaries() {
        assert!(contains_identifier("SigninLogs | take 5", "SigninLogs"));
        assert!(!contains_identifier(
            "MySigninLogsView | take 5",
            "SigninLogs"
        ));
        assert!(!contains_identifier("SigninLogs2 | take 5", "SigninLogs"));
        assert!(contains_identifier("(SigninLogs)", "SigninLogs"));
        assert!(!contains_identifier("anything", ""));
    }

    fn sample_schemas() -> Vec<TelemetryTableSchema> {
        parse_schema_documents(&json!([{
            "platform": "azure",
            "tables": [
                {
                    "table_name": "SigninLogs",
                    "fields": [
                        {"field_name": "ResultType", "semantic_type": "int"},
                        {"field_name": "UserPrincipalName", "semantic_type": "string"}
                    ],
                    "supported_actions": ["signin"]
                },
                {
                    "table_name": "AuditLogs",
                    "fields": [{"field_name": "OperationName", "semantic_type": "string"}],
                    "supported_actions": ["audit"]
                }
            ]
        }]))
        .unwrap()
    }

    #[test]
    fn schema_parsing_validates() {
        assert_eq!(sample_schemas().len(), 2);
        let empty_fields = json!({
            "platform": "azure",
            "tables": [{"table_name": "X", "fields": [], "supported_actions": []}]
        });
        assert!(matches!(
            parse_schema_documents(&empty_fields),
            Err(CorpusError::InvalidSchema(_))
        ));
        let duplicate = json!({
            "platform": "azure",
            "tables": [
                {"table_name": "X", "fields": [{"field_name": "a", "semantic_type": "t"}]},
                {"table_name": "X", "fields": [{"field_name": "b", "semantic_type": "t"}]}
            ]
        });
        assert!(matches!(
            parse_schema_documents(&duplicate),
            Err(CorpusError::InvalidSchema(_))
        ));
    }

    #[test]
    fn inference_backfills_and_is_idempotent() {
        let mut record = parse_detection_record(&sample_doc()).unwrap();
        record.mitre_techniques.clear();
        record.data_sources.clear();
        let schemas = sample_schemas();
        infer_missing_metadata(&mut record, &schemas);
        assert_eq!(record.mitre_techniques, vec!["T1110"]);
        assert_eq!(record.data_sources, vec!["SigninLogs"]);
        let snapshot = record.clone();
        infer_missing_metadata(&mut record, &schemas);
        assert_eq!(record, snapshot);
    }

    #[test]
    fn inference_never_removes_existing_entries() {
        let mut record = parse_detection_record(&sample_doc()).unwrap();
        record.mitre_techniques = vec!["T9999".to_string()];
        record.data_sources = vec!["CustomFeed".to_string()];
        infer_missing_metadata(&mut record, &sample_schemas());
        assert!(record.mitre_techniques.contains(&"T9999".to_string()));
        assert!(record.mitre_techniques.contains(&"T1110".to_string()));
        assert!(record.data_sources.contains(&"CustomFeed".to_string()));
        assert!(record.data_sources.contains(&"SigninLogs".to_string()));
    }

    #[test]
    fn embedding_text_joins_fields() {
        let record = parse_detection_record(&sample_doc()).unwrap();
        let text = embedding_text(&record);
        assert!(text.starts_with("Suspicious sign-in burst\n"));
        assert!(text.contains("\nFlags bursts"));
        assert!(text.ends_with("UserPrincipalName"));
    }
}
