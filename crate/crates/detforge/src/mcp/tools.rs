//! The ten knowledge-store tools: parameter validation, dispatch, and
//! the descriptors advertised to clients.

use std::collections::{BTreeMap, BTreeSet};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::corpus::DetectionRecord;
use crate::gateway::{EmbedConfig, EmbedProvider, ToolDescriptor};
use crate::store::{KnowledgeStore, SearchFilters};

/// Tool names whose results come from telemetry table schemas. These
/// are withheld on platforms without schema coverage.
pub const SCHEMA_TOOL_NAMES: [&str; 4] = [
    "get_telemetry_fields",
    "get_supported_actions",
    "get_actions_and_tables",
    "get_best_table",
];

#[derive(Debug, Error)]
pub enum ToolError {
    /// Structural problem with the arguments; maps to JSON-RPC -32602.
    #[error("invalid params: {0}")]
    InvalidParams(String),
    /// No tool with this name; maps to JSON-RPC -32602.
    #[error("unknown tool: {0}")]
    UnknownTool(String),
    /// The tool ran and failed; reported in-band with isError set.
    #[error("{0}")]
    Failed(String),
}

fn parse_params<T: DeserializeOwned>(arguments: &Value) -> Result<T, ToolError> {
    let value = match arguments {
        Value::Null => Value::Object(Map::new()),
        other => other.clone(),
    };
    serde_json::from_value(value).map_err(|e| ToolError::InvalidParams(e.to_string()))
}

fn require_positive_k(k: usize) -> Result<(), ToolError> {
    if k == 0 {
        return Err(ToolError::InvalidParams("k must be at least 1".to_string()));
    }
    Ok(())
}

fn default_k() -> usize {
    10
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SemanticSearchParams {
    query_text: String,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    platform: Option<String>,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    technique: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MitreParams {
    mitre_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformParams {
    platform: String,
    #[serde(default)]
    language: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionIdParams {
    detection_id: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableParams {
    platform: String,
    table: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformOnlyParams {
    platform: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionParams {
    platform: String,
    action: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimilarParams {
    detection_id: String,
    #[serde(default = "default_k")]
    k: usize,
}

fn record_summary(record: &DetectionRecord) -> Value {
    json!({
        "detection_id": record.detection_id,
        "name": record.name,
        "platform": record.platform,
        "language": record.language,
        "mitre_tactics": record.mitre_tactics,
        "mitre_techniques": record.mitre_techniques,
    })
}

/// Executes tool calls against a knowledge store, embedding queries
/// through the configured provider.
pub struct ToolExecutor<'a> {
    store: &'a KnowledgeStore,
    embedder: &'a dyn EmbedProvider,
    embed_config: EmbedConfig,
}

impl<'a> ToolExecutor<'a> {
    pub fn new(
        store: &'a KnowledgeStore,
        embedder: &'a dyn EmbedProvider,
        embed_config: EmbedConfig,
    ) -> Self {
        Self {
            store,
            embedder,
            embed_config,
        }
    }

    pub fn store(&self) -> &KnowledgeStore {
        self.store
    }

    /// Dispatch one named tool call.
    pub fn execute(&self, name: &str, arguments: &Value) -> Result<Value, ToolError> {
        match name {
            "semantic_search" => self.semantic_search(arguments),
            "search_by_mitre" => self.search_by_mitre(arguments),
            "search_by_platform" => self.search_by_platform(arguments),
            "get_content" => self.get_content(arguments),
            "get_telemetry_fields" => self.get_telemetry_fields(arguments),
            "get_supported_actions" => self.get_supported_actions(arguments),
            "get_actions_and_tables" => self.get_actions_and_tables(arguments),
            "get_best_table" => self.get_best_table(arguments),
            "get_similar" => self.get_similar(arguments),
            "get_details" => self.get_details(arguments),
            other => Err(ToolError::UnknownTool(other.to_string())),
        }
    }

    fn semantic_search(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: SemanticSearchParams = parse_params(arguments)?;
        if params.query_text.trim().is_empty() {
            return Err(ToolError::InvalidParams(
                "query_text must be non-empty".to_string(),
            ));
        }
        require_positive_k(params.k)?;
        let query = self
            .embedder
            .embed(&params.query_text, &self.embed_config)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        let filters = SearchFilters {
            platform: params.platform,
            language: params.language,
            technique: params.technique,
        };
        let hits = self
            .store
            .top_k_by_cosine(&query, params.k, &filters)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(json!({ "hits": hits }))
    }

    fn search_by_mitre(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: MitreParams = parse_params(arguments)?;
        let records = self
            .store
            .query_by_mitre(&params.mitre_id)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        let matches: Vec<Value> = records.iter().map(|r| record_summary(r)).collect();
        Ok(json!({ "matches": matches }))
    }

    fn search_by_platform(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: PlatformParams = parse_params(arguments)?;
        let records = self
            .store
            .query_by_platform(&params.platform, params.language.as_deref());
        let matches: Vec<Value> = records.iter().map(|r| record_summary(r)).collect();
        Ok(json!({ "matches": matches }))
    }

    fn get_content(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: DetectionIdParams = parse_params(arguments)?;
        let entry = self
            .store
            .get_visible(&params.detection_id)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(json!({
            "detection_id": entry.record.detection_id,
            "name": entry.record.name,
            "platform": entry.record.platform,
            "language": entry.record.language,
            "original_content": entry.record.original_content,
        }))
    }

    fn get_details(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: DetectionIdParams = parse_params(arguments)?;
        let entry = self
            .store
            .get_visible(&params.detection_id)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(json!({
            "detection_id": entry.record.detection_id,
            "name": entry.record.name,
            "description": entry.record.description,
            "platform": entry.record.platform,
            "language": entry.record.language,
            "mitre_tactics": entry.record.mitre_tactics,
            "mitre_techniques": entry.record.mitre_techniques,
            "data_sources": entry.record.data_sources,
            "repository": entry.record.repository,
            "file_path": entry.record.file_path,
        }))
    }

    fn get_telemetry_fields(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: TableParams = parse_params(arguments)?;
        let schema = self
            .store
            .table_schema(&params.platform, &params.table)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(json!({
            "platform": schema.platform,
            "table": schema.table_name,
            "fields": schema.fields,
        }))
    }

    fn get_supported_actions(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: TableParams = parse_params(arguments)?;
        let schema = self
            .store
            .table_schema(&params.platform, &params.table)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(json!({
            "platform": schema.platform,
            "table": schema.table_name,
            "supported_actions": schema.supported_actions,
        }))
    }

    fn get_actions_and_tables(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: PlatformOnlyParams = parse_params(arguments)?;
        let tables = self
            .store
            .platform_tables(&params.platform)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        let mut by_action: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for schema in &tables {
            for action in &schema.supported_actions {
                by_action
                    .entry(action.as_str())
                    .or_default()
                    .insert(schema.table_name.as_str());
            }
        }
        let actions: Vec<Value> = by_action
            .iter()
            .map(|(action, tables)| {
                json!({
                    "action": action,
                    "tables": tables.iter().collect::<Vec<_>>(),
                })
            })
            .collect();
        Ok(json!({
            "platform": params.platform,
            "actions": actions,
        }))
    }

    fn get_best_table(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: ActionParams = parse_params(arguments)?;
        let table = self
            .store
            .best_table_for_action(&params.platform, &params.action)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(json!({
            "platform": params.platform,
            "action": params.action,
            "table": table,
        }))
    }

    fn get_similar(&self, arguments: &Value) -> Result<Value, ToolError> {
        let params: SimilarParams = parse_params(arguments)?;
        require_positive_k(params.k)?;
        let hits = self
            .store
            .similar_to(&params.detection_id, params.k)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(json!({ "hits": hits }))
    }
}

fn object_schema(properties: Value, required: &[&str]) -> Value {
    json!({
        "type": "object",
        "properties": properties,
        "required": required,
        "additionalProperties": false,
    })
}

fn descriptor(name: &str, description: &str, input_schema: Value) -> ToolDescriptor {
    ToolDescriptor {
        name: name.to_string(),
        description: description.to_string(),
        input_schema,
    }
}

/// All ten tool descriptors in their advertised order.
pub fn tool_descriptors() -> Vec<ToolDescriptor> {
    vec![
        descriptor(
            "semantic_search",
            "Rank stored detections by embedding similarity to a query text, optionally filtered by platform, language, or technique.",
            object_schema(
                json!({
                    "query_text": {"type": "string", "description": "Text to embed and search with."},
                    "k": {"type": "integer", "minimum": 1, "default": 10, "description": "Number of hits to return."},
                    "platform": {"type": "string", "description": "Restrict hits to this platform."},
                    "language": {"type": "string", "description": "Restrict hits to this query language."},
                    "technique": {"type": "string", "description": "Restrict hits to this ATT&CK technique id."},
                }),
                &["query_text"],
            ),
        ),
        descriptor(
            "search_by_mitre",
            "Look up detections mapped to an ATT&CK tactic or technique id.",
            object_schema(
                json!({
                    "mitre_id": {"type": "string", "description": "Tactic (TAxxxx) or technique (Txxxx or Txxxx.yyy) id."},
                }),
                &["mitre_id"],
            ),
        ),
        descriptor(
            "search_by_platform",
            "List detections for a platform, optionally narrowed to one query language.",
            object_schema(
                json!({
                    "platform": {"type": "string", "description": "Platform name."},
                    "language": {"type": "string", "description": "Query language name."},
                }),
                &["platform"],
            ),
        ),
        descriptor(
            "get_content",
            "Fetch a detection's source text and identifying metadata by id.",
            object_schema(
                json!({
                    "detection_id": {"type": "string", "description": "Detection id."},
                }),
                &["detection_id"],
            ),
        ),
        descriptor(
            "get_telemetry_fields",
            "List the fields of one telemetry table on a platform.",
            object_schema(
                json!({
                    "platform": {"type": "string", "description": "Platform name."},
                    "table": {"type": "string", "description": "Telemetry table name."},
                }),
                &["platform", "table"],
            ),
        ),
        descriptor(
            "get_supported_actions",
            "List the detection actions a telemetry table supports.",
            object_schema(
                json!({
                    "platform": {"type": "string", "description": "Platform name."},
                    "table": {"type": "string", "description": "Telemetry table name."},
                }),
                &["platform", "table"],
            ),
        ),
        descriptor(
            "get_actions_and_tables",
            "Map every detection action on a platform to the tables supporting it.",
            object_schema(
                json!({
                    "platform": {"type": "string", "description": "Platform name."},
                }),
                &["platform"],
            ),
        ),
        descriptor(
            "get_best_table",
            "Recommend the telemetry table best suited to a detection action on a platform.",
            object_schema(
                json!({
                    "platform": {"type": "string", "description": "Platform name."},
                    "action": {"type": "string", "description": "Detection action name."},
                }),
                &["platform", "action"],
            ),
        ),
        descriptor(
            "get_similar",
            "Find the detections nearest to a stored detection by embedding similarity.",
            object_schema(
                json!({
                    "detection_id": {"type": "string", "description": "Seed detection id."},
                    "k": {"type": "integer", "minimum": 1, "default": 10, "description": "Number of neighbours to return."},
                }),
                &["detection_id"],
            ),
        ),
        descriptor(
            "get_details",
            "Fetch a detection's extended metadata, ATT&CK mappings, and lineage by id.",
            object_schema(
                json!({
                    "detection_id": {"type": "string", "description": "Detection id."},
                }),
                &["detection_id"],
            ),
        ),
    ]
}

/// Descriptors offered to a generation agent. Platforms without
/// telemetry schema coverage drop the four schema-backed tools.
pub fn tool_descriptors_for(schema_enabled: bool) -> Vec<ToolDescriptor> {
    let mut descriptors = tool_descriptors();
    if !schema_enabled {
        descriptors.retain(|d| !SCHEMA_TOOL_NAMES.contains(&d.name.as_str()));
    }
    descriptors
}

/// The `tools.json` document describing the full tool surface.
pub fn tools_manifest() -> Value {
    json!({ "tools": tool_descriptors() })
}
