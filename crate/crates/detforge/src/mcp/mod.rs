//! Model Context Protocol server: newline-delimited JSON-RPC 2.0 over
//! stdio, exposing the knowledge store through ten tools and two
//! prompt templates.

pub mod rpc;
pub mod tools;

use std::io::{BufRead, Write};

use serde_json::{json, Value};

use crate::gateway::{EmbedConfig, EmbedProvider};
use crate::store::KnowledgeStore;

use rpc::{
    classify, error_response, success_response, Incoming, INVALID_PARAMS, METHOD_NOT_FOUND,
    PARSE_ERROR,
};
pub use tools::{
    tool_descriptors, tool_descriptors_for, tools_manifest, ToolError, ToolExecutor,
    SCHEMA_TOOL_NAMES,
};

pub const PROTOCOL_VERSION: &str = "2024-11-05";
pub const SERVER_NAME: &str = "detforge-mcp";

const STYLE_GUIDE_PROMPT: &str = "platform_style_guide";
const SKELETON_PROMPT: &str = "detection_skeleton";
const STYLE_GUIDE_TEMPLATE: &str = include_str!("../templates/mcp_style_guide_v1.txt");
const SKELETON_TEMPLATE: &str = include_str!("../templates/mcp_detection_skeleton_v1.txt");

/// Serves one knowledge store over JSON-RPC, one message per line.
pub struct McpServer<'a> {
    executor: ToolExecutor<'a>,
}

impl<'a> McpServer<'a> {
    pub fn new(
        store: &'a KnowledgeStore,
        embedder: &'a dyn EmbedProvider,
        embed_config: EmbedConfig,
    ) -> Self {
        Self {
            executor: ToolExecutor::new(store, embedder, embed_config),
        }
    }

    /// Handle one raw input line. Blank lines and notifications produce
    /// no response.
    pub fn handle_line(&self, line: &str) -> Option<Value> {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            return None;
        }
        match serde_json::from_str::<Value>(trimmed) {
            Ok(value) => self.handle_value(&value),
            Err(e) => Some(error_response(
                &Value::Null,
                PARSE_ERROR,
                &format!("parse error: {e}"),
            )),
        }
    }

    /// Handle one decoded message.
    pub fn handle_value(&self, value: &Value) -> Option<Value> {
        match classify(value) {
            Err(response) => Some(response),
            Ok(Incoming::Notification { .. }) => None,
            Ok(Incoming::Request { id, method, params }) => {
                Some(self.dispatch(&id, &method, &params))
            }
        }
    }

    fn dispatch(&self, id: &Value, method: &str, params: &Value) -> Value {
        match method {
            "initialize" => success_response(
                id,
                json!({
                    "protocolVersion": PROTOCOL_VERSION,
                    "capabilities": {"tools": {}},
                    "serverInfo": {
                        "name": SERVER_NAME,
                        "version": env!("CARGO_PKG_VERSION"),
                    },
                }),
            ),
            "tools/list" => success_response(id, json!({"tools": tool_descriptors()})),
            "tools/call" => self.call_tool(id, params),
            "prompts/list" => success_response(
                id,
                json!({
                    "prompts": [
                        {
                            "name": STYLE_GUIDE_PROMPT,
                            "description": "Authoring style notes for one platform.",
                            "arguments": [
                                {"name": "platform", "description": "Platform name.", "required": true},
                            ],
                        },
                        {
                            "name": SKELETON_PROMPT,
                            "description": "Empty detection scaffold for one platform.",
                            "arguments": [
                                {"name": "platform", "description": "Platform name.", "required": true},
                            ],
                        },
                    ],
                }),
            ),
            "prompts/get" => self.get_prompt(id, params),
            _ => error_response(id, METHOD_NOT_FOUND, &format!("unknown method: {method}")),
        }
    }

    fn call_tool(&self, id: &Value, params: &Value) -> Value {
        let Some(name) = params.get("name").and_then(Value::as_str) else {
            return error_response(id, INVALID_PARAMS, "tools/call requires a string name");
        };
        let arguments = params.get("arguments").cloned().unwrap_or(Value::Null);
        match self.executor.execute(name, &arguments) {
            Ok(result) => success_response(
                id,
                json!({
                    "content": [{"type": "text", "text": result.to_string()}],
                    "isError": false,
                }),
            ),
            Err(ToolError::Failed(message)) => success_response(
                id,
                json!({
                    "content": [{"type": "text", "text": format!("error: {message}")}],
                    "isError": true,
                }),
            ),
            Err(e @ (ToolError::InvalidParams(_) | ToolError::UnknownTool(_))) => {
                error_response(id, INVALID_PARAMS, &e.to_string())
            }
        }
    }

    fn get_prompt(&self, id: &Value, params: &Value) -> Value {
        let Some(name) = params.get("name").and_then(Value::as_str) else {
            return error_response(id, INVALID_PARAMS, "prompts/get requires a string name");
        };
        let Some(platform) = params
            .get("arguments")
            .and_then(|a| a.get("platform"))
            .and_then(Value::as_str)
        else {
            return error_response(id, INVALID_PARAMS, "missing required argument: platform");
        };
        let (description, template) = match name {
            STYLE_GUIDE_PROMPT => (
                "Authoring style notes for one platform.",
                STYLE_GUIDE_TEMPLATE,
            ),
            SKELETON_PROMPT => (
                "Empty detection scaffold for one platform.",
                SKELETON_TEMPLATE,
            ),
            other => {
                return error_response(id, INVALID_PARAMS, &format!("unknown prompt: {other}"));
            }
        };
        let text = template.replace("{{platform}}", platform);
        success_response(
            id,
            json!({
                "description": description,
                "messages": [
                    {"role": "user", "content": {"type": "text", "text": text}},
                ],
            }),
        )
    }
}

/// Run the serial request loop until the reader is exhausted.
pub fn serve<R: BufRead, W: Write>(
    store: &KnowledgeStore,
    embedder: &dyn EmbedProvider,
    embed_config: EmbedConfig,
    reader: R,
    mut writer: W,
) -> std::io::Result<()> {
    let server = McpServer::new(store, embedder, embed_config);
    for line in reader.lines() {
        let line = line?;
        if let Some(response) = server.handle_line(&line) {
            writeln!(writer, "{response}")?;
            writer.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_detection_record;
    use crate::gateway::ScriptedEmbedder;

    const DIMENSION: usize = 24;

    fn embed_config() -> EmbedConfig {
        EmbedConfig {
            model_id: "hash-embed".to_string(),
            dimension: DIMENSION,
        }
    }

    fn fixture_store() -> KnowledgeStore {
        let embedder = ScriptedEmbedder;
        let config = embed_config();
        let mut store = KnowledgeStore::new(DIMENSION);
        for i in 1..=3 {
            let record = parse_detection_record(&json!({
                "detection_id": format!("det-{i:03}"),
                "name": format!("rule {i}"),
                "description": "suspicious process launch",
                "original_content": format!("DeviceProcessEvents | where pid == {i}"),
                "platform": "xdr",
                "language": "kql",
                "mitre_techniques": ["T1059"],
            }))
            .unwrap();
            let text = crate::corpus::embedding_text(&record);
            let vector = embedder.embed(&text, &config).unwrap();
            store.upsert(record, vector).unwrap();
        }
        store
    }

    fn request(server: &McpServer<'_>, body: Value) -> Value {
        server.handle_value(&body).expect("expected a response")
    }

    #[test]
    fn initialize_advertises_tools_only() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let response = request(
            &server,
            json!({"jsonrpc": "2.0", "id": 1, "method": "initialize"}),
        );
        assert_eq!(response["id"], 1);
        let result = &response["result"];
        assert_eq!(result["protocolVersion"], PROTOCOL_VERSION);
        assert_eq!(result["capabilities"], json!({"tools": {}}));
        assert_eq!(result["serverInfo"]["name"], SERVER_NAME);
        assert!(result["serverInfo"]["version"].is_string());
    }

    #[test]
    fn tools_list_returns_ten_in_order() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let response = request(
            &server,
            json!({"jsonrpc": "2.0", "id": "list", "method": "tools/list"}),
        );
        let names: Vec<&str> = response["result"]["tools"]
            .as_array()
            .unwrap()
            .iter()
            .map(|t| t["name"].as_str().unwrap())
            .collect();
        assert_eq!(
            names,
            vec![
                "semantic_search",
                "search_by_mitre",
                "search_by_platform",
                "get_content",
                "get_telemetry_fields",
                "get_supported_actions",
                "get_actions_and_tables",
                "get_best_table",
                "get_similar",
                "get_details",
            ]
        );
    }

    #[test]
    fn tool_call_round_trip() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let response = request(
            &server,
            json!({
                "jsonrpc": "2.0",
                "id": 9,
                "method": "tools/call",
                "params": {"name": "get_content", "arguments": {"detection_id": "det-001"}},
            }),
        );
        assert_eq!(response["id"], 9);
        assert_eq!(response["result"]["isError"], false);
        let text = response["result"]["content"][0]["text"].as_str().unwrap();
        let payload: Value = serde_json::from_str(text).unwrap();
        assert_eq!(payload["detection_id"], "det-001");
        assert!(payload["original_content"]
            .as_str()
            .unwrap()
            .contains("pid == 1"));
    }

    #[test]
    fn failed_tools_report_in_band() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let response = request(
            &server,
            json!({
                "jsonrpc": "2.0",
                "id": 2,
                "method": "tools/call",
                "params": {"name": "get_content", "arguments": {"detection_id": "missing"}},
            }),
        );
        assert_eq!(response["result"]["isError"], true);
        let text = response["result"]["content"][0]["text"].as_str().unwrap();
        assert!(text.starts_with("error: "));
        assert!(response.get("error").is_none());
    }

    #[test]
    fn structural_problems_are_rpc_errors() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let bad_params = request(
            &server,
            json!({
                "jsonrpc": "2.0",
                "id": 3,
                "method": "tools/call",
                "params": {"name": "semantic_search", "arguments": {"bogus": true}},
            }),
        );
        assert_eq!(bad_params["error"]["code"], INVALID_PARAMS);

        let unknown_tool = request(
            &server,
            json!({
                "jsonrpc": "2.0",
                "id": 4,
                "method": "tools/call",
                "params": {"name": "tools_destroy"},
            }),
        );
        assert_eq!(unknown_tool["error"]["code"], INVALID_PARAMS);

        let no_name = request(
            &server,
            json!({"jsonrpc": "2.0", "id": 5, "method": "tools/call", "params": {}}),
        );
        assert_eq!(no_name["error"]["code"], INVALID_PARAMS);
    }

    #[test]
    fn unknown_methods_are_not_found() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let response = request(
            &server,
            json!({"jsonrpc": "2.0", "id": 6, "method": "tools/destroy"}),
        );
        assert_eq!(response["error"]["code"], METHOD_NOT_FOUND);
        assert_eq!(response["id"], 6);
    }

    #[test]
    fn malformed_lines_yield_parse_errors() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let response = server.handle_line("{not json").unwrap();
        assert_eq!(response["error"]["code"], PARSE_ERROR);
        assert_eq!(response["id"], Value::Null);
        assert!(server.handle_line("   ").is_none());
    }

    #[test]
    fn notifications_are_silent() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let none = server.handle_value(&json!({
            "jsonrpc": "2.0",
            "method": "notifications/initialized",
        }));
        assert!(none.is_none());
    }

    #[test]
    fn request_ids_echo_across_types() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        for id in [
            json!(0),
            json!(-7),
            json!("weird id"),
            json!(null),
            json!(3.5),
        ] {
            let response = request(
                &server,
                json!({"jsonrpc": "2.0", "id": id, "method": "tools/list"}),
            );
            assert_eq!(response["id"], id);
        }
    }

    #[test]
    fn responses_are_byte_stable() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let body = json!({
            "jsonrpc": "2.0",
            "id": 11,
            "method": "tools/call",
            "params": {"name": "semantic_search", "arguments": {"query_text": "process launch", "k": 2}},
        });
        let first = request(&server, body.clone()).to_string();
        let second = request(&server, body).to_string();
        assert_eq!(first, second);
    }

    #[test]
    fn prompt_surface_lists_and_renders() {
        let store = fixture_store();
        let server = McpServer::new(&store, &ScriptedEmbedder, embed_config());
        let listing = request(
            &server,
            json!({"jsonrpc": "2.0", "id": 20, "method": "prompts/list"}),
        );
        let prompts = listing["result"]["prompts"].as_array().unwrap();
        assert_eq!(prompts.len(), 2);
        assert_eq!(prompts[0]["name"], STYLE_GUIDE_PROMPT);
        assert_eq!(prompts[1]["name"], SKELETON_PROMPT);

        let rendered = request(
            &server,
            json!({
                "jsonrpc": "2.0",
                "id": 21,
                "method": "prompts/get",
                "params": {"name": "detection_skeleton", "arguments": {"platform": "xdr"}},
            }),
        );
        let text = rendered["result"]["messages"][0]["content"]["text"]
            .as_str()
            .unwrap();
        assert!(text.contains("xdr"));
        assert!(!text.contains("{{platform}}"));

        let unknown = request(
            &server,
            json!({
                "jsonrpc": "2.0",
                "id": 22,
                "method": "prompts/get",
                "params": {"name": "nope", "arguments": {"platform": "xdr"}},
            }),
        );
        assert_eq!(unknown["error"]["code"], INVALID_PARAMS);

        let no_platform = request(
            &server,
            json!({
                "jsonrpc": "2.0",
                "id": 23,
                "method": "prompts/get",
                "params": {"name": "detection_skeleton"},
            }),
        );
        assert_eq!(no_platform["error"]["code"], INVALID_PARAMS);
    }

    #[test]
    fn serve_loop_writes_one_line_per_request() {
        let store = fixture_store();
        let input = concat!(
            "{\"jsonrpc\":\"2.0\",\"id\":1,\"method\":\"initialize\"}\n",
            "\n",
            "{\"jsonrpc\":\"2.0\",\"method\":\"notifications/initialized\"}\n",
            "{\"jsonrpc\":\"2.0\",\"id\":2,\"method\":\"tools/list\"}\n",
        );
        let mut output = Vec::new();
        serve(
            &store,
            &ScriptedEmbedder,
            embed_config(),
            input.as_bytes(),
            &mut output,
        )
        .unwrap();
        let text = String::from_utf8(output).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        let first: Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["id"], 1);
        let second: Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(second["id"], 2);
        assert_eq!(second["result"]["tools"].as_array().unwrap().len(), 10);
    }
}
