//! JSON-RPC 2.0 envelope handling for the stdio server.

use serde_json::{json, Map, Value};

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;

/// A structurally valid incoming message.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Incoming {
    /// Carries an id and expects a response.
    Request {
        id: Value,
        method: String,
        params: Value,
    },
    /// No id; never answered.
    Notification { method: String, params: Value },
}

pub fn success_response(id: &Value, result: Value) -> Value {
    json!({
        "jsonrpc": "2.0",
        "id": id,
        "result": result,
    })
}

pub fn error_response(id: &Value, code: i64, message: &str) -> Value {
    json!({
        "jsonrpc": "2.0",
        "id": id,
        "error": {
            "code": code,
            "message": message,
        },
    })
}

/// Best-effort id for error responses to malformed envelopes.
fn salvage_id(envelope: &Map<String, Value>) -> Value {
    match envelope.get("id") {
        Some(id @ (Value::String(_) | Value::Number(_) | Value::Null)) => id.clone(),
        _ => Value::Null,
    }
}

/// Classify a decoded message, or produce the complete error response
/// for a malformed envelope.
pub(crate) fn classify(value: &Value) -> Result<Incoming, Value> {
    let Some(envelope) = value.as_object() else {
        return Err(error_response(
            &Value::Null,
            INVALID_REQUEST,
            "request must be a JSON object",
        ));
    };
    let id = salvage_id(envelope);
    if envelope.get("jsonrpc").and_then(Value::as_str) != Some("2.0") {
        return Err(error_response(
            &id,
            INVALID_REQUEST,
            "jsonrpc must be the string \"2.0\"",
        ));
    }
    let Some(method) = envelope.get("method").and_then(Value::as_str) else {
        return Err(error_response(
            &id,
            INVALID_REQUEST,
            "method must be a string",
        ));
    };
    let params = envelope.get("params").cloned().unwrap_or(Value::Null);
    match envelope.get("id") {
        None => Ok(Incoming::Notification {
            method: method.to_string(),
            params,
        }),
        Some(id) => Ok(Incoming::Request {
            id: id.clone(),
            method: method.to_string(),
            params,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn success_and_error_envelopes() {
        let ok = success_response(&json!(7), json!({"x": 1}));
        assert_eq!(ok, json!({"jsonrpc": "2.0", "id": 7, "result": {"x": 1}}));
        let err = error_response(&json!("abc"), METHOD_NOT_FOUND, "no such method");
        assert_eq!(
            err,
            json!({
                "jsonrpc": "2.0",
                "id": "abc",
                "error": {"code": -32601, "message": "no such method"},
            })
        );
    }

    #[test]
    fn classifies_requests_and_notifications() {
        let request = json!({"jsonrpc": "2.0", "id": 3, "method": "tools/list"});
        assert_eq!(
            classify(&request).unwrap(),
            Incoming::Request {
                id: json!(3),
                method: "tools/list".to_string(),
                params: Value::Null,
            }
        );
        let notification = json!({"jsonrpc": "2.0", "method": "notifications/initialized"});
        assert_eq!(
            classify(&notification).unwrap(),
            Incoming::Notification {
                method: "notifications/initialized".to_string(),
                params: Value::Null,
            }
        );
    }

    #[test]
    fn params_pass_through_verbatim() {
        let request = json!({
            "jsonrpc": "2.0",
            "id": "r1",
            "method": "tools/call",
            "params": {"name": "get_content", "arguments": {"detection_id": "d1"}},
        });
        let Incoming::Request { params, .. } = classify(&request).unwrap() else {
            panic!("expected request");
        };
        assert_eq!(params["name"], "get_content");
    }

    #[test]
    fn rejects_malformed_envelopes() {
        let by_array = classify(&json!([1, 2, 3])).unwrap_err();
        assert_eq!(by_array["error"]["code"], INVALID_REQUEST);
        assert_eq!(by_array["id"], Value::Null);

        let wrong_version =
            classify(&json!({"jsonrpc": "1.0", "id": 5, "method": "x"})).unwrap_err();
        assert_eq!(wrong_version["error"]["code"], INVALID_REQUEST);
        assert_eq!(wrong_version["id"], 5);

        let no_method = classify(&json!({"jsonrpc": "2.0", "id": 5})).unwrap_err();
        assert_eq!(no_method["error"]["code"], INVALID_REQUEST);

        let method_not_string =
            classify(&json!({"jsonrpc": "2.0", "id": 5, "method": 9})).unwrap_err();
        assert_eq!(method_not_string["error"]["code"], INVALID_REQUEST);
    }

    #[test]
    fn null_id_is_echoed_not_dropped() {
        let request = json!({"jsonrpc": "2.0", "id": null, "method": "tools/list"});
        match classify(&request).unwrap() {
            Incoming::Request { id, .. } => assert_eq!(id, Value::Null),
            other => panic!("expected request, got {other:?}"),
        }
    }

    #[test]
    fn error_for_object_id_falls_back_to_null() {
        let bad = classify(&json!({"jsonrpc": "bad", "id": {"k": 1}, "method": "x"})).unwrap_err();
        assert_eq!(bad["id"], Value::Null);
    }
}
