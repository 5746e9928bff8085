//! Structural validation of emitted run reports against the schema shipped
//! in docs/. The checker covers the subset of JSON Schema the document
//! uses: type, required, properties, items, additionalProperties.

use serde_json::Value;

use oocsim::scenario::Scenario;
use oocsim::sim::run_closed_loop;

fn validate(schema: &Value, instance: &Value, path: &str, errors: &mut Vec<String>) {
    if let Some(ty) = schema.get("type").and_then(Value::as_str) {
        let ok = match ty {
            "object" => instance.is_object(),
            "array" => instance.is_array(),
            "number" => instance.is_number(),
            "integer" => instance.is_i64() || instance.is_u64(),
            "boolean" => instance.is_boolean(),
            "string" => instance.is_string(),
            other => {
                errors.push(format!("{path}: unsupported schema type {other}"));
                return;
            }
        };
        if !ok {
            errors.push(format!("{path}: expected {ty}, got {instance}"));
            return;
        }
    }
    if let Some(required) = schema.get("required").and_then(Value::as_array) {
        for key in required.iter().filter_map(Value::as_str) {
            if instance.get(key).is_none() {
                errors.push(format!("{path}: missing required field {key:?}"));
            }
        }
    }
    if let Some(props) = schema.get("properties").and_then(Value::as_object) {
        if let Some(obj) = instance.as_object() {
            for (key, sub) in props {
                if let Some(v) = obj.get(key) {
                    validate(sub, v, &format!("{path}.{key}"), errors);
                }
            }
            if schema.get("additionalProperties") == Some(&Value::Bool(false)) {
                for key in obj.keys() {
                    if !props.contains_key(key) {
                        errors.push(format!("{path}: unexpected field {key:?}"));
                    }
                }
            }
        }
    }
    if let Some(items) = schema.get("items") {
        if let Some(arr) = instance.as_array() {
            for (i, v) in arr.iter().enumerate() {
                validate(items, v, &format!("{path}[{i}]"), errors);
            }
        }
    }
    if let Some(min) = schema.get("minimum").and_then(Value::as_f64) {
        if let Some(v) = instance.as_f64() {
            if v < min {
                errors.push(format!("{path}: {v} below minimum {min}"));
            }
        }
    }
}

#[test]
fn emitted_report_matches_shipped_schema() {
    let schema: Value = serde_json::from_str(
        &std::fs::read_to_string(
            std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json"),
        )
        .unwrap(),
    )
    .unwrap();

    let sc = Scenario::load(
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/example2.json"),
    )
    .unwrap();
    let (_, report) = run_closed_loop(&sc, 0).unwrap();
    let instance = serde_json::to_value(&report).unwrap();

    let mut errors = Vec::new();
    validate(&schema, &instance, "$", &mut errors);
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

#[test]
fn schema_checker_catches_violations() {
    let schema: Value = serde_json::json!({
        "type": "object",
        "required": ["a"],
        "properties": {"a": {"type": "number"}},
        "additionalProperties": false
    });
    let mut errors = Vec::new();
    validate(&schema, &serde_json::json!({"b": true}), "$", &mut errors);
    assert_eq!(errors.len(), 2);
}
