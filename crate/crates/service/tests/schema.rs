//! Live responses checked against api/schema.json with a minimal validator
//! (type, enum, required, properties, additionalProperties, items, $ref).

mod common;

use axum::body::Body;
use axum::http::Request;
use common::{Part, *};
use healthcam_service::AppState;
use serde_json::Value;

fn schema() -> Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("api/schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn resolve<'a>(root: &'a Value, node: &'a Value) -> &'a Value {
    match node.get("$ref").and_then(Value::as_str) {
        Some(r) => {
            let name = r.strip_prefix("#/$defs/").expect("local ref");
            resolve(root, &root["$defs"][name])
        }
        None => node,
    }
}

fn type_matches(expected: &str, v: &Value) -> bool {
    match expected {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "integer" => v.is_u64() || v.is_i64(),
        "number" => v.is_number(),
        other => panic!("unsupported type {other}"),
    }
}

fn validate(root: &Value, node: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
    let node = resolve(root, node);
    if let Some(t) = node.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(s, v),
            Value::Array(ts) => ts.iter().any(|t| type_matches(t.as_str().unwrap(), v)),
            _ => panic!("bad type at {at}"),
        };
        if !ok {
            errors.push(format!("{at}: expected {t}, got {v}"));
            return;
        }
    }
    if let Some(options) = node.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            errors.push(format!("{at}: {v} not in {options:?}"));
        }
    }
    if let (Some(obj), Some(props)) = (
        v.as_object(),
        node.get("properties").and_then(Value::as_object),
    ) {
        for key in node
            .get("required")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
        {
            if !obj.contains_key(key.as_str().unwrap()) {
                errors.push(format!("{at}: missing {key}"));
            }
        }
        for (key, value) in obj {
            match props.get(key) {
                Some(sub) => validate(root, sub, value, &format!("{at}.{key}"), errors),
                None if node.get("additionalProperties") == Some(&Value::Bool(false)) => {
                    errors.push(format!("{at}: unexpected field {key}"))
                }
                None => {}
            }
        }
    }
    if let (Some(items), Some(schema)) = (v.as_array(), node.get("items")) {
        for (i, item) in items.iter().enumerate() {
            validate(root, schema, item, &format!("{at}[{i}]"), errors);
        }
        let len = items.len() as u64;
        if node
            .get("minItems")
            .and_then(Value::as_u64)
            .is_some_and(|m| len < m)
            || node
                .get("maxItems")
                .and_then(Value::as_u64)
                .is_some_and(|m| len > m)
        {
            errors.push(format!("{at}: {len} items out of bounds"));
        }
    }
}

async fn check(endpoint: &str, state: AppState, request: Request<Body>) -> u16 {
    let root = schema();
    let (status, body) = send(state, request).await;
    let status = status.as_u16();
    let node = root["endpoints"][endpoint]
        .get(status.to_string())
        .unwrap_or_else(|| panic!("{endpoint} does not document status {status}"));
    let mut errors = Vec::new();
    validate(&root, node, &body, endpoint, &mut errors);
    assert!(
        errors.is_empty(),
        "{endpoint} {status}:\n{}",
        errors.join("\n")
    );
    status
}

#[tokio::test(flavor = "multi_thread")]
async fn responses_conform_to_the_published_schema() {
    let get = |p: &str| Request::get(p).body(Body::empty()).unwrap();
    assert_eq!(
        check("GET /api/health", loaded_state(), get("/api/health")).await,
        200
    );
    assert_eq!(
        check("GET /api/health", empty_state(), get("/api/health")).await,
        200
    );
    assert_eq!(
        check("GET /api/model", loaded_state(), get("/api/model")).await,
        200
    );
    assert_eq!(
        check("GET /api/model", empty_state(), get("/api/model")).await,
        503
    );
    assert_eq!(
        check("any other path", loaded_state(), get("/api/nope")).await,
        404
    );

    let clear = read_fixture("clear.png");
    let hazy = read_fixture("hazy.png");
    let junk = read_fixture("not_an_image.txt");
    let image = |bytes| Part::File {
        name: "image",
        filename: "x.png",
        bytes,
    };
    let symptoms = |value| Part::Text {
        name: "symptoms",
        value,
    };
    let cases: Vec<(&str, bool, Vec<Part>, u16)> = vec![
        ("POST /api/predict", true, vec![image(&clear)], 200),
        ("POST /api/predict", true, vec![image(&junk)], 400),
        ("POST /api/predict", true, vec![symptoms("asthma")], 400),
        ("POST /api/predict", false, vec![image(&clear)], 503),
        (
            "POST /api/recommend",
            true,
            vec![image(&hazy), symptoms("asthma,elderly")],
            200,
        ),
        ("POST /api/recommend", true, vec![image(&clear)], 200),
        (
            "POST /api/recommend",
            true,
            vec![image(&clear), symptoms("sneezing")],
            422,
        ),
        (
            "POST /api/recommend",
            false,
            vec![image(&clear), symptoms("child")],
            503,
        ),
    ];
    for (endpoint, loaded, parts, expected) in cases {
        let path = endpoint.strip_prefix("POST ").unwrap();
        let state = if loaded {
            loaded_state()
        } else {
            empty_state()
        };
        assert_eq!(
            check(endpoint, state, multipart_request(path, &parts)).await,
            expected,
            "{endpoint}"
        );
    }
}

#[test]
fn every_error_code_is_documented() {
    let root = schema();
    let codes = root["$defs"]["Error"]["properties"]["code"]["enum"]
        .as_array()
        .unwrap();
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("src");
    let text = ["error.rs", "lib.rs"]
        .map(|f| std::fs::read_to_string(dir.join(f)).unwrap())
        .concat();
    for code in codes {
        assert!(
            text.contains(&format!("\"{}\"", code.as_str().unwrap())),
            "{code} not produced"
        );
    }
}

#[test]
fn validator_rejects_drift() {
    let root = schema();
    let node = &root["endpoints"]["GET /api/health"]["200"];
    let good = serde_json::json!({"status": "ok", "checkpoint_loaded": true, "checkpoint_sha256": "ab", "version": "1"});
    let mut errors = Vec::new();
    validate(&root, node, &good, "health", &mut errors);
    assert!(errors.is_empty(), "{errors:?}");
    for bad in [
        serde_json::json!({"status": "ok", "checkpoint_loaded": true, "checkpoint_sha256": "ab", "version": "1", "extra": 1}),
        serde_json::json!({"status": "fine", "checkpoint_loaded": true, "checkpoint_sha256": "ab", "version": "1"}),
        serde_json::json!({"status": "ok", "checkpoint_loaded": true, "version": "1"}),
        serde_json::json!({"status": "ok", "checkpoint_loaded": "yes", "checkpoint_sha256": null, "version": "1"}),
    ] {
        let mut errors = Vec::new();
        validate(&root, node, &bad, "health", &mut errors);
        assert!(!errors.is_empty(), "accepted {bad}");
    }
}
