//! Golden schema files and the checker for JSON records.

use std::fs;
use std::path::Path;

pub fn golden(name: &str) -> String {
    fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

pub fn json_type(v: &serde_json::Value) -> &'static str {
    match v {
        serde_json::Value::Null => "null",
        serde_json::Value::Bool(_) => "boolean",
        serde_json::Value::Number(n) if n.is_u64() || n.is_i64() => "integer",
        serde_json::Value::Number(_) => "number",
        serde_json::Value::String(_) => "string",
        serde_json::Value::Array(_) => "array",
        serde_json::Value::Object(_) => "object",
    }
}

/// Every object has exactly the golden keys, each with an allowed type.
pub fn check_schema(obj: &serde_json::Map<String, serde_json::Value>, schema: &str) {
    let rules: Vec<(&str, Vec<&str>)> = schema
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (k, t) = l.split_once(':').unwrap();
            (k, t.split('|').collect())
        })
        .collect();
    let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
    let mut want: Vec<&str> = rules.iter().map(|(k, _)| *k).collect();
    let mut got = keys.clone();
    want.sort_unstable();
    got.sort_unstable();
    assert_eq!(got, want);
    for (k, types) in rules {
        let t = json_type(&obj[k]);
        let ok = types.contains(&t) || (t == "integer" && types.contains(&"number"));
        assert!(ok, "{k} has type {t}, expected {types:?}");
    }
}
