//! Canonical JSON: sorted object keys and floats rounded to six significant
//! digits, so equal results serialize to equal bytes.

use serde::Serialize;
use serde_json::{Map, Number, Value};

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Rounds to six significant digits. Non-finite values pass through.
pub fn round_float(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x);
    if rounded == 0.0 {
        0.0
    } else {
        rounded
    }
}

/// Rewrites a JSON value into canonical form.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_float(n.as_f64().unwrap_or_default());
            Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonicalize(v))).collect::<Map<_, _>>())
        }
        other => other,
    }
}

pub fn to_value<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<Value> {
    serde_json::to_value(value).map(canonicalize)
}

/// Pretty-printed canonical JSON, two-space indent, no trailing newline.
pub fn to_string_pretty<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string_pretty(&to_value(value)?)
}

/// Single-line canonical JSON, for JSONL output.
pub fn to_string_line<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string(&to_value(value)?)
}
