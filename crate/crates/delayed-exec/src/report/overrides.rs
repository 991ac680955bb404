use serde_json::Value;

use super::ReportError;

/// Splits `key=value`; the value is parsed as JSON and falls back to a
/// plain string (so `kind=rar` works without quotes).
pub fn parse_override(raw: &str) -> Result<(String, Value), ReportError> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| ReportError::Config(format!("override {raw:?} is not key=value")))?;
    if key.is_empty() {
        return Err(ReportError::Config(format!("override {raw:?} has an empty key")));
    }
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.to_string(), value))
}

/// Sets a dotted path (`network.protocol.zeta`, `network.miners.0.c`) in a
/// JSON document. Every intermediate step must exist; the last key may be
/// new so optional fields can be given, and typed deserialization rejects
/// keys that are not part of the schema.
pub fn apply_override(root: &mut Value, path: &str, value: Value) -> Result<(), ReportError> {
    let parts: Vec<&str> = path.split('.').collect();
    let (last, init) = parts.split_last().expect("split yields at least one part");
    let mut cur = root;
    for (depth, part) in init.iter().enumerate() {
        let here = parts[..=depth].join(".");
        cur = match cur {
            Value::Object(map) => map.get_mut(*part),
            Value::Array(items) => part.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| ReportError::Config(format!("unknown key {here:?}")))?;
    }
    match cur {
        Value::Object(map) => {
            let value = match map.get(*last) {
                Some(old) => coerce_like(old, value),
                None => value,
            };
            map.insert(last.to_string(), value);
        }
        Value::Array(items) => {
            let slot = last
                .parse::<usize>()
                .ok()
                .and_then(|i| items.get_mut(i))
                .ok_or_else(|| ReportError::Config(format!("unknown key {path:?}")))?;
            *slot = coerce_like(slot, value);
        }
        _ => return Err(ReportError::Config(format!("unknown key {path:?}"))),
    }
    Ok(())
}

/// Writes whole floats as integers where the old value was an integer, so
/// sweep grids given as numbers can drive integer fields.
fn coerce_like(old: &Value, new: Value) -> Value {
    match (old, &new) {
        (Value::Number(o), Value::Number(n)) if o.is_u64() && !n.is_u64() => match n.as_f64() {
            Some(f) if f >= 0.0 && f.fract() == 0.0 && f < u64::MAX as f64 => Value::from(f as u64),
            _ => new,
        },
        _ => new,
    }
}
