use std::fs;
use std::path::Path;

use delayed_exec::report::{apply_override, parse_override};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Builds a typed config: the defaults (if any), then the config file merged
/// over them, then `--set` overrides. Unknown keys fail deserialization.
pub fn load<T: Serialize + DeserializeOwned>(
    defaults: Option<&T>,
    file: Option<&Path>,
    sets: &[String],
) -> Result<T, CliError> {
    let mut doc = match defaults {
        Some(d) => serde_json::to_value(d).map_err(|e| CliError::Config(e.to_string()))?,
        None => Value::Object(Default::default()),
    };
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let from_file: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        merge(&mut doc, from_file);
    } else if defaults.is_none() {
        return Err(CliError::Config("this command needs --config".into()));
    }
    for raw in sets {
        let (key, value) = parse_override(raw).map_err(CliError::from)?;
        apply_override(&mut doc, &key, value).map_err(CliError::from)?;
    }
    serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))
}

/// Deep merge of objects. A tagged object whose `kind` changes is replaced
/// whole, since its other fields belong to the old variant.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            let kind_changed = matches!((b.get("kind"), o.get("kind")), (Some(x), Some(y)) if x != y);
            if kind_changed {
                *b = o;
                return;
            }
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses `3`, `0..20` (end exclusive), `0..=4` or `1,5,9`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config(format!("bad seed list {s:?}; use N, A..B, A..=B or a comma list"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}
