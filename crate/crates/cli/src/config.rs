//! JSON run configs with dotted-path overrides.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

/// Failure to produce a valid config; always a usage error.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Reads `path` (or `{}`), applies `key=value` overrides in order, then deserializes.
/// Values parse as JSON when they can and fall back to plain strings.
pub fn load<T: DeserializeOwned>(
    path: Option<&Path>,
    overrides: &[String],
) -> Result<T, ConfigError> {
    let mut root = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", p.display())))?
        }
        None => Value::Object(Map::new()),
    };
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override `{o}` is not of the form key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut root, key, value)?;
    }
    serde_json::from_value(root).map_err(|e| ConfigError(format!("config: {e}")))
}

/// Sets `a.b.c` inside `root`, creating objects along the way.
/// Numeric segments index into existing arrays.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(ConfigError(format!("bad override key `{key}`")));
    }
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| ConfigError(format!("`{part}` in `{key}` must index an array")))?;
                let len = items.len();
                items.get_mut(idx).ok_or_else(|| {
                    ConfigError(format!("index {idx} in `{key}` is out of range ({len})"))
                })?
            }
            Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
            other @ Value::Null => {
                *other = Value::Object(Map::new());
                other
                    .as_object_mut()
                    .unwrap()
                    .entry(part.to_string())
                    .or_insert(Value::Null)
            }
            _ => return Err(ConfigError(format!("`{key}` descends into a scalar"))),
        };
        if last {
            *cur = value;
            return Ok(());
        }
    }
    unreachable!()
}
