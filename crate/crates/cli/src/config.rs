//! Config precedence: flags > config file > defaults.
//!
//! A config file is a JSON object. Scalar top-level entries apply to every
//! command; an object under a command's name (e.g. `"robustness": {...}`)
//! applies to that command only and wins over the top level.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub fn load(path: Option<&Path>) -> Result<Value, CliError> {
    let Some(path) = path else {
        return Ok(Value::Object(Map::new()));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Invalid(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::Invalid("config must be a JSON object".into()));
    }
    Ok(value)
}

/// Overlays the non-null fields of `flags` on the config entries for
/// `section`.
pub fn resolve<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: &Value,
    section: &str,
) -> Result<T, CliError> {
    let mut merged = Map::new();
    if let Value::Object(top) = file {
        for (k, v) in top {
            if !v.is_object() {
                merged.insert(k.clone(), v.clone());
            }
        }
        if let Some(Value::Object(sec)) = top.get(section) {
            merged.extend(sec.clone());
        }
    }
    let flags = serde_json::to_value(flags).map_err(|e| CliError::Invalid(e.to_string()))?;
    if let Value::Object(f) = flags {
        merged.extend(f.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Invalid(format!("invalid configuration: {e}")))
}
