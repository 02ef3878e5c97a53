//! Output writing. JSON results are wrapped as `{"metadata", "result"}`; CSV
//! results get their metadata in a sidecar `<out>.meta.json`, or on stderr
//! when writing to stdout.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use tilted_core::format::sig12;

use crate::args::Global;
use crate::error::CliError;

/// A JSON number rounded to 12 significant digits; non-finite values become
/// strings.
pub fn num(x: f64) -> Value {
    match sig12(x).parse::<f64>() {
        Ok(v) if v.is_finite() => json!(v),
        _ => Value::String(sig12(x)),
    }
}

/// Recursively rounds every float in a JSON value.
pub fn round_all(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().unwrap_or(f64::NAN)),
        Value::Array(a) => Value::Array(a.into_iter().map(round_all).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_all(v))).collect()),
        other => other,
    }
}

/// `{"tool", "version", "command", "config"}` plus `extra`.
pub fn metadata<C: Serialize>(command: &str, global: &Global, config: &C, extra: Value) -> Value {
    let mut cfg = match serde_json::to_value(global) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    if let Ok(Value::Object(m)) = serde_json::to_value(config) {
        cfg.extend(m);
    }
    let mut meta = json!({
        "tool": "selftest",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": Value::Object(cfg),
    });
    if let (Value::Object(m), Value::Object(e)) = (&mut meta, extra) {
        m.extend(e);
    }
    round_all(meta)
}

fn write_to(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn json(global: &Global, metadata: Value, result: Value) -> Result<(), CliError> {
    let doc = json!({ "metadata": metadata, "result": round_all(result) });
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Failed(e.to_string()))?;
    text.push('\n');
    write_to(global.out.as_deref(), &text)
}

pub fn sidecar(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn csv(global: &Global, metadata: Value, body: &str) -> Result<(), CliError> {
    let mut meta = serde_json::to_string_pretty(&metadata).map_err(|e| CliError::Failed(e.to_string()))?;
    meta.push('\n');
    match global.out.as_deref() {
        Some(p) => {
            std::fs::write(p, body)?;
            std::fs::write(sidecar(p), meta)?;
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            eprint!("{meta}");
        }
    }
    Ok(())
}
