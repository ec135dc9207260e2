//! Config files. Keys mirror long flags (`out_dir` or `out-dir`). The file
//! fills in any flag absent from the command line, so the precedence is
//! command line, then config file, then built-in defaults.

use std::ffi::OsString;
use std::path::PathBuf;

use serde_json::Value;

use crate::error::{CliError, Result};

fn config_path(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(v));
        }
    }
    None
}

fn present(argv: &[OsString], flag: &str) -> bool {
    let eq = format!("{flag}=");
    argv.iter().any(|a| {
        let s = a.to_string_lossy();
        s == flag || s.starts_with(&eq)
    })
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Appends config values for flags missing from `argv`.
pub fn merge(argv: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&argv) else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| crate::manifest::file_err(&path, e))?;
    let cfg: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
    let Value::Object(map) = cfg else {
        return Err(CliError::usage(format!(
            "config {} must be a JSON object",
            path.display()
        )));
    };
    let mut out = argv.clone();
    for (key, value) in map {
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        if present(&argv, &flag) {
            continue;
        }
        match &value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => out.push(flag.into()),
            Value::Array(items) => {
                let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
                let parts = parts.ok_or_else(|| {
                    CliError::usage(format!(
                        "config key {key}: arrays must hold strings or numbers"
                    ))
                })?;
                out.push(flag.into());
                out.push(parts.join(",").into());
            }
            other => {
                let v = scalar(other).ok_or_else(|| {
                    CliError::usage(format!("config key {key}: unsupported value"))
                })?;
                out.push(flag.into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}
