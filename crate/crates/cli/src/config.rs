//! Layered configuration: built-in defaults, then a TOML file or a run
//! manifest, then command-line flags.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::manifest::RunManifest;

/// Recursively overlays `top` onto `base`. Objects merge key by key unless
/// their `kind` tags differ, in which case `top` replaces `base` wholesale.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            let retagged = matches!((b.get("kind"), t.get("kind")), (Some(x), Some(y)) if x != y);
            if retagged {
                *b = t;
                return;
            }
            for (k, v) in t {
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

/// Reads a config overlay. Files ending in `.json` are run manifests whose
/// `config` section is replayed; anything else is parsed as TOML.
pub fn read_overlay(path: &Path, subcommand: &str) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|x| x == "json") {
        let m: RunManifest = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: not a run manifest: {e}", path.display())))?;
        if m.subcommand != subcommand {
            return Err(CliError::usage(format!(
                "{} was written by `{}`, not `{subcommand}`",
                path.display(),
                m.subcommand
            )));
        }
        Ok(m.config)
    } else {
        let table: toml::Table = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        serde_json::to_value(table).map_err(|e| CliError::Internal(e.to_string()))
    }
}

pub fn load<T: Serialize + DeserializeOwned + Default>(path: Option<&Path>, subcommand: &str) -> Result<T> {
    let mut value = serde_json::to_value(T::default()).map_err(|e| CliError::Internal(e.to_string()))?;
    if let Some(p) = path {
        merge(&mut value, read_overlay(p, subcommand)?);
    }
    serde_json::from_value(value).map_err(|e| CliError::usage(format!("config: {e}")))
}
