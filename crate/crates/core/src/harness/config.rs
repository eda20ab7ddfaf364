use std::path::Path;

use crate::error::{Error, Result};

/// Parse line-oriented `key = value` text. `#` starts a comment; blank lines
/// are ignored; keys may be written with `-` or `_`.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Format(format!("config line {}: empty key", i + 1)));
        }
        let value = v.trim().trim_matches('"').to_string();
        // Later lines win.
        out.retain(|(k, _)| *k != key);
        out.push((key, value));
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}
