//! Flat `key = value` config files.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::CliError;

/// Keys accepted in a config file; the same names as the long flags.
pub const KEYS: &[&str] = &[
    "deltas",
    "m",
    "m0",
    "k-max",
    "n-y",
    "n-theta",
    "rho0",
    "band",
    "seed",
    "extra-modes",
    "floor",
    "tolerance",
    "weight",
    "out",
    "format",
];

/// Parses config text. Keys may use `_` or `-`; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::input(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::input(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_underscores() {
        let c = parse_config("# scan\nk_max = 4  # modes\n\ndeltas=0.1,0.05\n").unwrap();
        assert_eq!(c["k-max"], "4");
        assert_eq!(c["deltas"], "0.1,0.05");
    }

    #[test]
    fn rejects_unknown_and_malformed_lines() {
        assert!(parse_config("colour = red").is_err());
        assert!(parse_config("m 2").is_err());
        assert!(parse_config("m = 2\nm = 3").is_err());
    }
}
