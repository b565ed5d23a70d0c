//! Resolution of command settings: caption defaults, then the config file,
//! then `--override key=value` pairs, all merged as JSON objects.

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use std::path::Path;

/// Keys of the model configuration schema.
pub const MODEL_KEYS: &[&str] = &["b", "c", "lambda", "r", "mu", "D", "N", "k", "stopping", "segments"];

pub fn read_config(path: &Path) -> Result<Map<String, Value>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    match serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))? {
        Value::Object(map) => Ok(map),
        _ => bail!("config {} must be a JSON object", path.display()),
    }
}

/// Parses an override value: JSON if it parses, a comma-separated list of
/// JSON scalars if it contains commas, otherwise a bare string.
pub fn parse_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if raw.contains(',') {
        let items: Option<Vec<Value>> = raw.split(',').map(|s| serde_json::from_str(s.trim()).ok()).collect();
        if let Some(items) = items {
            return Value::Array(items);
        }
    }
    Value::String(raw.to_string())
}

pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw.split_once('=').ok_or_else(|| anyhow!("override `{raw}` is not of the form key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        bail!("override `{raw}` has an empty key");
    }
    Ok((key.to_string(), parse_value(value.trim())))
}

/// Merged settings for one command.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub map: Map<String, Value>,
}

impl Resolved {
    /// `defaults <- config <- overrides`, rejecting keys outside `allowed`.
    /// `timeout_mean` is accepted as an alias that sets `r = 1 / value`.
    pub fn build(defaults: Map<String, Value>, config: Option<&Path>, overrides: &[(String, Value)], allowed: &[&str]) -> Result<Self> {
        let mut map = defaults;
        let mut layers: Vec<(String, Value)> = Vec::new();
        if let Some(path) = config {
            layers.extend(read_config(path)?);
        }
        layers.extend(overrides.iter().cloned());
        for (key, value) in layers {
            if key == "timeout_mean" {
                let t = value.as_f64().filter(|t| *t > 0.0).ok_or_else(|| anyhow!("`timeout_mean` must be a number > 0"))?;
                map.insert("r".into(), Value::from(1.0 / t));
                continue;
            }
            if !MODEL_KEYS.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
                bail!("unknown setting `{key}`");
            }
            map.insert(key, value);
        }
        Ok(Resolved { map })
    }

    pub fn parse<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_value(Value::Object(self.map.clone())).map_err(|e| anyhow!("invalid settings: {e}"))
    }

    pub fn echo(&self) -> Value {
        Value::Object(self.map.clone())
    }
}

/// Builds a JSON object from `(key, value)` pairs.
pub fn object<const N: usize>(pairs: [(&str, Value); N]) -> Map<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn override_values() {
        assert_eq!(parse_value("0.5"), json!(0.5));
        assert_eq!(parse_value("[1,2]"), json!([1, 2]));
        assert_eq!(parse_value("1,2,4"), json!([1, 2, 4]));
        assert_eq!(parse_value("NoStop"), json!("NoStop"));
        assert!(parse_override("novalue").is_err());
        assert_eq!(parse_override("N=4").unwrap(), ("N".to_string(), json!(4)));
    }

    #[test]
    fn layering_and_aliases() {
        let defaults = object([("b", json!(0.0)), ("points", json!(10))]);
        let r = Resolved::build(defaults.clone(), None, &[("timeout_mean".into(), json!(4.0)), ("points".into(), json!(3))], &["points"]).unwrap();
        assert_eq!(r.map["r"], json!(0.25));
        assert_eq!(r.map["points"], json!(3));
        assert!(Resolved::build(defaults, None, &[("bogus".into(), json!(1))], &[]).is_err());
    }
}
