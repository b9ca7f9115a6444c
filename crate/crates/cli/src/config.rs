//! Merging of command-line flags over a JSON config file.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

/// Comma-separated numbers on the command line, an array (or the same
/// string) in a config file.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(NumList)
    }
}

impl fmt::Display for NumList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for NumList {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NumList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Many(Vec<f64>),
            One(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Many(v) => Ok(NumList(v)),
            Raw::One(v) => Ok(NumList(vec![v])),
        }
    }
}

/// Options given on the command line win over the same keys in `file`.
/// Unknown keys in `file` are rejected by the options type itself.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Value>) -> Result<T> {
    let Some(file) = file else {
        return Ok(serde_json::from_value(serde_json::to_value(flags)?)?);
    };
    let Value::Object(base) = file else {
        bail!("config must be a JSON object");
    };
    let mut merged: Map<String, Value> = base.clone();
    if let Value::Object(cli) = serde_json::to_value(flags)? {
        for (k, v) in cli {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).context("invalid config")
}

pub fn load(path: &str) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {path}"))
}

pub fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bail!("{name} must be positive, got {v}")
    }
}

pub fn at_least(name: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        bail!("{name} must be at least {min}, got {v}")
    }
}

pub fn distinct(input: &str, output: &str) -> Result<()> {
    if input != "-" && input == output {
        bail!("input and output paths must differ ({input})");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize, Deserialize, Default, Debug, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Opts {
        grid: Option<usize>,
        center: Option<NumList>,
    }

    #[test]
    fn flags_override_file() {
        let file = serde_json::json!({"grid": 64, "center": [1.0, 2.0]});
        let flags = Opts {
            grid: Some(32),
            center: None,
        };
        let got = resolve(&flags, Some(&file)).unwrap();
        assert_eq!(got.grid, Some(32));
        assert_eq!(got.center, Some(NumList(vec![1.0, 2.0])));
    }

    #[test]
    fn unknown_keys_are_named() {
        let file = serde_json::json!({"gird": 64});
        let err = resolve(&Opts::default(), Some(&file)).unwrap_err();
        assert!(format!("{err:#}").contains("gird"), "{err:#}");
    }

    #[test]
    fn lists_parse_from_text_or_arrays() {
        assert_eq!("1, -2.5".parse::<NumList>().unwrap(), NumList(vec![1.0, -2.5]));
        let v: NumList = serde_json::from_str("\"0,1\"").unwrap();
        assert_eq!(v, NumList(vec![0.0, 1.0]));
        assert!("1,x".parse::<NumList>().is_err());
    }
}
