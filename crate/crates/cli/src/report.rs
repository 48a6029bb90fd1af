use std::path::Path;

use serde::Serialize;

use crate::config::SCHEMA;
use crate::Failure;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, pass: value.is_finite() && value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, pass: value >= limit }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Check { name: name.into(), value: ok as u8 as f64, limit: 1.0, pass: ok }
    }
}

#[derive(Serialize)]
pub struct Versions {
    #[serde(rename = "dyadic-tents")]
    pub core: &'static str,
    #[serde(rename = "dyadic-tents-cli")]
    pub cli: &'static str,
}

pub const VERSIONS: Versions = Versions { core: dyadic_tents::VERSION, cli: env!("CARGO_PKG_VERSION") };

#[derive(Serialize)]
pub struct Report<'a, D: Serialize> {
    pub schema: u32,
    pub stage: &'a str,
    pub config_hash: &'a str,
    pub versions: Versions,
    pub checks: &'a [Check],
    pub data: D,
}

pub fn write_report<D: Serialize>(dir: &Path, stage: &str, config_hash: &str, checks: &[Check], data: D) -> Result<(), Failure> {
    let report = Report {
        schema: SCHEMA,
        stage,
        config_hash,
        versions: VERSIONS,
        checks,
        data,
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| Failure::Io(e.to_string()))?;
    let path = dir.join(format!("{stage}.json"));
    std::fs::write(&path, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}
