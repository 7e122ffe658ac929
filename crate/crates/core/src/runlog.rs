//! Append-only run log: one JSON file per invocation.

use serde::{Deserialize, Serialize};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub timestamp: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: RunConfig,
    pub exit_code: i32,
    pub payload: serde_json::Value,
    pub duration_secs: f64,
}

impl RunRecord {
    pub fn new(command: &str, args: Vec<String>, config: RunConfig) -> Self {
        Self {
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true),
            command: command.to_string(),
            args,
            config,
            exit_code: 0,
            payload: serde_json::Value::Null,
            duration_secs: 0.0,
        }
    }
}

/// Writes `record` under `dir` without ever replacing an existing file.
pub fn append(dir: &Path, record: &RunRecord) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let stamp: String = record
        .timestamp
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect();
    let body = serde_json::to_string_pretty(record)?;
    for attempt in 0.. {
        let name = match attempt {
            0 => format!("{stamp}_{}.json", record.command),
            i => format!("{stamp}_{}_{i}.json", record.command),
        };
        let path = dir.join(name);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                f.write_all(body.as_bytes())?;
                f.write_all(b"\n")?;
                return Ok(path);
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

/// All records in `dir`, oldest first.
pub fn read_all(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut out = vec![];
    for p in paths {
        out.push(serde_json::from_str(&std::fs::read_to_string(&p)?)?);
    }
    out.sort_by(|a: &RunRecord, b| a.timestamp.cmp(&b.timestamp));
    Ok(out)
}
