//! Run manifests: everything needed to reproduce an output file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{SecondsFormat, Utc};
use easyfs::{SelectionConfig, Task};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{Format, InputArgs};

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
    pub format: Format,
    pub task: Task,
    pub target: Option<String>,
    pub header: bool,
    pub n_samples: usize,
    pub n_features: usize,
}

impl InputRecord {
    pub fn new(args: &InputArgs, sha256: String, n_samples: usize, n_features: usize) -> Self {
        Self {
            path: args.input.clone(),
            sha256,
            format: args.format,
            task: args.task.into(),
            target: args.target.clone(),
            header: !args.no_header,
            n_samples,
            n_features,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<E: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input: InputRecord,
    /// Resolved configuration; the network size is filled in when it was defaulted.
    pub config: SelectionConfig,
    /// Command-specific settings and outputs.
    #[serde(flatten)]
    pub extra: E,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
}

impl<E: Serialize> Manifest<E> {
    pub fn new(command: &'static str, input: InputRecord, config: SelectionConfig, extra: E, started_at: String) -> Self {
        Self {
            tool: "easyfs",
            version: env!("CARGO_PKG_VERSION"),
            command,
            input,
            config,
            extra,
            threads: rayon::current_num_threads(),
            started_at,
            finished_at: now(),
        }
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// `<output>.manifest.json` next to an output file.
pub fn sidecar(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
