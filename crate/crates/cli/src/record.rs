//! Provenance header attached to every result file.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub wall_seconds: f64,
}

/// Everything needed to reproduce a result. Only `timings` may differ
/// between two runs with the same inputs and flags.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    /// Input file path (as given) or model label → SHA-256 content digest.
    pub input_hashes: BTreeMap<String, String>,
    pub timings: Timings,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunRecord {
    pub fn start(command: &str, config: Value) -> Self {
        Self {
            tool: "cbsg",
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config,
            input_hashes: BTreeMap::new(),
            timings: Timings { wall_seconds: 0.0 },
            started: Some(Instant::now()),
        }
    }

    pub fn add_file(&mut self, path: &Path) -> Result<()> {
        let digest = cbsg::modelio::file_sha256(path)?;
        self.input_hashes.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn add_digest(&mut self, label: impl Into<String>, digest: impl Into<String>) {
        self.input_hashes.insert(label.into(), digest.into());
    }

    fn stamp(&mut self) {
        if let Some(t) = self.started {
            self.timings.wall_seconds = t.elapsed().as_secs_f64();
        }
    }

    /// One-line `# {...}` comment used as the first line of CSV output.
    pub fn csv_comment(&mut self) -> Result<String> {
        self.stamp();
        Ok(format!("# {}", serde_json::to_string(self)?))
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    run: &'a RunRecord,
    result: &'a T,
}

/// Writes `{"run": ..., "result": ...}` to `out`, or to stdout when `out` is `None`.
pub fn emit_json<T: Serialize>(record: &mut RunRecord, result: &T, out: Option<&Path>) -> Result<()> {
    record.stamp();
    let mut text = serde_json::to_string_pretty(&Envelope { run: record, result })?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}
