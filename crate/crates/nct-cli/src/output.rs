//! Run directory layout and writers.
//!
//! Every invocation creates `<out>/<command>-<timestamp>/` holding exactly
//! three files: `config.json` (the resolved configuration), `results.csv`
//! (one deterministic row stream; identical config and seed reproduce it
//! byte for byte), and `summary.json` (the run record, schema version 1 —
//! the only file carrying timestamps and wall-clock data).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub struct RunDir {
    pub path: PathBuf,
}

/// Create `<out>/<command>-<timestamp>/`, suffixing `-2`, `-3`, … if two
/// runs land in the same second.
pub fn create_run_dir(cfg: &RunConfig) -> Result<RunDir> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    let mut path = cfg.out.join(format!("{}-{stamp}", cfg.command.name()));
    let mut suffix = 1usize;
    while path.exists() {
        suffix += 1;
        path = cfg
            .out
            .join(format!("{}-{stamp}-{suffix}", cfg.command.name()));
    }
    fs::create_dir_all(&path)
        .with_context(|| format!("creating run directory {}", path.display()))?;
    Ok(RunDir { path })
}

impl RunDir {
    pub fn write_config(&self, cfg: &RunConfig) -> Result<()> {
        write_json(self, "config.json", cfg)
    }

    pub fn write_summary<T: Serialize>(&self, record: &T) -> Result<()> {
        write_json(self, "summary.json", record)
    }

    /// Open `results.csv` and write the header line.
    pub fn csv_writer(&self, header: &str) -> Result<CsvWriter> {
        let path = self.path.join("results.csv");
        let file =
            File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut writer = BufWriter::new(file);
        writeln!(writer, "{header}").context("writing CSV header")?;
        Ok(CsvWriter { writer })
    }
}

fn write_json<T: Serialize>(dir: &RunDir, name: &str, value: &T) -> Result<()> {
    let path = dir.path.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .with_context(|| format!("serializing {name}"))?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Plain comma-separated rows of numbers and bare identifiers. Floats are
/// written with the shortest round-trip formatting, so the byte stream is a
/// pure function of the values.
pub struct CsvWriter {
    writer: BufWriter<File>,
}

impl CsvWriter {
    pub fn row(&mut self, args: std::fmt::Arguments<'_>) -> Result<()> {
        self.writer.write_fmt(args).context("writing CSV row")?;
        self.writer.write_all(b"\n").context("writing CSV row")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().context("flushing results.csv")?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Run record envelope
// ---------------------------------------------------------------------------

/// The shared `summary.json` shell: schema version, identity of the run,
/// wall-clock accounting, the full configuration echo, and the
/// command-specific results blob.
#[derive(Serialize)]
pub struct RunRecord<'a, T: Serialize> {
    pub schema: u32,
    pub command: &'a str,
    pub version: &'a str,
    pub started_utc: String,
    pub wall_ms: u128,
    pub seed: u64,
    pub config: &'a RunConfig,
    pub results: T,
}

/// Per-stage slack statistics for the summary record.
#[derive(Clone, Serialize)]
pub struct StageStats {
    pub stage: &'static str,
    pub count: usize,
    pub min_slack: Option<f64>,
    pub mean_slack: Option<f64>,
    pub violations: usize,
}

/// Streaming accumulator behind [`StageStats`].
pub struct StageAccumulator {
    stage: &'static str,
    count: usize,
    min: f64,
    sum: f64,
    violations: usize,
}

impl StageAccumulator {
    pub fn new(stage: &'static str) -> Self {
        StageAccumulator {
            stage,
            count: 0,
            min: f64::INFINITY,
            sum: 0.0,
            violations: 0,
        }
    }

    pub fn observe(&mut self, slack: f64, violated: bool) {
        self.count += 1;
        self.min = self.min.min(slack);
        self.sum += slack;
        self.violations += usize::from(violated);
    }

    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn finish(self) -> StageStats {
        let (min_slack, mean_slack) = if self.count == 0 {
            (None, None)
        } else {
            (Some(self.min), Some(self.sum / self.count as f64))
        };
        StageStats {
            stage: self.stage,
            count: self.count,
            min_slack,
            mean_slack,
            violations: self.violations,
        }
    }
}
