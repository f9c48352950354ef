//! Artifact directory: CSVs, optional plots and manifest.json.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::plot;
use crate::run::{Gate, RunOutput};

#[derive(Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub kind: &'static str,
    pub rows: Option<usize>,
    pub sha256: String,
    pub grid_converged: Option<bool>,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    pub config: Value,
    pub seeds: Vec<u64>,
    pub grid_converged: bool,
    pub gates: Vec<Gate>,
    pub passed: bool,
    pub summary: Value,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes every artifact and returns the manifest.
pub fn write_artifacts(dir: &Path, cfg: &Config, run: &RunOutput) -> Result<RunManifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut outputs = Vec::new();
    for t in &run.tables {
        fs::write(dir.join(&t.file), &t.bytes).with_context(|| format!("writing {}", t.file))?;
        outputs.push(OutputEntry {
            file: t.file.clone(),
            kind: "csv",
            rows: Some(t.rows),
            sha256: sha256_hex(&t.bytes),
            grid_converged: Some(t.all_converged),
        });
    }
    if cfg.plots {
        for t in &run.tables {
            if let Some((name, svg)) = plot::from_csv(cfg.command, &t.file, &t.bytes)? {
                fs::write(dir.join(&name), svg.as_bytes()).with_context(|| format!("writing {name}"))?;
                outputs.push(OutputEntry { file: name, kind: "svg", rows: None, sha256: sha256_hex(svg.as_bytes()), grid_converged: None });
            }
        }
    }
    let canonical = cfg.canonical();
    let manifest = RunManifest {
        tool: "dissipa",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name(),
        config_sha256: sha256_hex(canonical.as_bytes()),
        config: serde_json::to_value(cfg)?,
        seeds: run.seeds.clone(),
        grid_converged: run.tables.iter().all(|t| t.all_converged),
        passed: run.gates.iter().all(|g| g.passed),
        gates: run.gates.clone(),
        summary: run.summary.clone(),
        outputs,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), text + "\n").context("writing manifest.json")?;
    Ok(manifest)
}
