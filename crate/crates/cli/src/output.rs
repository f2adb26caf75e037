//! File writing plus the run manifest that accompanies every output.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    args: Vec<String>,
    seed: Option<u64>,
    version: &'static str,
    outputs: Vec<String>,
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().context("flushing CSV")?;
    write_text(path, &String::from_utf8(bytes)?)
}

/// `report.csv` -> `report.<ext>`.
pub fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// Writes `<first output>.manifest.json` recording the flags of this run.
/// No timestamps, so identical invocations give identical manifests.
pub fn write_manifest(argv: &[String], command: &str, seed: Option<u64>, outputs: &[&Path]) -> Result<()> {
    let first = outputs.first().context("manifest needs at least one output")?;
    let mut name = first.file_name().context("output has no file name")?.to_os_string();
    name.push(".manifest.json");
    let manifest = Manifest {
        command,
        args: argv.to_vec(),
        seed,
        version: env!("CARGO_PKG_VERSION"),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    write_json(&first.with_file_name(name), &manifest)
}
