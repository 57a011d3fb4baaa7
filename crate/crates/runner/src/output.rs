//! Writing run artifacts: CSV tables, the JSON summary and the manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::scenario::{Outcome, Table};

pub const SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// CSV text for a table: a header row, then every value at full precision.
pub fn table_csv(table: &Table) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn json_bytes(value: &Value) -> io::Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    Ok(text)
}

/// Everything the summary says about a run, minus timing so that reruns
/// are byte-identical.
pub fn summary_value(outcome: &Outcome, files: &[String]) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": outcome.scenario,
        "parameters": outcome.parameters,
        "provenance": outcome.provenance,
        "scalars": outcome.scalars,
        "convergence": outcome.convergence,
        "files": files,
    })
}

/// Write the artifacts selected by `csv`/`json` into `dir`, then a manifest
/// hashing every file written (the manifest does not list itself).
pub fn write_outputs(dir: &Path, outcome: &Outcome, csv: bool, json: bool) -> io::Result<Vec<ManifestEntry>> {
    fs::create_dir_all(dir)?;
    let mut written: Vec<(String, Vec<u8>)> = Vec::new();
    if csv {
        for table in &outcome.tables {
            written.push((format!("{}.csv", table.name), table_csv(table)?));
        }
        written.push(("scalars.csv".into(), table_csv(&outcome.scalar_table())?));
    }
    if json {
        let names: Vec<String> = written.iter().map(|(n, _)| n.clone()).collect();
        written.push((SUMMARY_FILE.into(), json_bytes(&summary_value(outcome, &names))?));
    }
    let mut manifest = Vec::with_capacity(written.len());
    for (name, bytes) in &written {
        fs::write(dir.join(name), bytes)?;
        manifest.push(ManifestEntry { path: name.clone(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
    }
    let doc = json!({ "schema_version": SCHEMA_VERSION, "files": manifest });
    fs::write(dir.join(MANIFEST_FILE), json_bytes(&doc)?)?;
    Ok(manifest)
}

/// Files in `dir` whose hash differs from the manifest, or that the manifest
/// does not list. Empty when the directory is intact.
pub fn verify_manifest(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let doc: Value = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    let listed: Vec<(String, String)> = doc["files"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|e| Some((e["path"].as_str()?.to_string(), e["sha256"].as_str()?.to_string())))
        .collect();
    let mut bad = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_FILE {
            continue;
        }
        match listed.iter().find(|(p, _)| *p == name) {
            Some((_, hash)) if *hash == sha256_hex(&fs::read(entry.path())?) => {}
            _ => bad.push(entry.path()),
        }
    }
    for (path, _) in &listed {
        if !dir.join(path).exists() {
            bad.push(dir.join(path));
        }
    }
    bad.sort();
    Ok(bad)
}
