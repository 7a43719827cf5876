//! Run manifests written next to every output.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use cuakit_core::interchange::{to_json_pretty, write_atomic};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::JobConfig;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

/// SHA-256 of a file, or of the sorted `(relative path, file hash)` list
/// of a directory tree. Hidden entries are skipped.
pub fn hash_path(path: &Path) -> anyhow::Result<String> {
    if path.is_file() {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        return Ok(hex::encode(Sha256::digest(bytes)));
    }
    let mut files = Vec::new();
    collect(path, path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for (rel, digest) in files {
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(digest.as_bytes());
        h.update([b'\n']);
    }
    Ok(hex::encode(h.finalize()))
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> anyhow::Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let hidden = path
            .file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with('.'));
        if hidden {
            continue;
        }
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).unwrap_or(&path);
            let rel = rel.to_string_lossy().replace('\\', "/");
            out.push((rel, hash_path(&path)?));
        }
    }
    Ok(())
}

/// `out.json` gets `out.json.manifest.json`; a directory `out/` gets `out.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{name}.manifest.json"))
}

pub struct Recorder {
    command: String,
    inputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Recorder {
            command: command.to_string(),
            inputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn finish(
        self,
        cfg: &JobConfig,
        outputs: &[&Path],
        summary: serde_json::Value,
    ) -> anyhow::Result<()> {
        let Some(first) = outputs.first() else {
            return Ok(());
        };
        let key = |p: &Path| p.to_string_lossy().replace('\\', "/");
        let mut inputs = BTreeMap::new();
        for p in &self.inputs {
            inputs.insert(key(p), hash_path(p)?);
        }
        let mut outs = BTreeMap::new();
        for p in outputs {
            outs.insert(key(p), hash_path(p)?);
        }
        let m = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config_hash: cfg.hash(),
            inputs,
            outputs: outs,
            config: serde_json::to_value(cfg).expect("config serializes"),
            summary,
        };
        let path = manifest_path(first);
        write_atomic(&path, &to_json_pretty(&m))?;
        Ok(())
    }
}
