//! Locating demonstrations and reading/writing trajectory sets.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cuakit_core::interchange::{
    read_jsonl, read_trajectory, to_json_pretty, write_atomic, MANIFEST,
};
use cuakit_core::model::Trajectory;
use serde::de::DeserializeOwned;

use crate::UsageError;

/// The path must exist; a missing input is a usage error.
pub fn existing(path: &Path) -> anyhow::Result<PathBuf> {
    if !path.exists() {
        return Err(UsageError(format!("input {} does not exist", path.display())).into());
    }
    Ok(path.to_path_buf())
}

pub fn required(value: Option<PathBuf>, flag: &str) -> anyhow::Result<PathBuf> {
    value.ok_or_else(|| UsageError(format!("{flag} is required")).into())
}

/// Demonstration directories under `path` as `(root, name)` pairs: `path`
/// itself when it holds a manifest, else its immediate subdirectories that do.
pub fn demo_dirs(path: &Path) -> anyhow::Result<(PathBuf, Vec<String>)> {
    if path.join(MANIFEST).is_file() {
        let name = path
            .canonicalize()?
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .context("demonstration directory has no name")?;
        let root = path.join("..");
        return Ok((root, vec![name]));
    }
    let mut names = Vec::new();
    for entry in fs::read_dir(path).with_context(|| format!("listing {}", path.display()))? {
        let p = entry?.path();
        if p.join(MANIFEST).is_file() {
            names.push(
                p.file_name()
                    .expect("entry name")
                    .to_string_lossy()
                    .into_owned(),
            );
        }
    }
    if names.is_empty() {
        bail!("no demonstrations under {}", path.display());
    }
    names.sort();
    Ok((path.to_path_buf(), names))
}

/// A trajectory set: one file, or every `*.json` file in a directory.
pub struct TrajSet {
    pub from_dir: bool,
    pub items: Vec<Trajectory>,
}

pub fn read_trajs(path: &Path) -> anyhow::Result<TrajSet> {
    if path.is_file() {
        return Ok(TrajSet {
            from_dir: false,
            items: vec![read_trajectory(path)?],
        });
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| {
        let name = p
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        name.ends_with(".json") && !name.starts_with('.')
    });
    files.sort();
    let items = files
        .iter()
        .map(|p| read_trajectory(p).map_err(anyhow::Error::from))
        .collect::<anyhow::Result<Vec<_>>>()?;
    if items.is_empty() {
        bail!("no trajectories under {}", path.display());
    }
    Ok(TrajSet {
        from_dir: true,
        items,
    })
}

/// Write a trajectory set in the same shape it was read: a directory of
/// `<id>.json` files, or a single file.
pub fn write_trajs(out: &Path, as_dir: bool, items: &[Trajectory]) -> anyhow::Result<()> {
    if !as_dir {
        if let [t] = items {
            write_atomic(out, &to_json_pretty(t))?;
            return Ok(());
        }
    }
    let mut ids: Vec<&str> = items.iter().map(|t| t.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        bail!("duplicate trajectory id {}", w[0]);
    }
    for t in items {
        if t.id.is_empty() || t.id.contains(['/', '\\']) || t.id.starts_with('.') {
            bail!("trajectory id {:?} is not a valid file name", t.id);
        }
        write_atomic(&out.join(format!("{}.json", t.id)), &to_json_pretty(t))?;
    }
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_lines<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    Ok(read_jsonl(path)?)
}

pub fn jsonl<T: serde::Serialize>(items: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("serializable");
        buf.push(b'\n');
    }
    buf
}
