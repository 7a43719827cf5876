//! On-disk demonstration and trajectory formats.
//!
//! A demonstration directory holds `manifest.json`, `events.jsonl`,
//! `frames.jsonl`, the `frames/` images and optionally `axtree.jsonl`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Frame, Millis, Os, RawDemonstration, RawEvent, TaskStatus, Trajectory};

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl InterchangeError {
    fn io(path: &Path, source: io::Error) -> Self {
        InterchangeError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub instruction: String,
    pub os: Os,
    pub resolution: (u32, u32),
    /// Shared recording epoch (ms, any absolute clock).
    pub epoch: u64,
    /// Clock origins of the event and frame logs when they differ from
    /// `epoch`; timestamps are shifted onto the shared clock on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events_epoch: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_epoch: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<TaskStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AxSnapshot {
    t: Millis,
    text: String,
}

pub const MANIFEST: &str = "manifest.json";
pub const EVENTS: &str = "events.jsonl";
pub const FRAMES: &str = "frames.jsonl";
pub const AXTREE: &str = "axtree.jsonl";
pub const FRAME_DIR: &str = "frames";

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, InterchangeError> {
    let text = fs::read_to_string(path).map_err(|e| InterchangeError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| InterchangeError::Format {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Read a JSON-lines file; blank lines are skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, InterchangeError> {
    let file = fs::File::open(path).map_err(|e| InterchangeError::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| InterchangeError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| InterchangeError::Format {
            path: path.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(v);
    }
    Ok(out)
}

fn shift(
    t: Millis,
    origin: Option<u64>,
    epoch: u64,
    path: &Path,
) -> Result<Millis, InterchangeError> {
    match origin {
        None => Ok(t),
        Some(o) => (o + t)
            .checked_sub(epoch)
            .ok_or_else(|| InterchangeError::Format {
                path: path.to_path_buf(),
                line: 0,
                message: format!("timestamp {t} precedes the recording epoch"),
            }),
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, InterchangeError> {
    read_json(&dir.join(MANIFEST))
}

/// Load a demonstration directory, moving both logs onto the shared clock.
pub fn read_demo(dir: &Path) -> Result<RawDemonstration, InterchangeError> {
    let manifest = read_manifest(dir)?;
    let events_path = dir.join(EVENTS);
    let frames_path = dir.join(FRAMES);
    let mut events: Vec<RawEvent> = read_jsonl(&events_path)?;
    for e in &mut events {
        e.t = shift(e.t, manifest.events_epoch, manifest.epoch, &events_path)?;
    }
    let mut frames: Vec<Frame> = read_jsonl(&frames_path)?;
    for f in &mut frames {
        f.t = shift(f.t, manifest.frames_epoch, manifest.epoch, &frames_path)?;
    }
    let ax_path = dir.join(AXTREE);
    let axtree = if ax_path.exists() {
        read_jsonl::<AxSnapshot>(&ax_path)?
            .into_iter()
            .map(|s| (s.t, s.text))
            .collect()
    } else {
        BTreeMap::new()
    };
    let id = manifest.id.clone().unwrap_or_else(|| {
        dir.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "demo".into())
    });
    Ok(RawDemonstration {
        id,
        instruction: manifest.instruction,
        os: manifest.os,
        resolution: manifest.resolution,
        status: manifest.status,
        events,
        frames,
        axtree,
    })
}

fn jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("serializable");
        buf.push(b'\n');
    }
    buf
}

/// Write the metadata and logs of a demonstration (frame images are the
/// caller's job). Timestamps are written on the shared clock.
pub fn write_demo(dir: &Path, demo: &RawDemonstration, epoch: u64) -> Result<(), InterchangeError> {
    fs::create_dir_all(dir).map_err(|e| InterchangeError::io(dir, e))?;
    let manifest = Manifest {
        id: Some(demo.id.clone()),
        instruction: demo.instruction.clone(),
        os: demo.os,
        resolution: demo.resolution,
        epoch,
        events_epoch: None,
        frames_epoch: None,
        status: demo.status,
    };
    write_atomic(&dir.join(MANIFEST), &to_json_pretty(&manifest))?;
    write_atomic(&dir.join(EVENTS), &jsonl_bytes(&demo.events))?;
    write_atomic(&dir.join(FRAMES), &jsonl_bytes(&demo.frames))?;
    if !demo.axtree.is_empty() {
        let snaps: Vec<AxSnapshot> = demo
            .axtree
            .iter()
            .map(|(t, text)| AxSnapshot {
                t: *t,
                text: text.clone(),
            })
            .collect();
        write_atomic(&dir.join(AXTREE), &jsonl_bytes(&snaps))?;
    }
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = serde_json::to_vec_pretty(value).expect("serializable");
    buf.push(b'\n');
    buf
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory, InterchangeError> {
    read_json(path)
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), InterchangeError> {
    write_atomic(path, &to_json_pretty(traj))
}

/// Write via a sibling temp file and rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), InterchangeError> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| InterchangeError::io(&parent, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = parent.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(InterchangeError::io(path, e));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Point;

    fn demo() -> RawDemonstration {
        RawDemonstration {
            id: "d1".into(),
            instruction: "open the file".into(),
            os: Os::Ubuntu,
            resolution: (1280, 720),
            status: None,
            events: vec![RawEvent::mouse_move(5, Point::new(0.25, 0.5))],
            frames: vec![Frame {
                index: 0,
                t: 0,
                file: "frames/000000.png".into(),
                w: 1280,
                h: 720,
            }],
            axtree: BTreeMap::from([(0, "<root/>".to_string())]),
        }
    }

    #[test]
    fn round_trip_directory() {
        let dir = tempfile::tempdir().unwrap();
        let d = demo();
        write_demo(dir.path(), &d, 1_700_000_000_000).unwrap();
        assert_eq!(read_demo(dir.path()).unwrap(), d);
    }

    #[test]
    fn separate_clocks_are_shifted() {
        let dir = tempfile::tempdir().unwrap();
        let d = demo();
        write_demo(dir.path(), &d, 1000).unwrap();
        let mut m = read_manifest(dir.path()).unwrap();
        m.events_epoch = Some(1200);
        write_atomic(&dir.path().join(MANIFEST), &to_json_pretty(&m)).unwrap();
        let back = read_demo(dir.path()).unwrap();
        assert_eq!(back.events[0].t, 205);
        assert_eq!(back.frames[0].t, 0);
    }

    #[test]
    fn bad_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        write_demo(dir.path(), &demo(), 0).unwrap();
        fs::write(dir.path().join(EVENTS), "{\"t\":1}\n").unwrap();
        match read_demo(dir.path()) {
            Err(InterchangeError::Format { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }
}
