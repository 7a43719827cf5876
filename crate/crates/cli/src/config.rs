//! Job configuration: defaults, an optional TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use cuakit_bench::MatcherConfig;
use cuakit_core::aligner::AlignerConfig;
use cuakit_core::reducer::ReducerConfig;
use cuakit_cot::{BackendConfig, SampleConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::UsageError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Root of the demonstration corpus; trajectories name their demo
    /// directory relative to it.
    pub demos: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub workers: usize,
    pub seed: u64,
    pub paths: Paths,
    pub reducer: ReducerConfig,
    pub aligner: AlignerConfig,
    pub sample: SampleConfig,
    pub matcher: MatcherConfig,
    pub backend: BackendConfig,
}

impl Default for JobConfig {
    fn default() -> Self {
        JobConfig {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            seed: 0,
            paths: Paths::default(),
            reducer: ReducerConfig::default(),
            aligner: AlignerConfig::default(),
            sample: SampleConfig::default(),
            matcher: MatcherConfig::default(),
            backend: BackendConfig::default(),
        }
    }
}

impl JobConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(JobConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        let cfg: JobConfig = toml::from_str(&text)
            .map_err(|e| UsageError(format!("config {}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn check(&self) -> anyhow::Result<()> {
        let bad = |m: String| anyhow::Error::new(UsageError(m));
        if self.workers < 1 {
            return Err(bad("workers must be at least 1".into()));
        }
        self.reducer
            .check()
            .map_err(|e| bad(format!("reducer: {e}")))?;
        self.aligner
            .check()
            .map_err(|e| bad(format!("aligner: {e}")))?;
        self.sample
            .check()
            .map_err(|e| bad(format!("sample: {e}")))?;
        if self.backend.attempts < 1 {
            return Err(bad("backend: attempts must be at least 1".into()));
        }
        let p = &self.paths;
        let set: Vec<&PathBuf> = [&p.input, &p.output, &p.demos, &p.cache]
            .into_iter()
            .flatten()
            .collect();
        for (i, a) in set.iter().enumerate() {
            if set[i + 1..].contains(a) {
                return Err(bad(format!("path {} is used twice", a.display())));
            }
        }
        Ok(())
    }

    /// Canonical JSON of the effective config without the worker count,
    /// which never changes outputs.
    pub fn hashed_view(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("workers");
        v
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(
            serde_json::to_vec(&self.hashed_view()).expect("json"),
        ))
    }

    pub fn pool(&self) -> anyhow::Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .context("building worker pool")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_sections_override_defaults() {
        let cfg: JobConfig = toml::from_str(
            "workers = 2\n[aligner]\ndiff_threshold = 0.05\n[sample]\nlevel = \"L2\"\nhistory_images = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.workers, 2);
        assert_eq!(cfg.aligner.diff_threshold, 0.05);
        assert_eq!(cfg.aligner.idle_gap, AlignerConfig::default().idle_gap);
        assert_eq!(cfg.sample.history_images, 2);
        assert!(toml::from_str::<JobConfig>("wokers = 2").is_err());
        assert!(toml::from_str::<JobConfig>("[reducer]\ndouble_click_ms = 5").is_err());
        assert!(toml::from_str::<JobConfig>("[aligner]\nthreshold = 0.1").is_err());
    }

    #[test]
    fn hash_ignores_workers() {
        let a = JobConfig {
            workers: 1,
            ..Default::default()
        };
        let b = JobConfig {
            workers: 8,
            ..Default::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = JobConfig { seed: 1, ..a };
        assert_ne!(c.hash(), b.hash());
    }

    #[test]
    fn duplicate_paths_rejected() {
        let mut cfg = JobConfig::default();
        cfg.paths.input = Some("a".into());
        cfg.paths.output = Some("a".into());
        assert!(cfg.check().is_err());
    }
}
