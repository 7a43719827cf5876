//! Corpus statistics: task counts, step counts and action-type shares.

use std::collections::BTreeMap;

use cuakit_core::model::{Os, Trajectory};
use serde::{Deserialize, Serialize};

use crate::gold::BenchTask;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeShare {
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub tasks: usize,
    pub steps: usize,
    pub avg_steps: f64,
    pub types: BTreeMap<String, TypeShare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub overall: Distribution,
    pub per_os: BTreeMap<Os, Distribution>,
}

fn distribution<'a>(items: impl Iterator<Item = &'a [&'static str]>) -> Distribution {
    let mut tasks = 0;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for types in items {
        tasks += 1;
        for t in types {
            *counts.entry(t.to_string()).or_insert(0) += 1;
        }
    }
    let steps: usize = counts.values().sum();
    Distribution {
        tasks,
        steps,
        avg_steps: if tasks == 0 {
            0.0
        } else {
            steps as f64 / tasks as f64
        },
        types: counts
            .into_iter()
            .map(|(k, count)| {
                let percent = 100.0 * count as f64 / steps as f64;
                (k, TypeShare { count, percent })
            })
            .collect(),
    }
}

/// Statistics over `(os, step action types)` items.
pub fn corpus_stats(items: &[(Os, Vec<&'static str>)]) -> Result<CorpusStats, BenchError> {
    if items.is_empty() {
        return Err(BenchError::Input("empty corpus".into()));
    }
    let overall = distribution(items.iter().map(|(_, t)| t.as_slice()));
    let mut oses: Vec<Os> = items.iter().map(|(o, _)| *o).collect();
    oses.sort();
    oses.dedup();
    let per_os = oses
        .into_iter()
        .map(|os| {
            let d = distribution(
                items
                    .iter()
                    .filter(|(o, _)| *o == os)
                    .map(|(_, t)| t.as_slice()),
            );
            (os, d)
        })
        .collect();
    Ok(CorpusStats { overall, per_os })
}

/// Benchmark steps are typed by their first gold option.
pub fn task_stats(tasks: &[BenchTask]) -> Result<CorpusStats, BenchError> {
    let items: Vec<(Os, Vec<&'static str>)> = tasks
        .iter()
        .map(|t| (t.os, t.steps.iter().map(|s| s.type_name()).collect()))
        .collect();
    corpus_stats(&items)
}

pub fn trajectory_stats(trajs: &[Trajectory]) -> Result<CorpusStats, BenchError> {
    let items: Vec<(Os, Vec<&'static str>)> = trajs
        .iter()
        .map(|t| (t.os, t.steps.iter().map(|s| s.action.type_name()).collect()))
        .collect();
    corpus_stats(&items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn averages_and_shares() {
        let items = vec![
            (Os::Windows, vec!["click", "click", "write", "terminate"]),
            (
                Os::Macos,
                vec!["click", "click", "click", "write", "click", "terminate"],
            ),
        ];
        let s = corpus_stats(&items).unwrap();
        assert_eq!(s.overall.avg_steps, 5.0);
        assert_eq!(s.overall.types["click"].count, 6);
        assert_eq!(s.per_os[&Os::Windows].types["click"].percent, 50.0);

        let s = corpus_stats(&[(Os::Ubuntu, vec!["click", "click", "click", "write"])]).unwrap();
        assert_eq!(s.overall.types["click"].percent, 75.0);
        assert_eq!(s.overall.types["write"].percent, 25.0);
        assert!(corpus_stats(&[]).is_err());
    }
}
