//! Step evaluation and benchmark aggregation.

use std::collections::BTreeMap;

use cuakit_core::response::extract_response_with;
use cuakit_core::{render_action, ParseOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gold::{match_step, BenchTask, Category, MatcherConfig};
use crate::BenchError;

/// One line of `preds.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub task_id: String,
    pub step: usize,
    pub response: String,
}

/// Group prediction records by task, rejecting duplicates.
pub fn group_predictions(
    records: impl IntoIterator<Item = PredictionRecord>,
) -> Result<BTreeMap<String, BTreeMap<usize, String>>, BenchError> {
    let mut out: BTreeMap<String, BTreeMap<usize, String>> = BTreeMap::new();
    for r in records {
        let slot = out.entry(r.task_id.clone()).or_default();
        if slot.insert(r.step, r.response).is_some() {
            return Err(BenchError::Input(format!(
                "duplicate prediction for task {} step {}",
                r.task_id, r.step
            )));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: usize,
    /// Canonical text of the parsed action; `None` is no_action.
    pub predicted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched_option: Option<usize>,
    pub success: bool,
    pub category: Category,
    /// Action type of the first gold option.
    pub gold_type: String,
}

/// Judge every step of `task` independently against its gold options.
pub fn evaluate_task(
    task: &BenchTask,
    predictions: &[String],
    cfg: &MatcherConfig,
) -> Result<Vec<StepResult>, BenchError> {
    if predictions.len() != task.steps.len() {
        return Err(BenchError::Input(format!(
            "task {}: {} predictions for {} steps",
            task.id,
            predictions.len(),
            task.steps.len()
        )));
    }
    let opts = ParseOptions {
        resolution: Some(task.resolution),
    };
    let last = task.steps.len() - 1;
    Ok(task
        .steps
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(i, (step, resp))| {
            let action = extract_response_with(resp, &opts).ok().map(|r| r.action);
            let matched = action
                .as_ref()
                .and_then(|a| match_step(a, &step.options, i == last, cfg));
            StepResult {
                step: i,
                predicted: action.as_ref().map(render_action),
                predicted_type: action.as_ref().map(|a| a.type_name().to_string()),
                matched_option: matched,
                success: matched.is_some(),
                category: step.category(),
                gold_type: step.type_name().to_string(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub id: String,
    pub os: cuakit_core::model::Os,
    pub steps: Vec<StepResult>,
    pub successes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryStat {
    pub steps: usize,
    pub successes: usize,
    /// Percentage; absent when the category has no steps.
    pub sr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub tasks: Vec<TaskResult>,
    pub categories: BTreeMap<Category, CategoryStat>,
    pub total_steps: usize,
    pub successes: usize,
    pub avg_sr: f64,
    /// Steps per gold action type.
    pub action_counts: BTreeMap<String, usize>,
}

fn pct(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

impl EvalReport {
    /// Fold per-task results, in the given order, into the aggregates.
    pub fn from_tasks(label: impl Into<String>, tasks: Vec<TaskResult>) -> Self {
        let mut cats: BTreeMap<Category, (usize, usize)> =
            Category::ALL.iter().map(|c| (*c, (0, 0))).collect();
        let mut action_counts = BTreeMap::new();
        let (mut total, mut ok) = (0, 0);
        for s in tasks.iter().flat_map(|t| &t.steps) {
            let e = cats.get_mut(&s.category).expect("all categories present");
            e.0 += 1;
            e.1 += usize::from(s.success);
            *action_counts.entry(s.gold_type.clone()).or_insert(0) += 1;
            total += 1;
            ok += usize::from(s.success);
        }
        EvalReport {
            label: label.into(),
            tasks,
            categories: cats
                .into_iter()
                .map(|(c, (n, k))| {
                    (
                        c,
                        CategoryStat {
                            steps: n,
                            successes: k,
                            sr: pct(k, n),
                        },
                    )
                })
                .collect(),
            total_steps: total,
            successes: ok,
            avg_sr: pct(ok, total).unwrap_or(0.0),
            action_counts,
        }
    }

    /// Recount everything from the step results and compare with the
    /// stored aggregates.
    pub fn check_consistency(&self) -> Result<(), String> {
        let steps: Vec<&StepResult> = self.tasks.iter().flat_map(|t| &t.steps).collect();
        if steps.len() != self.total_steps {
            return Err(format!(
                "total steps {} != {}",
                self.total_steps,
                steps.len()
            ));
        }
        let ok = steps.iter().filter(|s| s.success).count();
        if ok != self.successes {
            return Err(format!("successes {} != {ok}", self.successes));
        }
        for t in &self.tasks {
            if t.successes != t.steps.iter().filter(|s| s.success).count() {
                return Err(format!("task {} success count is stale", t.id));
            }
            for s in &t.steps {
                if s.success != s.matched_option.is_some() {
                    return Err(format!(
                        "task {} step {}: success without a match",
                        t.id, s.step
                    ));
                }
            }
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
        if !close(self.avg_sr, pct(ok, steps.len()).unwrap_or(0.0))
            || !(0.0..=100.0).contains(&self.avg_sr)
        {
            return Err(format!("avg SR {} disagrees with recount", self.avg_sr));
        }
        for c in Category::ALL {
            let n = steps.iter().filter(|s| s.category == c).count();
            let k = steps
                .iter()
                .filter(|s| s.category == c && s.success)
                .count();
            let stat = self
                .categories
                .get(&c)
                .ok_or(format!("missing category {c:?}"))?;
            let sr_ok = match (stat.sr, pct(k, n)) {
                (Some(a), Some(b)) => close(a, b),
                (None, None) => true,
                _ => false,
            };
            if stat.steps != n || stat.successes != k || !sr_ok {
                return Err(format!("category {c:?} disagrees with recount"));
            }
        }
        let counted: usize = self.action_counts.values().sum();
        if counted != steps.len() {
            return Err(format!(
                "action counts sum to {counted}, not {}",
                steps.len()
            ));
        }
        Ok(())
    }
}

/// Evaluate every task in parallel; results are folded in task-id order.
pub fn evaluate_benchmark(
    label: &str,
    tasks: &[BenchTask],
    predictions: &BTreeMap<String, BTreeMap<usize, String>>,
    cfg: &MatcherConfig,
) -> Result<EvalReport, BenchError> {
    let mut ordered: Vec<&BenchTask> = tasks.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(&b.id));
    for w in ordered.windows(2) {
        if w[0].id == w[1].id {
            return Err(BenchError::Input(format!("duplicate task id {}", w[0].id)));
        }
    }
    for id in predictions.keys() {
        if ordered.binary_search_by(|t| t.id.as_str().cmp(id)).is_err() {
            return Err(BenchError::Input(format!(
                "predictions for unknown task {id}"
            )));
        }
    }
    let results: Result<Vec<TaskResult>, BenchError> = ordered
        .par_iter()
        .map(|task| {
            task.check()?;
            let preds = predictions
                .get(&task.id)
                .ok_or_else(|| BenchError::Input(format!("task {}: no predictions", task.id)))?;
            let expected: Vec<usize> = (0..task.steps.len()).collect();
            if preds.keys().copied().collect::<Vec<_>>() != expected {
                return Err(BenchError::Input(format!(
                    "task {}: predictions cover steps {:?}, expected 0..{}",
                    task.id,
                    preds.keys().collect::<Vec<_>>(),
                    task.steps.len()
                )));
            }
            let texts: Vec<String> = preds.values().cloned().collect();
            let steps = evaluate_task(task, &texts, cfg)?;
            Ok(TaskResult {
                id: task.id.clone(),
                os: task.os,
                successes: steps.iter().filter(|s| s.success).count(),
                steps,
            })
        })
        .collect();
    Ok(EvalReport::from_tasks(label, results?))
}
