//! Offline step-matching evaluation, corpus statistics and Pass@n
//! aggregation for computer-use agents.

pub mod eval;
pub mod gold;
pub mod passn;
pub mod report;
pub mod stats;

use thiserror::Error;

pub use eval::{
    evaluate_benchmark, evaluate_task, group_predictions, EvalReport, PredictionRecord, StepResult,
};
pub use gold::{
    levenshtein, match_step, normalized_edit_distance, BBox, BenchStep, BenchTask, Category,
    Direction, GoldOption, MatcherConfig,
};
pub use passn::{pass_at_n, pass_at_n_unbiased, run_average, RunMatrix};
pub use report::{pass_report, render_report, Format, PassReport, Report};
pub use stats::{corpus_stats, task_stats, trajectory_stats, CorpusStats};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("{0}")]
    Input(String),
}

impl BenchError {
    pub fn code(&self) -> &'static str {
        "input_error"
    }
}
