//! Pass@n and run averaging over repeated benchmark runs.

use serde::{Deserialize, Serialize};

use crate::BenchError;

/// Rows are runs, columns are tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMatrix {
    /// Step budget or other run-group label.
    #[serde(default)]
    pub label: String,
    pub runs: Vec<Vec<bool>>,
}

impl RunMatrix {
    pub fn new(label: impl Into<String>, runs: Vec<Vec<bool>>) -> Result<Self, BenchError> {
        let m = RunMatrix {
            label: label.into(),
            runs,
        };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<(), BenchError> {
        let Some(first) = self.runs.first() else {
            return Err(BenchError::Input("run matrix has no runs".into()));
        };
        if first.is_empty() {
            return Err(BenchError::Input("run matrix has no tasks".into()));
        }
        if self.runs.iter().any(|r| r.len() != first.len()) {
            return Err(BenchError::Input("run matrix is not rectangular".into()));
        }
        Ok(())
    }

    pub fn tasks(&self) -> usize {
        self.runs.first().map_or(0, Vec::len)
    }

    /// Success rate of each run, in percent.
    pub fn run_srs(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| 100.0 * r.iter().filter(|s| **s).count() as f64 / r.len() as f64)
            .collect()
    }
}

/// Mean of per-run success rates.
pub fn run_average(srs: &[f64]) -> Result<f64, BenchError> {
    if srs.is_empty() {
        return Err(BenchError::Input("no runs to average".into()));
    }
    Ok(srs.iter().sum::<f64>() / srs.len() as f64)
}

fn check_n(m: &RunMatrix, n: usize) -> Result<(), BenchError> {
    m.check()?;
    if n < 1 || n > m.runs.len() {
        return Err(BenchError::Input(format!(
            "n = {n} outside 1..={}",
            m.runs.len()
        )));
    }
    Ok(())
}

/// Percentage of tasks solved in at least one of the first `n` runs.
pub fn pass_at_n(m: &RunMatrix, n: usize) -> Result<f64, BenchError> {
    check_n(m, n)?;
    let solved = (0..m.tasks())
        .filter(|&t| m.runs[..n].iter().any(|r| r[t]))
        .count();
    Ok(100.0 * solved as f64 / m.tasks() as f64)
}

/// Unbiased estimate of pass@n from all runs: per task
/// `1 - C(r - c, n) / C(r, n)` with `c` successes among `r` runs.
pub fn pass_at_n_unbiased(m: &RunMatrix, n: usize) -> Result<f64, BenchError> {
    check_n(m, n)?;
    let r = m.runs.len();
    let mut total = 0.0;
    for t in 0..m.tasks() {
        let c = m.runs.iter().filter(|run| run[t]).count();
        let fail = if r - c < n {
            0.0
        } else {
            // C(r-c, n) / C(r, n) as a running product.
            (0..n)
                .map(|i| (r - c - i) as f64 / (r - i) as f64)
                .product()
        };
        total += 1.0 - fail;
    }
    Ok(100.0 * total / m.tasks() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn any_success_rule() {
        let m = RunMatrix::new("15", vec![vec![true], vec![false], vec![false]]).unwrap();
        assert_eq!(pass_at_n(&m, 3).unwrap(), 100.0);
        assert_eq!(pass_at_n(&m, 1).unwrap(), 100.0);
        assert!(pass_at_n(&m, 0).is_err());
        assert!(pass_at_n(&m, 4).is_err());
        assert!((pass_at_n_unbiased(&m, 1).unwrap() - 100.0 / 3.0).abs() < 1e-9);
        assert_eq!(pass_at_n_unbiased(&m, 3).unwrap(), 100.0);
    }

    #[test]
    fn ragged_matrix_rejected() {
        assert!(RunMatrix::new("", vec![vec![true, false], vec![true]]).is_err());
    }
}
