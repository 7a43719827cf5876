//! Markdown and JSON rendering of evaluation and Pass@n reports.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::eval::EvalReport;
use crate::gold::Category;
use crate::passn::{pass_at_n, pass_at_n_unbiased, run_average, RunMatrix};
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Json,
}

impl std::str::FromStr for Format {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "md" | "markdown" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            other => Err(BenchError::Input(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassAt {
    pub n: usize,
    /// Solved within the first `n` runs.
    pub pass: f64,
    pub unbiased: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassReport {
    pub label: String,
    pub tasks: usize,
    pub run_srs: Vec<f64>,
    pub average: f64,
    pub pass_at: Vec<PassAt>,
}

pub fn pass_report(m: &RunMatrix) -> Result<PassReport, BenchError> {
    m.check()?;
    let run_srs = m.run_srs();
    let pass_at = (1..=m.runs.len())
        .map(|n| {
            Ok(PassAt {
                n,
                pass: pass_at_n(m, n)?,
                unbiased: pass_at_n_unbiased(m, n)?,
            })
        })
        .collect::<Result<_, BenchError>>()?;
    Ok(PassReport {
        label: m.label.clone(),
        tasks: m.tasks(),
        average: run_average(&run_srs)?,
        run_srs,
        pass_at,
    })
}

pub enum Report<'a> {
    Eval(&'a EvalReport),
    Pass(&'a [PassReport]),
}

fn sr(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn eval_markdown(r: &EvalReport) -> String {
    let mut s = String::new();
    let cat = |c: Category| r.categories.get(&c).and_then(|st| st.sr);
    let label = if r.label.is_empty() {
        "model"
    } else {
        &r.label
    };
    writeln!(s, "# Step success rate\n").unwrap();
    writeln!(s, "| Model | Coord. SR | Content SR | Func. SR | Avg. SR |").unwrap();
    writeln!(s, "|---|---:|---:|---:|---:|").unwrap();
    writeln!(
        s,
        "| {label} | {} | {} | {} | {:.2} |",
        sr(cat(Category::Coord)),
        sr(cat(Category::Content)),
        sr(cat(Category::Function)),
        r.avg_sr
    )
    .unwrap();
    writeln!(s, "\n| Category | Steps | Successes |\n|---|---:|---:|").unwrap();
    for (c, st) in &r.categories {
        writeln!(s, "| {c:?} | {} | {} |", st.steps, st.successes).unwrap();
    }
    writeln!(s, "| Total | {} | {} |", r.total_steps, r.successes).unwrap();
    writeln!(s, "\n## Action types\n\n| Type | Steps |\n|---|---:|").unwrap();
    for (t, n) in &r.action_counts {
        writeln!(s, "| {t} | {n} |").unwrap();
    }
    writeln!(
        s,
        "\n## Tasks\n\n| Task | OS | Steps | Successes |\n|---|---|---:|---:|"
    )
    .unwrap();
    for t in &r.tasks {
        writeln!(
            s,
            "| {} | {} | {} | {} |",
            t.id,
            t.os.as_str(),
            t.steps.len(),
            t.successes
        )
        .unwrap();
    }
    s
}

fn pass_markdown(rows: &[PassReport]) -> String {
    let mut s = String::from("# Repeated runs\n\n");
    let runs = rows.iter().map(|r| r.run_srs.len()).max().unwrap_or(0);
    let mut header = String::from("| Steps |");
    let mut rule = String::from("|---|");
    for i in 1..=runs {
        header.push_str(&format!(" Run {i} |"));
        rule.push_str("---:|");
    }
    header.push_str(&format!(" Avg. | Pass@{runs} |"));
    rule.push_str("---:|---:|");
    writeln!(s, "{header}\n{rule}").unwrap();
    for r in rows {
        let mut line = format!("| {} |", r.label);
        for i in 0..runs {
            line.push_str(&format!(" {} |", sr(r.run_srs.get(i).copied())));
        }
        let last = r.pass_at.last().map(|p| p.pass);
        line.push_str(&format!(" {:.2} | {} |", r.average, sr(last)));
        writeln!(s, "{line}").unwrap();
    }
    s
}

/// Deterministic rendering; JSON output ends with a newline.
pub fn render_report(report: &Report<'_>, format: Format) -> String {
    match (report, format) {
        (Report::Eval(r), Format::Markdown) => eval_markdown(r),
        (Report::Pass(rows), Format::Markdown) => pass_markdown(rows),
        (Report::Eval(r), Format::Json) => json(r),
        (Report::Pass(rows), Format::Json) => json(rows),
    }
}

fn json<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}
