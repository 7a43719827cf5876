use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use cuakit_bench::{
    evaluate_benchmark, group_predictions, pass_report, render_report, task_stats,
    trajectory_stats, BenchTask, EvalReport, Format, PassReport, PredictionRecord, Report,
    RunMatrix,
};
use cuakit_core::aligner::{build_trajectory, predecessor_distances, LumaMad};
use cuakit_core::interchange::{read_demo, to_json_pretty, write_atomic, MANIFEST};
use cuakit_core::model::{Span, Step, Trajectory};
use cuakit_core::reducer::reduce;
use cuakit_core::synth::{synth_demo, SynthConfig};
use cuakit_core::validate::{has_errors, validate_dir, Finding, Severity};
use cuakit_cot::{
    emit_training_samples, Annotator, BackendKind, CachedClient, HttpClient, MockClient,
    ModelClient, RetryPolicy,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use tracing::{info, warn};

use crate::config::JobConfig;
use crate::corpus::{
    demo_dirs, existing, jsonl, read_json, read_lines, read_trajs, required, write_trajs,
};
use crate::fixture;
use crate::manifest::Recorder;
use crate::UsageError;

pub struct Ctx {
    pub cfg: JobConfig,
    pub pool: rayon::ThreadPool,
}

fn emit_stdout(bytes: &[u8]) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

/// Write to `out` atomically with a manifest, or to stdout.
fn deliver(
    ctx: &Ctx,
    rec: Recorder,
    out: Option<&Path>,
    bytes: &[u8],
    summary: serde_json::Value,
) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            write_atomic(path, bytes)?;
            rec.finish(&ctx.cfg, &[path], summary)
        }
        None => emit_stdout(bytes),
    }
}

fn fail_all(what: &str, errors: Vec<anyhow::Error>) -> anyhow::Result<()> {
    if errors.is_empty() {
        return Ok(());
    }
    for e in &errors {
        tracing::error!("{e:#}");
    }
    bail!(
        "{what} failed for {} item(s); no output written",
        errors.len()
    )
}

fn split<T>(results: Vec<anyhow::Result<T>>) -> (Vec<T>, Vec<anyhow::Error>) {
    let mut ok = Vec::with_capacity(results.len());
    let mut err = Vec::new();
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => err.push(e),
        }
    }
    (ok, err)
}

#[derive(Serialize)]
struct DemoFindings {
    demo: String,
    findings: Vec<Finding>,
}

pub fn validate(ctx: &Ctx) -> anyhow::Result<()> {
    let input = existing(&required(ctx.cfg.paths.input.clone(), "--in")?)?;
    let (root, names) = demo_dirs(&input)?;
    let mut rec = Recorder::new("validate");
    rec.input(&input);
    let reports: Vec<DemoFindings> = ctx.pool.install(|| {
        names
            .par_iter()
            .map(|n| DemoFindings {
                demo: n.clone(),
                findings: validate_dir(&root.join(n)).1,
            })
            .collect()
    });
    let mut errors = 0;
    let mut warnings = 0;
    for r in &reports {
        for f in &r.findings {
            match f.severity {
                Severity::Error => errors += 1,
                Severity::Warn => warnings += 1,
            }
            warn!(demo = %r.demo, "{f}");
        }
    }
    info!(demos = reports.len(), errors, warnings, "validated");
    let summary = json!({"demos": reports.len(), "errors": errors, "warnings": warnings});
    deliver(
        ctx,
        rec,
        ctx.cfg.paths.output.as_deref(),
        &to_json_pretty(&reports),
        summary,
    )?;
    if errors > 0 {
        bail!("{errors} validation error(s)");
    }
    Ok(())
}

pub fn reduce_cmd(ctx: &Ctx) -> anyhow::Result<()> {
    let input = existing(&required(ctx.cfg.paths.input.clone(), "--in")?)?;
    let out = required(ctx.cfg.paths.output.clone(), "--out")?;
    let single = input.join(MANIFEST).is_file();
    let (root, names) = demo_dirs(&input)?;
    let mut rec = Recorder::new("reduce");
    rec.input(&input);
    let results: Vec<anyhow::Result<(Trajectory, usize)>> = ctx.pool.install(|| {
        names
            .par_iter()
            .map(|name| {
                let (demo, findings) = validate_dir(&root.join(name));
                for f in findings.iter().filter(|f| f.severity == Severity::Warn) {
                    warn!(demo = %name, "{f}");
                }
                if has_errors(&findings) {
                    let first = findings
                        .iter()
                        .find(|f| f.severity == Severity::Error)
                        .expect("error");
                    bail!("{name}: {first}");
                }
                let demo = demo.expect("valid demo loads");
                let reduced = reduce(&demo, &ctx.cfg.reducer);
                let steps = reduced
                    .steps
                    .iter()
                    .map(|(a, span)| Step::new(a.clone(), Some(*span)))
                    .collect();
                let traj = Trajectory {
                    id: demo.id.clone(),
                    instruction: demo.instruction.clone(),
                    refined_instruction: None,
                    os: demo.os,
                    resolution: demo.resolution,
                    demo: Some(name.clone()),
                    alignment: None,
                    steps,
                    summary: None,
                    privacy: None,
                    annotation_errors: Default::default(),
                };
                Ok((traj, reduced.dropped.len()))
            })
            .collect()
    });
    let (ok, errs) = split(results);
    fail_all("reduce", errs)?;
    let actions: usize = ok.iter().map(|(t, _)| t.steps.len()).sum();
    let dropped: usize = ok.iter().map(|(_, d)| d).sum();
    let trajs: Vec<Trajectory> = ok.into_iter().map(|(t, _)| t).collect();
    write_trajs(&out, !single, &trajs)?;
    info!(
        demos = trajs.len(),
        actions,
        dropped_events = dropped,
        "reduced"
    );
    rec.finish(
        &ctx.cfg,
        &[&out],
        json!({"trajectories": trajs.len(), "actions": actions, "dropped_events": dropped}),
    )
}

fn demo_root(ctx: &Ctx) -> anyhow::Result<PathBuf> {
    existing(&required(ctx.cfg.paths.demos.clone(), "--demos")?)
}

/// The demonstration directory of a trajectory; `root` may also be the
/// directory itself.
fn demo_dir(root: &Path, t: &Trajectory) -> anyhow::Result<PathBuf> {
    let name = t
        .demo
        .as_deref()
        .ok_or_else(|| anyhow!("trajectory {} names no demonstration", t.id))?;
    let nested = root.join(name);
    if nested.join(MANIFEST).is_file() {
        return Ok(nested);
    }
    if root.join(MANIFEST).is_file() {
        return Ok(root.to_path_buf());
    }
    bail!("demonstration {name} not found under {}", root.display())
}

fn align_one(ctx: &Ctx, root: &Path, t: &Trajectory) -> anyhow::Result<Trajectory> {
    let dir = demo_dir(root, t)?;
    let demo = read_demo(&dir)?;
    let reduced: Vec<(cuakit_core::model::AgentAction, Span)> = t
        .steps
        .iter()
        .map(|s| s.span.map(|sp| (s.action.clone(), sp)))
        .collect::<Option<_>>()
        .ok_or_else(|| anyhow!("trajectory {} is already aligned", t.id))?;
    let metric = LumaMad::new(ctx.cfg.aligner.downsample);
    let dist = predecessor_distances(&dir, &demo.frames, &metric)?;
    let mut out = build_trajectory(&demo, &reduced, &ctx.cfg.aligner, &dist)
        .with_context(|| format!("trajectory {}", t.id))?;
    out.id = t.id.clone();
    out.demo = t.demo.clone();
    out.check()
        .with_context(|| format!("trajectory {}", t.id))?;
    Ok(out)
}

pub fn align(ctx: &Ctx) -> anyhow::Result<()> {
    let input = existing(&required(ctx.cfg.paths.input.clone(), "--in")?)?;
    let out = required(ctx.cfg.paths.output.clone(), "--out")?;
    let root = demo_root(ctx)?;
    let set = read_trajs(&input)?;
    let mut rec = Recorder::new("align");
    rec.input(&input);
    rec.input(&root);
    let results: Vec<_> = ctx.pool.install(|| {
        set.items
            .par_iter()
            .map(|t| align_one(ctx, &root, t))
            .collect()
    });
    let (trajs, errs) = split(results);
    fail_all("align", errs)?;
    write_trajs(&out, set.from_dir, &trajs)?;
    info!(trajectories = trajs.len(), "aligned");
    rec.finish(&ctx.cfg, &[&out], json!({"trajectories": trajs.len()}))
}

pub struct AnnotateArgs {
    pub cues: Option<PathBuf>,
}

pub fn annotate(ctx: &Ctx, args: AnnotateArgs) -> anyhow::Result<()> {
    let input = existing(&required(ctx.cfg.paths.input.clone(), "--in")?)?;
    let out = required(ctx.cfg.paths.output.clone(), "--out")?;
    let root = demo_root(ctx)?;
    let backend = &ctx.cfg.backend;
    let cache = ctx.cfg.paths.cache.clone();
    if backend.kind == BackendKind::Replay && cache.is_none() {
        return Err(UsageError("the replay backend needs --cache".into()).into());
    }
    let set = read_trajs(&input)?;
    let mut rec = Recorder::new("annotate");
    rec.input(&input);
    rec.input(&root);

    let inner: Option<Box<dyn ModelClient>> = match backend.kind {
        BackendKind::Mock => Some(Box::new(MockClient::new())),
        BackendKind::Http => Some(Box::new(HttpClient::new(backend)?)),
        BackendKind::Replay => None,
    };
    let (cached, plain) = match (cache.as_ref(), inner) {
        (Some(dir), Some(inner)) => (Some(CachedClient::new(dir, inner)?), None),
        (Some(dir), None) => (Some(CachedClient::replay(dir)?), None),
        (None, inner) => (None, inner),
    };
    let client: &dyn ModelClient = match (&cached, &plain) {
        (Some(c), _) => c,
        (None, Some(p)) => p.as_ref(),
        (None, None) => unreachable!("replay without cache is rejected above"),
    };
    // A replay miss never turns into a hit on retry.
    let retry = RetryPolicy {
        attempts: if backend.kind == BackendKind::Replay {
            1
        } else {
            backend.attempts
        },
        backoff_ms: backend.backoff_ms,
    };
    let cues = args.cues.unwrap_or_else(|| {
        let name = out
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        out.with_file_name(format!("{name}.cues"))
    });
    let annotator = Annotator::new(client, &root, &cues).with_retry(retry);
    let results: Vec<anyhow::Result<Trajectory>> = ctx.pool.install(|| {
        set.items
            .par_iter()
            .map(|t| {
                if t.check().is_err() {
                    bail!("trajectory {} is not aligned", t.id);
                }
                annotator
                    .annotate(t)
                    .map_err(|e| anyhow!("trajectory {}: {}: {e}", t.id, e.code()))
            })
            .collect()
    });
    let (trajs, errs) = split(results);
    fail_all("annotate", errs)?;
    let failed_steps: usize = trajs.iter().map(|t| t.annotation_errors.len()).sum();
    let flagged = trajs
        .iter()
        .flat_map(|t| &t.steps)
        .filter(|s| {
            s.verdict
                .as_ref()
                .is_some_and(|v| v.status != cuakit_core::model::VerdictStatus::Correct)
        })
        .count();
    write_trajs(&out, set.from_dir, &trajs)?;
    let (hits, misses) = cached.as_ref().map_or((0, 0), |c| (c.hits(), c.misses()));
    info!(
        trajectories = trajs.len(),
        failed_steps,
        flagged,
        cache_hits = hits,
        cache_misses = misses,
        "annotated"
    );
    rec.finish(
        &ctx.cfg,
        &[&out],
        json!({"trajectories": trajs.len(), "failed_steps": failed_steps, "flagged_steps": flagged}),
    )
}

pub struct EmitArgs {
    pub image_root: PathBuf,
}

pub fn emit(ctx: &Ctx, args: EmitArgs) -> anyhow::Result<()> {
    let input = existing(&required(ctx.cfg.paths.input.clone(), "--in")?)?;
    let out = required(ctx.cfg.paths.output.clone(), "--out")?;
    let set = read_trajs(&input)?;
    let mut rec = Recorder::new("emit");
    rec.input(&input);
    let results: Vec<anyhow::Result<cuakit_cot::Emitted>> = ctx.pool.install(|| {
        set.items
            .par_iter()
            .map(|t| {
                emit_training_samples(t, &ctx.cfg.sample, &args.image_root)
                    .map_err(|e| anyhow!("trajectory {}: {}: {e}", t.id, e.code()))
            })
            .collect()
    });
    let (emitted, errs) = split(results);
    fail_all("emit", errs)?;
    let mut samples = Vec::new();
    let mut skipped: BTreeMap<String, usize> = BTreeMap::new();
    for e in emitted {
        samples.extend(e.samples);
        for s in e.skipped {
            *skipped.entry(s.reason).or_default() += 1;
        }
    }
    write_atomic(&out, &jsonl(&samples))?;
    info!(samples = samples.len(), ?skipped, "emitted");
    rec.finish(
        &ctx.cfg,
        &[&out],
        json!({"samples": samples.len(), "skipped": skipped}),
    )
}

pub struct EvalArgs {
    pub bench: PathBuf,
    pub preds: PathBuf,
    pub label: Option<String>,
}

pub fn eval(ctx: &Ctx, args: EvalArgs) -> anyhow::Result<()> {
    let bench = existing(&args.bench)?;
    let preds = existing(&args.preds)?;
    let mut rec = Recorder::new("eval");
    rec.input(&bench);
    rec.input(&preds);
    let tasks: Vec<BenchTask> = read_json(&bench)?;
    let records: Vec<PredictionRecord> = read_lines(&preds)?;
    let grouped = group_predictions(records)?;
    let label = args.label.unwrap_or_else(|| {
        preds
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let report = ctx
        .pool
        .install(|| evaluate_benchmark(&label, &tasks, &grouped, &ctx.cfg.matcher))?;
    report
        .check_consistency()
        .map_err(|e| anyhow!("report inconsistent: {e}"))?;
    info!(
        tasks = report.tasks.len(),
        steps = report.total_steps,
        avg_sr = report.avg_sr,
        "evaluated"
    );
    let bytes = render_report(&Report::Eval(&report), Format::Json);
    let summary =
        json!({"tasks": report.tasks.len(), "steps": report.total_steps, "avg_sr": report.avg_sr});
    deliver(
        ctx,
        rec,
        ctx.cfg.paths.output.as_deref(),
        bytes.as_bytes(),
        summary,
    )
}

pub struct PassArgs {
    pub reports: Vec<PathBuf>,
    pub label: String,
}

/// One run matrix from repeated evaluation reports; a task counts as
/// solved in a run when every one of its steps succeeded.
fn matrix_from_reports(label: &str, reports: &[EvalReport]) -> anyhow::Result<RunMatrix> {
    let ids: Vec<&str> = reports[0].tasks.iter().map(|t| t.id.as_str()).collect();
    let mut runs = Vec::with_capacity(reports.len());
    for r in reports {
        let these: Vec<&str> = r.tasks.iter().map(|t| t.id.as_str()).collect();
        if these != ids {
            bail!("report {} covers different tasks", r.label);
        }
        runs.push(
            r.tasks
                .iter()
                .map(|t| t.successes == t.steps.len())
                .collect(),
        );
    }
    Ok(RunMatrix::new(label, runs)?)
}

pub fn passn(ctx: &Ctx, args: PassArgs) -> anyhow::Result<()> {
    let mut rec = Recorder::new("passn");
    let matrices = if args.reports.is_empty() {
        let input = existing(&required(ctx.cfg.paths.input.clone(), "--in or --reports")?)?;
        rec.input(&input);
        let v: serde_json::Value = read_json(&input)?;
        if v.is_array() {
            serde_json::from_value::<Vec<RunMatrix>>(v)?
        } else {
            vec![serde_json::from_value::<RunMatrix>(v)?]
        }
    } else {
        let mut reports = Vec::new();
        for p in &args.reports {
            let p = existing(p)?;
            rec.input(&p);
            reports.push(read_json::<EvalReport>(&p)?);
        }
        vec![matrix_from_reports(&args.label, &reports)?]
    };
    let rows: Vec<PassReport> = matrices.iter().map(pass_report).collect::<Result<_, _>>()?;
    let bytes = render_report(&Report::Pass(&rows), Format::Json);
    deliver(
        ctx,
        rec,
        ctx.cfg.paths.output.as_deref(),
        bytes.as_bytes(),
        json!({"rows": rows.len()}),
    )
}

pub fn stats(ctx: &Ctx, bench: Option<PathBuf>) -> anyhow::Result<()> {
    let mut rec = Recorder::new("stats");
    let stats = match (bench, ctx.cfg.paths.input.clone()) {
        (Some(b), None) => {
            let b = existing(&b)?;
            rec.input(&b);
            task_stats(&read_json::<Vec<BenchTask>>(&b)?)?
        }
        (None, Some(i)) => {
            let i = existing(&i)?;
            rec.input(&i);
            trajectory_stats(&read_trajs(&i)?.items)?
        }
        _ => return Err(UsageError("give exactly one of --bench and --in".into()).into()),
    };
    deliver(
        ctx,
        rec,
        ctx.cfg.paths.output.as_deref(),
        &to_json_pretty(&stats),
        serde_json::Value::Null,
    )
}

pub fn report(ctx: &Ctx, format: &str) -> anyhow::Result<()> {
    let input = existing(&required(ctx.cfg.paths.input.clone(), "--in")?)?;
    let format: Format = format
        .parse()
        .map_err(|e: cuakit_bench::BenchError| UsageError(e.to_string()))?;
    let mut rec = Recorder::new("report");
    rec.input(&input);
    let v: serde_json::Value = read_json(&input)?;
    let text = if v.is_array() {
        let rows: Vec<PassReport> = serde_json::from_value(v).context("parsing Pass@n rows")?;
        render_report(&Report::Pass(&rows), format)
    } else {
        let r: EvalReport = serde_json::from_value(v).context("parsing evaluation report")?;
        r.check_consistency()
            .map_err(|e| anyhow!("report inconsistent: {e}"))?;
        render_report(&Report::Eval(&r), format)
    };
    deliver(
        ctx,
        rec,
        ctx.cfg.paths.output.as_deref(),
        text.as_bytes(),
        serde_json::Value::Null,
    )
}

pub struct SynthArgs {
    pub count: u64,
    pub min_actions: Option<usize>,
    pub max_actions: Option<usize>,
}

pub const FIXTURE_DEMOS: &str = "demos";

pub fn synth_fixture(ctx: &Ctx, args: SynthArgs) -> anyhow::Result<()> {
    let out = required(ctx.cfg.paths.output.clone(), "--out")?;
    let mut scfg = SynthConfig::default();
    scfg.min_actions = args.min_actions.unwrap_or(scfg.min_actions);
    scfg.max_actions = args.max_actions.unwrap_or(scfg.max_actions);
    if scfg.min_actions < 1 || scfg.min_actions > scfg.max_actions {
        return Err(UsageError("need 1 <= min-actions <= max-actions".into()).into());
    }
    if args.count == 0 {
        return Err(UsageError("count must be positive".into()).into());
    }
    let seed = ctx.cfg.seed;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let stage = out.join(format!(".{FIXTURE_DEMOS}.{}.tmp", std::process::id()));
    if stage.exists() {
        fs::remove_dir_all(&stage)?;
    }
    let results: Vec<anyhow::Result<_>> = ctx.pool.install(|| {
        (0..args.count)
            .into_par_iter()
            .map(|i| {
                let s = synth_demo(seed, i, &scfg);
                s.write(&stage.join(&s.demo.id))?;
                Ok((
                    fixture::bench_task(&s, FIXTURE_DEMOS),
                    fixture::predictions(&s, seed, i),
                    fixture::truth(&s),
                ))
            })
            .collect()
    });
    let (items, errs) = split(results);
    if !errs.is_empty() {
        let _ = fs::remove_dir_all(&stage);
        fail_all("synth-fixture", errs)?;
    }
    let demos = out.join(FIXTURE_DEMOS);
    if demos.exists() {
        fs::remove_dir_all(&demos).with_context(|| format!("replacing {}", demos.display()))?;
    }
    fs::rename(&stage, &demos)?;
    let mut tasks = Vec::new();
    let mut preds = Vec::new();
    let mut truth = Vec::new();
    for (t, p, tr) in items {
        tasks.push(t);
        preds.extend(p);
        truth.push(tr);
    }
    let bench = out.join("bench.json");
    let preds_path = out.join("preds.jsonl");
    let truth_path = out.join("truth.jsonl");
    write_atomic(&bench, &to_json_pretty(&tasks))?;
    write_atomic(&preds_path, &jsonl(&preds))?;
    write_atomic(&truth_path, &jsonl(&truth))?;
    info!(demos = tasks.len(), seed, "synthesized");
    Recorder::new("synth-fixture").finish(
        &ctx.cfg,
        &[&out],
        json!({"demos": tasks.len(), "seed": seed, "min_actions": scfg.min_actions, "max_actions": scfg.max_actions}),
    )
}
