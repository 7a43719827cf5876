mod commands;
mod config;
mod corpus;
mod fixture;
mod manifest;

use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use cuakit_core::model::CotLevel;
use cuakit_cot::BackendKind;
use tracing::Level;

use crate::commands::Ctx;
use crate::config::JobConfig;

/// Bad flags, missing inputs or an invalid config; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(
    name = "cuakit",
    version,
    about = "Computer-use trajectory processing and offline evaluation"
)]
struct Cli {
    /// TOML job config; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for synthetic fixture generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Mock,
    Http,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level3 {
    L1,
    L2,
    L3,
    Mixed,
}

#[derive(Subcommand)]
enum Command {
    /// Check raw demonstrations; findings go to --out or stdout.
    Validate {
        /// A demonstration directory or a directory of them.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compress raw events into agent actions.
    Reduce {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// A file for one demonstration, else a directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pair reduced actions with keyframes and append the terminal step.
    Align {
        /// A trajectory file or directory.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Demonstration corpus root.
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize verdicts, reasoning, summaries and privacy levels.
    Annotate {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        backend: Option<Backend>,
        /// Response cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Where cue images go (default: next to --out).
        #[arg(long)]
        cues: Option<PathBuf>,
    },
    /// Write chat-format training samples as JSON lines.
    Emit {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        level: Option<Level3>,
        /// Screenshots per sample.
        #[arg(long)]
        window: Option<usize>,
        /// Prefix for image references (default: relative to the corpus root).
        #[arg(long)]
        image_root: Option<PathBuf>,
        /// Keep steps the reflector did not mark correct.
        #[arg(long)]
        keep_flagged: bool,
    },
    /// Score predictions against a benchmark.
    Eval {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
    },
    /// Pass@n and run averages from a run matrix or repeated eval reports.
    Passn {
        #[arg(long = "in", conflicts_with = "reports")]
        input: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "")]
        label: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Action-type statistics of a benchmark or trajectory set.
    Stats {
        #[arg(long, conflicts_with = "input")]
        bench: Option<PathBuf>,
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an eval or Pass@n report.
    Report {
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// md or json
        #[arg(long, default_value = "md")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a seeded synthetic corpus with a benchmark and predictions.
    SynthFixture {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        count: u64,
        #[arg(long)]
        min_actions: Option<usize>,
        #[arg(long)]
        max_actions: Option<usize>,
    },
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = JobConfig::load(cli.config.as_deref())?;
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let p = &mut cfg.paths;
    match &cli.command {
        Command::Validate { input, out }
        | Command::Reduce { input, out }
        | Command::Emit { input, out, .. }
        | Command::Report { input, out, .. } => {
            set(&mut p.input, input.clone());
            set(&mut p.output, out.clone());
        }
        Command::Align { input, demos, out } => {
            set(&mut p.input, input.clone());
            set(&mut p.demos, demos.clone());
            set(&mut p.output, out.clone());
        }
        Command::Annotate {
            input,
            demos,
            out,
            cache,
            ..
        } => {
            set(&mut p.input, input.clone());
            set(&mut p.demos, demos.clone());
            set(&mut p.output, out.clone());
            set(&mut p.cache, cache.clone());
        }
        Command::Passn { input, out, .. } | Command::Stats { input, out, .. } => {
            set(&mut p.input, input.clone());
            set(&mut p.output, out.clone());
        }
        Command::Eval { out, .. } | Command::SynthFixture { out, .. } => {
            set(&mut p.output, out.clone())
        }
    }
    match &cli.command {
        Command::Annotate {
            backend: Some(b), ..
        } => {
            cfg.backend.kind = match b {
                Backend::Mock => BackendKind::Mock,
                Backend::Http => BackendKind::Http,
                Backend::Replay => BackendKind::Replay,
            }
        }
        Command::Emit {
            level,
            window,
            keep_flagged,
            ..
        } => {
            if let Some(l) = level {
                cfg.sample.level = match l {
                    Level3::L1 => Some(CotLevel::L1),
                    Level3::L2 => Some(CotLevel::L2),
                    Level3::L3 => Some(CotLevel::L3),
                    Level3::Mixed => None,
                };
            }
            if let Some(w) = window {
                cfg.sample.history_images = *w;
            }
            if *keep_flagged {
                cfg.sample.drop_flagged_steps = false;
            }
        }
        _ => {}
    }
    cfg.check()?;
    let pool = cfg.pool()?;
    let ctx = Ctx { cfg, pool };
    match cli.command {
        Command::Validate { .. } => commands::validate(&ctx),
        Command::Reduce { .. } => commands::reduce_cmd(&ctx),
        Command::Align { .. } => commands::align(&ctx),
        Command::Annotate { cues, .. } => commands::annotate(&ctx, commands::AnnotateArgs { cues }),
        Command::Emit { image_root, .. } => commands::emit(
            &ctx,
            commands::EmitArgs {
                image_root: image_root.unwrap_or_default(),
            },
        ),
        Command::Eval {
            bench,
            preds,
            label,
            ..
        } => commands::eval(
            &ctx,
            commands::EvalArgs {
                bench,
                preds,
                label,
            },
        ),
        Command::Passn { reports, label, .. } => {
            commands::passn(&ctx, commands::PassArgs { reports, label })
        }
        Command::Stats { bench, .. } => commands::stats(&ctx, bench),
        Command::Report { format, .. } => commands::report(&ctx, &format),
        Command::SynthFixture {
            count,
            min_actions,
            max_actions,
            ..
        } => commands::synth_fixture(
            &ctx,
            commands::SynthArgs {
                count,
                min_actions,
                max_actions,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => Level::ERROR,
        (false, 0) => Level::INFO,
        (false, 1) => Level::DEBUG,
        _ => Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .with_target(false)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let usage = e.downcast_ref::<UsageError>().is_some();
            eprintln!("error: {e:#}");
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
