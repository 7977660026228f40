use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use step_bench::files::{read_journal, JOURNAL_FILE};
use step_bench::manifest::RunManifest;
use step_bench::report::{cmd_report, Format};
use step_bench::{bridge, files, replay, run, worlds};
use step_core::world::TextWorld;

#[derive(Parser)]
#[command(name = "step-bench", version, about = "Run, report on, and replay stepwise text-agent benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Table,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task and seed of a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; overrides the manifest's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize run results or a task,kind,score table.
    Report {
        /// Run directory, results.json, or CSV/TSV score table; repeatable.
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
        /// Directory for the report file and score curves.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a trace against the simulator and validate it.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        /// Extra world definition files.
        #[arg(long)]
        world: Vec<PathBuf>,
        /// Replay under a different seed than recorded.
        #[arg(long)]
        seed: Option<u64>,
        /// Replay against a different task than recorded.
        #[arg(long)]
        task: Option<String>,
        /// Prompt journal for the pairing check; defaults to the one beside the trace.
        #[arg(long)]
        journal: Option<PathBuf>,
    },
    /// Serve the bridge protocol on stdin/stdout from the built-in simulator.
    #[command(hide = true)]
    SimServe {
        #[arg(long)]
        world: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { manifest, out } => {
            let (m, base) = RunManifest::load(&manifest)?;
            let out = match out.or_else(|| m.out.as_ref().map(|o| base.join(o))) {
                Some(o) => o,
                None => bail!("no output directory: pass --out or set `out` in the manifest"),
            };
            let results = run::cmd_run(&m, &base, &out)?;
            for r in &results.runs {
                let scores: Vec<String> = r.attempts.iter().map(|a| a.episode_score.to_string()).collect();
                println!("{} seed {}: best {} (attempts {})", r.task_id, r.variation, r.best_score, scores.join(", "));
            }
            println!("results written to {}", out.join(run::RESULTS_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { inputs, format, out } => {
            let format = match format {
                ReportFormat::Table => Format::Table,
                ReportFormat::Csv => Format::Csv,
            };
            let report = cmd_report(&inputs, out.as_deref())?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let text = report.render(format);
            print!("{text}");
            if let Some(out) = out {
                let name = match format {
                    Format::Table => "report.txt",
                    Format::Csv => "report.csv",
                };
                files::write_atomic(&out.join(name), text.as_bytes())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Replay { trace, world, seed, task, journal } => {
            let mut sim = TextWorld::new(worlds::library(&world)?);
            let journal_path = journal.or_else(|| trace.parent().map(|d| d.join(JOURNAL_FILE)).filter(|p| p.exists()));
            let entries = journal_path.map(|p| read_journal(&p)).transpose()?;
            let report = replay::cmd_replay(&trace, &mut sim, task.as_deref(), seed, entries.as_deref())?;
            println!("{report}");
            Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::SimServe { world } => {
            let mut sim = TextWorld::new(worlds::library(&world)?);
            let stdin = std::io::stdin().lock();
            bridge::serve(&mut sim, stdin, std::io::stdout().lock()).context("serving bridge protocol")?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
