//! `report`: per-task best scores, S/L/All means, and score curves.
//!
//! Scores are kept in integer thousandths so that means round exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use step_core::task::TaskKind;

use crate::files::{self, TraceFile};
use crate::run::{RunResults, RESULTS_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskScore {
    pub task_id: String,
    pub kind: TaskKind,
    /// Thousandths of a point; `None` when the task has no result.
    pub milli: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub tasks: Vec<TaskScore>,
    /// Means in tenths of a point, rounded half up; `None` for an empty group.
    pub short: Option<i64>,
    pub long: Option<i64>,
    pub all: Option<i64>,
    pub warnings: Vec<String>,
    /// Episodes flagged for manual review as possible shortcut completions.
    pub suspects: Vec<String>,
}

/// `sum / n` in thousandths, rounded half up. `sum` must be non-negative.
fn div_half_up(sum: i64, n: i64) -> i64 {
    (2 * sum + n) / (2 * n)
}

/// Mean of thousandth-point values, in tenths, rounded half up.
pub fn mean_tenths(values: &[i64]) -> Option<i64> {
    if values.is_empty() {
        return None;
    }
    Some(div_half_up(values.iter().sum(), 100 * values.len() as i64))
}

pub fn milli_to_tenths(milli: i64) -> i64 {
    div_half_up(milli, 100)
}

pub fn format_tenths(tenths: i64) -> String {
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Parses a non-negative decimal with at most three fractional digits.
pub fn parse_milli(text: &str) -> Result<i64> {
    let t = text.trim();
    let (whole, frac) = t.split_once('.').unwrap_or((t, ""));
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || (!frac.is_empty() && !digits(frac)) || frac.len() > 3 || t.ends_with('.') {
        bail!("\"{text}\" is not a score (expected e.g. 63 or 63.0)");
    }
    let whole: i64 = whole.parse().with_context(|| format!("score \"{text}\" is too large"))?;
    let frac_milli = format!("{frac:0<3}").parse::<i64>().expect("three digits");
    Ok(whole * 1000 + frac_milli)
}

fn parse_kind(text: &str) -> Result<TaskKind> {
    match text.trim().to_ascii_lowercase().as_str() {
        "s" | "short" => Ok(TaskKind::Short),
        "l" | "long" => Ok(TaskKind::Long),
        other => bail!("unknown task kind \"{other}\" (expected short or long)"),
    }
}

/// Reads `task_id,kind,score` rows (tab-separated also accepted). An empty
/// score marks a missing task; a header row is optional.
pub fn read_score_table(text: &str) -> Result<Vec<TaskScore>> {
    let delimiter = if text.lines().next().is_some_and(|l| l.contains('\t')) { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new().has_headers(false).delimiter(delimiter).trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("row {}", n + 1))?;
        if row.len() != 3 {
            bail!("row {}: expected task_id,kind,score, got {} fields", n + 1, row.len());
        }
        if n == 0 && row[1].eq_ignore_ascii_case("kind") {
            continue;
        }
        let kind = parse_kind(&row[1]).with_context(|| format!("row {}", n + 1))?;
        let milli = if row[2].is_empty() { None } else { Some(parse_milli(&row[2]).with_context(|| format!("row {}", n + 1))?) };
        out.push(TaskScore { task_id: row[0].to_owned(), kind, milli });
    }
    Ok(out)
}

/// Per task, the mean over variations of each variation's best score.
pub fn scores_from_results(results: &RunResults) -> Vec<TaskScore> {
    let mut out: Vec<(TaskScore, i64, i64)> = Vec::new();
    for run in &results.runs {
        match out.iter_mut().find(|(t, ..)| t.task_id == run.task_id) {
            Some((_, sum, n)) => {
                *sum += i64::from(run.best_score.max(0));
                *n += 1;
            }
            None => out.push((TaskScore { task_id: run.task_id.clone(), kind: run.kind, milli: None }, i64::from(run.best_score.max(0)), 1)),
        }
    }
    let mut scores: Vec<TaskScore> = out
        .into_iter()
        .map(|(mut t, sum, n)| {
            t.milli = Some(div_half_up(sum * 1000, n));
            t
        })
        .collect();
    for f in &results.failures {
        if !scores.iter().any(|t| t.task_id == f.task_id) {
            scores.push(TaskScore { task_id: f.task_id.clone(), kind: f.kind, milli: None });
        }
    }
    scores
}

pub fn build_report(tasks: Vec<TaskScore>) -> Report {
    let present = |kind: Option<TaskKind>| -> Vec<i64> { tasks.iter().filter(|t| kind.is_none_or(|k| t.kind == k)).filter_map(|t| t.milli).collect() };
    let missing: Vec<&str> = tasks.iter().filter(|t| t.milli.is_none()).map(|t| t.task_id.as_str()).collect();
    let mut warnings = Vec::new();
    if !missing.is_empty() {
        warnings.push(format!("missing results for {}; means cover the remaining tasks only", missing.join(", ")));
    }
    Report {
        short: mean_tenths(&present(Some(TaskKind::Short))),
        long: mean_tenths(&present(Some(TaskKind::Long))),
        all: mean_tenths(&present(None)),
        tasks,
        warnings,
        suspects: Vec::new(),
    }
}

fn cell(value: Option<i64>) -> String {
    value.map_or_else(|| "-".to_owned(), format_tenths)
}

impl Report {
    fn summary(&self) -> [(&'static str, Option<i64>); 3] {
        [("S", self.short), ("L", self.long), ("All", self.all)]
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Csv => {
                out.push_str("row,kind,score\n");
                for t in &self.tasks {
                    let score = t.milli.map(|m| format_tenths(milli_to_tenths(m))).unwrap_or_default();
                    let _ = writeln!(out, "{},{},{score}", t.task_id, t.kind.label());
                }
                for (name, v) in self.summary() {
                    let _ = writeln!(out, "{name},mean,{}", v.map(format_tenths).unwrap_or_default());
                }
            }
            Format::Table => {
                let width = self.tasks.iter().map(|t| t.task_id.len()).chain([4]).max().unwrap_or(4);
                let _ = writeln!(out, "{:<width$}  kind  score", "task");
                for t in &self.tasks {
                    let _ = writeln!(out, "{:<width$}  {:<4}  {:>5}", t.task_id, t.kind.label(), cell(t.milli.map(milli_to_tenths)));
                }
                let _ = writeln!(out, "{}", "-".repeat(width + 13));
                for (name, v) in self.summary() {
                    let _ = writeln!(out, "{name:<width$}  {:<4}  {:>5}", "", cell(v));
                }
            }
        }
        out
    }
}

/// Writes `step<TAB>score` rows, starting from step 0 at score 0.
pub fn curve_tsv(trace: &TraceFile) -> String {
    let mut out = String::from("step\tscore\n0\t0\n");
    for s in &trace.steps {
        let _ = writeln!(out, "{}\t{}", s.index, s.reward.max(0));
    }
    out
}

/// Writes one curve file per recorded episode; returns the files written.
pub fn write_curves(results: &RunResults, results_dir: &Path, curves_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for run in &results.runs {
        for a in &run.attempts {
            let trace = TraceFile::read(&results_dir.join(&a.trace))?;
            let path = curves_dir.join(format!("{}_{}_attempt_{}.tsv", run.task_id, run.variation, a.attempt));
            files::write_atomic(&path, curve_tsv(&trace).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Builds the report from run directories, `results.json` files, or score
/// tables. Curves go to `<out>/curves`, or beside each run's results.
pub fn cmd_report(inputs: &[PathBuf], out: Option<&Path>) -> Result<Report> {
    if inputs.is_empty() {
        bail!("no report inputs given");
    }
    let mut tasks: Vec<TaskScore> = Vec::new();
    let mut suspects = Vec::new();
    for input in inputs {
        let results_path = if input.is_dir() { input.join(RESULTS_FILE) } else { input.clone() };
        let is_json = results_path.extension().is_some_and(|e| e == "json");
        if is_json {
            let results = RunResults::read(&results_path)?;
            let dir = results_path.parent().unwrap_or(Path::new("."));
            let curves = out.unwrap_or(dir).join("curves");
            write_curves(&results, dir, &curves)?;
            for run in &results.runs {
                for a in run.attempts.iter().filter(|a| a.suspect) {
                    suspects.push(format!("{} seed {} attempt {}", run.task_id, run.variation, a.attempt));
                }
            }
            tasks.extend(scores_from_results(&results));
        } else {
            let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
            tasks.extend(read_score_table(&text).with_context(|| format!("parsing {}", input.display()))?);
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for t in &tasks {
        if !seen.insert(t.task_id.as_str()) {
            bail!("task {} appears in more than one input", t.task_id);
        }
    }
    let mut report = build_report(tasks);
    if !suspects.is_empty() {
        report.warnings.push(format!(
            "{} episode(s) finished with a lone focus step and no earlier progress; review before counting: {}",
            suspects.len(),
            suspects.join(", ")
        ));
    }
    report.suspects = suspects;
    Ok(report)
}
