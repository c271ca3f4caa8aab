//! The `around` command line: run scenarios, reproduce the reference tables,
//! execute property suites and compare models.
//!
//! Exit codes: 0 success, 2 configuration error, 3 engine error or failed
//! check.

pub mod report;

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use around_core::checks::{
    closed_form_suite, lu_support_suite, marginal_utility_divergence, mixture_suite, ratio_suite, MarginKind,
    SuiteReport,
};
use around_core::compare::{compare_models, run_model, ModelRun};
use around_core::reproduce::{reproduce_tables, round_to, Comparison, TableCheck};
use around_core::scenario::MAX_DEPTH;
use around_core::variants::{bayesian_uniform_curve, mixture_uniform_curve};
use around_core::{load_scenario, Exec, ModelKind, Scenario};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use report::{render_grid, CheckOut, RunReport};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "AROUND_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("engine error: {0}")]
    Engine(String),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(_) | CliError::Failed(_) | CliError::Io(_) => 3,
        }
    }
}

fn engine(e: impl std::fmt::Display) -> CliError {
    CliError::Engine(e.to_string())
}

fn io(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "around", version, about = "Pragmatic interpretation of \"around n\"")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the recursion for a scenario file.
    Run(RunArgs),
    /// Recompute every reference table and curve and diff against the
    /// embedded expected values.
    PaperTables(PaperArgs),
    /// Run seeded property suites.
    Check(CheckArgs),
    /// Run several models on one scenario side by side.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub scenario: PathBuf,
    /// Overrides the scenario's depth.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Overrides the scenario's model.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long, value_enum, default_value = "table")]
    pub format: Format,
    /// Directory for output files; stdout when absent.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PaperArgs {
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Ratio,
    LuSupport,
    Mixture,
    ClosedForm,
    All,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run trials on one thread.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub scenario: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "main,lu")]
    pub models: Vec<ModelKind>,
    #[arg(long)]
    pub depth: Option<usize>,
}

/// Parses `args` and runs the command, writing to `out`. Returns the exit
/// code; diagnostics go to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "around: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(a) => cmd_run(a, out).map(|_| ()),
        Command::PaperTables(a) => cmd_paper_tables(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Compare(a) => cmd_compare(a, out),
    }
}

pub fn read_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    load_scenario(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn checked_depth(depth: Option<usize>, scn: &Scenario) -> Result<usize, CliError> {
    let d = depth.unwrap_or(scn.depth);
    if d == 0 || d > MAX_DEPTH {
        return Err(CliError::Config(format!("depth must be in 1..={MAX_DEPTH}, got {d}")));
    }
    Ok(d)
}

fn run_checks(depth: usize, run: &ModelRun) -> Vec<CheckOut> {
    let mut checks = Vec::new();
    if depth >= 2 {
        let gaps: Vec<f64> = run
            .speakers
            .windows(2)
            .map(|w| w[0].max_abs_diff(&w[1]))
            .collect();
        checks.push(CheckOut {
            name: "convergence-gap".into(),
            pass: true,
            detail: gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(" "),
        });
    }
    checks
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join(name), contents).map_err(io)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<RunReport, CliError> {
    let mut scn = read_scenario(&args.scenario)?;
    if let Some(m) = args.model {
        scn.model = m;
    }
    let depth = checked_depth(args.depth, &scn)?;
    let run = run_model(&scn, depth, Exec::default()).map_err(engine)?;
    let report = RunReport::new(&scn, depth, &run, run_checks(depth, &run));
    emit_run(&report, args.format, args.out.as_deref(), out)?;
    Ok(report)
}

fn emit_run(report: &RunReport, format: Format, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    match (format, dir) {
        (Format::Json, None) => {
            serde_json::to_writer_pretty(&mut *out, report).map_err(io)?;
            writeln!(out).map_err(io)
        }
        (Format::Json, Some(dir)) => {
            let text = serde_json::to_string_pretty(report).map_err(io)?;
            write_file(dir, "run.json", &(text + "\n"))
        }
        (Format::Csv, None) => {
            for (name, t) in report.named_tables() {
                writeln!(out, "# {name}").map_err(io)?;
                out.write_all(t.to_csv().map_err(io)?.as_bytes()).map_err(io)?;
            }
            Ok(())
        }
        (Format::Csv, Some(dir)) => {
            for (name, t) in report.named_tables() {
                write_file(dir, &format!("{name}.csv"), &t.to_csv().map_err(io)?)?;
            }
            Ok(())
        }
        (Format::Table, dir) => {
            let mut text = format!("model {}, lambda {}, depth {}\n", report.model, report.lambda, report.depth);
            for (name, t) in report.named_tables() {
                let _ = write!(text, "\n{name}\n{}", t.to_text());
            }
            for c in &report.checks {
                let _ = write!(text, "\n{}: {}\n", c.name, c.detail);
            }
            match dir {
                None => out.write_all(text.as_bytes()).map_err(io),
                Some(dir) => write_file(dir, "run.txt", &text),
            }
        }
    }
}

fn render_check(t: &TableCheck) -> String {
    let verdict = if t.pass { "PASS" } else { "FAIL" };
    let mut s = match &t.comparison {
        Comparison::Rounded { decimals, slack } => format!(
            "{} {}: {verdict} (rounded to {decimals} decimals, slack {slack}, worst {:.4})\n",
            t.id, t.title, t.worst
        ),
        Comparison::Absolute { tolerance } => {
            format!("{} {}: {verdict} (tolerance {tolerance}, worst {:.4})\n", t.id, t.title, t.worst)
        }
        Comparison::Exact => format!("{} {}: {verdict} (exact)\n", t.id, t.title),
    };
    match (&t.exact, &t.comparison) {
        (Some((computed, expected)), _) => {
            for ((label, c), e) in t.col_labels.iter().zip(computed).zip(expected) {
                let _ = writeln!(s, "  {label:<8} {c:>8}  expected {e}");
            }
        }
        (None, cmp) => {
            let decimals = match cmp {
                Comparison::Rounded { decimals, .. } => *decimals as usize,
                _ => 4,
            };
            let rows: Vec<(String, Vec<Option<f64>>)> = t
                .row_labels
                .iter()
                .zip(&t.computed)
                .map(|(l, r)| (l.clone(), r.iter().map(|v| Some(round_to(*v, decimals as u32))).collect()))
                .collect();
            s.push_str(&render_grid("", &t.col_labels, &rows, decimals));
        }
    }
    s
}

fn curve_csv(points: &[(i64, f64)]) -> String {
    let mut s = String::from("k,p\n");
    for (k, p) in points {
        let _ = writeln!(s, "{k},{p}");
    }
    s
}

/// A named list of `(k, probability)` points.
pub type Curve = (&'static str, Vec<(i64, f64)>);

/// Curve data: the Bayesian uniform-prior posterior for "around 20" and the
/// mixture listener's counterpart.
pub fn uniform_prior_curves() -> Result<Vec<Curve>, CliError> {
    Ok(vec![
        ("around-20-bayesian", bayesian_uniform_curve(20)),
        ("around-20-mixture", mixture_uniform_curve(20).map_err(engine)?),
    ])
}

pub fn cmd_paper_tables(args: &PaperArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let tables = reproduce_tables().map_err(engine)?;
    let mut text = String::new();
    for t in &tables {
        text.push_str(&render_check(t));
        text.push('\n');
    }
    let curves = uniform_prior_curves()?;
    for (name, points) in &curves {
        let _ = writeln!(text, "{name}: {} points", points.len());
    }
    let failed: Vec<&str> = tables.iter().filter(|t| !t.pass).map(|t| t.id).collect();
    let _ = writeln!(text, "\n{}/{} tables pass", tables.len() - failed.len(), tables.len());
    match &args.out {
        None => {
            out.write_all(text.as_bytes()).map_err(io)?;
            for (name, points) in &curves {
                write!(out, "\n# {name}\n{}", curve_csv(points)).map_err(io)?;
            }
        }
        Some(dir) => {
            write_file(dir, "paper-tables.txt", &text)?;
            for (name, points) in &curves {
                write_file(dir, &format!("{name}.csv"), &curve_csv(points))?;
            }
            out.write_all(text.as_bytes()).map_err(io)?;
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("tables differ: {}", failed.join(", "))))
    }
}

fn render_suite(r: &SuiteReport) -> String {
    let what = match r.margin_kind {
        MarginKind::MinMargin => "min margin",
        MarginKind::MaxDeviation => "max deviation",
    };
    format!(
        "{}: {} ({} trials, {}/{} cases, {what} {:.3e}{})\n",
        r.name,
        if r.pass() { "PASS" } else { "FAIL" },
        r.trials,
        r.passed,
        r.cases,
        r.worst,
        r.worst_case.as_ref().map(|c| format!(" at {c}")).unwrap_or_default()
    )
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let exec = if args.sequential { Exec::Sequential } else { Exec::Parallel };
    let trials = args.trials as usize;
    let want = |s: Suite| args.suite == s || args.suite == Suite::All;
    let mut reports: Vec<SuiteReport> = Vec::new();
    let mut notes = String::new();
    if want(Suite::ClosedForm) {
        reports.extend(closed_form_suite(40, exec).map_err(engine)?);
    }
    if want(Suite::Ratio) {
        reports.extend(ratio_suite(trials, args.seed, exec).map_err(engine)?);
    }
    if want(Suite::Mixture) {
        reports.push(mixture_suite(trials, args.seed, exec).map_err(engine)?);
    }
    if want(Suite::LuSupport) {
        reports.extend(lu_support_suite(exec).map_err(engine)?);
        let pairs = marginal_utility_divergence(100.0, exec).map_err(engine)?;
        let differing = pairs
            .iter()
            .filter(|(_, _, d)| d.iter().any(|v| *v > around_core::compare::DIFFERENTIATION_THRESHOLD))
            .count();
        let _ = writeln!(
            notes,
            "lu-marginal-utility at lambda 100 (reported, not asserted): {differing}/{} equal-support pairs differ",
            pairs.len()
        );
        for (a, b, d) in &pairs {
            let levels: Vec<String> = d.iter().map(|v| format!("{v:.3e}")).collect();
            let _ = writeln!(notes, "  {a} / {b}: {}", levels.join(" "));
        }
    }
    for r in &reports {
        out.write_all(render_suite(r).as_bytes()).map_err(io)?;
    }
    out.write_all(notes.as_bytes()).map_err(io)?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass()).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("suites failed: {}", failed.join(", "))))
    }
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let scn = read_scenario(&args.scenario)?;
    let depth = checked_depth(args.depth, &scn)?;
    let cmp = compare_models(&scn, &args.models, depth, Exec::default()).map_err(|e| match e {
        around_core::compare::CompareError::TooFewModels(_) => CliError::Config(e.to_string()),
        other => engine(other),
    })?;
    let mut text = String::new();
    let cols: Vec<String> = scn.messages.iter().map(|m| m.short_label()).collect();
    let shown: Vec<usize> = if depth == 1 { vec![1] } else { vec![1, depth] };
    for &level in &shown {
        let _ = writeln!(text, "S{level}(m | o)");
        let mut rows = Vec::new();
        for (oi, label) in scn.labels().iter().enumerate() {
            for run in &cmp.runs {
                let row = run.speakers[level - 1].row(oi).iter().map(|v| Some(*v)).collect();
                rows.push((format!("{label} [{}]", run.model), row));
            }
        }
        text.push_str(&render_grid("observation [model]", &cols, &rows, 2));
        text.push('\n');
    }
    let _ = writeln!(text, "equal-support pairs (differ: max row difference > {:e})", around_core::compare::DIFFERENTIATION_THRESHOLD);
    for run in &cmp.runs {
        let flagged: Vec<_> = cmp.flags.iter().filter(|f| f.model == run.model).collect();
        let n_diff = flagged.iter().filter(|f| f.differentiated).count();
        let _ = writeln!(
            text,
            "{}: {}",
            run.model,
            if n_diff > 0 { "differentiates" } else { "does not differentiate" }
        );
        for f in flagged.iter().filter(|f| f.level == 1 || f.level == depth) {
            let _ = writeln!(
                text,
                "  level {} {} / {}: {:.3e}{}",
                f.level,
                f.pair.0,
                f.pair.1,
                f.max_diff,
                if f.differentiated { "  DIFFER" } else { "" }
            );
        }
    }
    out.write_all(text.as_bytes()).map_err(io)
}
