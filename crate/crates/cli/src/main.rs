//! `whfk`: classify and solve Wiener-Hopf equations of the first kind from a
//! kernel-spec file.
//!
//! Exit codes: 0 ok, 1 verification failure or numerical breakdown, 2 bad
//! input, 3 unclassified, 4 vanishing symbol, 5 index mismatch,
//! 6 under-resolved grid.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use whfk::config::AnalysisConfig;
use whfk::pipeline::{run, Command, PipelineError, RhsSource, RunOutput, EXIT_INPUT, EXIT_OTHER};
use whfk::spaces::GridFunction;
use whfk::spec_file::parse_kernel_spec;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    /// Moments, conditions, symbols and winding indices.
    Analyze,
    /// Analyze, then the solvability report.
    Classify,
    /// Classify, then a regularized Nyström solve.
    Solve,
    /// Classify, then comparisons against independent oracles.
    Verify,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Analyze => Command::Analyze,
            Cmd::Classify => Command::Classify,
            Cmd::Solve => Command::Solve,
            Cmd::Verify => Command::Verify,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "whfk", version, about = "Solvability analysis for Wiener-Hopf equations of the first kind")]
struct Args {
    #[arg(value_enum)]
    command: Cmd,
    /// Kernel-spec JSON document.
    #[arg(long, value_name = "PATH")]
    spec: PathBuf,
    /// Analysis config JSON; missing fields take defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Right-hand side as CSV with header `t,value` on a uniform grid from 0.
    #[arg(long, value_name = "PATH", conflicts_with = "manufactured")]
    rhs: Option<PathBuf>,
    /// Solve for the manufactured solution e^{-t}.
    #[arg(long)]
    manufactured: bool,
    /// Directory for report.json and CSV side files; stdout otherwise.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Frequency grid size (power of two); overrides the config.
    #[arg(long, value_name = "N")]
    grid: Option<usize>,
    /// Moment zero band; overrides the config.
    #[arg(long, value_name = "X")]
    tol_zero: Option<f64>,
    /// Write symbol samples and the solution as CSV next to the report.
    #[arg(long, requires = "out")]
    plot_csv: bool,
}

/// An error with the exit code it maps to.
struct Failure {
    code: i32,
    error: anyhow::Error,
}

fn input(error: anyhow::Error) -> Failure {
    Failure { code: EXIT_INPUT, error }
}

fn read(path: &Path, what: &str) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {what} {}", path.display()))
        .map_err(input)
}

fn load_config(args: &Args) -> Result<AnalysisConfig, Failure> {
    let mut cfg = match &args.config {
        Some(p) => AnalysisConfig::from_json(&read(p, "config")?)
            .with_context(|| format!("in {}", p.display()))
            .map_err(input)?,
        None => AnalysisConfig::default(),
    };
    if let Some(n) = args.grid {
        cfg.grid_size = n;
    }
    if let Some(x) = args.tol_zero {
        cfg.conditions.zero_band = x;
    }
    cfg.validate().map_err(|e| input(e.into()))?;
    Ok(cfg)
}

fn write_outputs(dir: &Path, out: &RunOutput, plot_csv: bool) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("report.json"), out.report.to_json())?;
    if plot_csv {
        for (j, s) in out.symbols.iter().enumerate() {
            fs::write(dir.join(format!("symbol_{j:02}_{}.csv", s.label.as_str())), s.to_csv())?;
        }
        if let Some(sol) = &out.solution {
            fs::write(dir.join("solution.csv"), sol.to_csv())?;
        }
    }
    Ok(())
}

fn main_inner(args: Args) -> Result<i32, Failure> {
    let parsed = parse_kernel_spec(&read(&args.spec, "kernel spec")?)
        .with_context(|| format!("in {}", args.spec.display()))
        .map_err(input)?;
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let cfg = load_config(&args)?;
    let rhs = match (&args.rhs, args.manufactured) {
        (Some(p), _) => RhsSource::Given(
            GridFunction::from_csv(&read(p, "right-hand side")?)
                .with_context(|| format!("in {}", p.display()))
                .map_err(input)?,
        ),
        (None, true) => RhsSource::Manufactured,
        (None, false) => RhsSource::None,
    };
    let mut out = run(args.command.into(), &cfg, &parsed.spec, &rhs).map_err(|e: PipelineError| Failure {
        code: e.exit_code(),
        error: e.into(),
    })?;
    out.report.messages.extend(parsed.warnings.iter().map(|w| format!("warning: {w}")));
    for m in &out.report.messages {
        eprintln!("{m}");
    }
    match &args.out {
        Some(dir) => write_outputs(dir, &out, args.plot_csv).map_err(|error| Failure { code: EXIT_OTHER, error })?,
        None => print!("{}", out.report.to_json()),
    }
    Ok(out.report.exit_code)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match main_inner(args) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    };
    ExitCode::from(code as u8)
}
