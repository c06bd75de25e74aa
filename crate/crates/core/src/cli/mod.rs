//! Command-line front end: `sddhopf <command> --config <path> [overrides]`.

mod commands;
mod sweep;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{OutputFormat, ParamSpec, RunConfig};
use crate::dde::SystemKind;
use crate::error::Error;

pub use commands::{
    equilibrium_report, normal_form_report, resolve, simulate, stability_report, CriticalEps, EpsK, EquilibriumReport, NormalFormReport,
    Resolved, SimulateReport, StabilityReport,
};
pub use sweep::{classify_run, run_sweep, sweep_threads, SimClass, SweepCell, SweepReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_RESONANCE: i32 = 3;
pub const EXIT_INTEGRATION: i32 = 4;

/// Exit code for an error raised by the pipeline.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
        Error::ResonanceViolation { .. } => EXIT_RESONANCE,
        Error::Integration { .. } | Error::LagInsideStep | Error::Incompatible { .. } | Error::HistoryTooShort { .. } => EXIT_INTEGRATION,
        _ => EXIT_SOLVER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "sddhopf", version, about = "Hopf analysis and simulation of regulatory dynamics with threshold-type state-dependent delay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Basal delay (overrides the config).
    #[arg(long, global = true)]
    pub eps: Option<f64>,

    /// State-dependence coefficient (overrides the config).
    #[arg(long, global = true)]
    pub c: Option<f64>,

    #[arg(long, global = true, value_enum)]
    pub system: Option<SystemArg>,

    /// End of the simulation in the system's own time.
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,

    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Number of further critical delays to list.
    #[arg(long = "eps-k", global = true)]
    pub eps_k: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    Equilibrium,
    Stability,
    NormalForm,
    Simulate,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SystemArg {
    Original,
    Transformed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
    Text,
}

impl Cli {
    /// Loads the config and applies command-line overrides.
    pub fn config(&self) -> Result<RunConfig, Error> {
        let path = self.config.as_ref().ok_or_else(|| Error::Config("--config <path> is required".into()))?;
        let mut cfg = RunConfig::load(path)?;
        if let Some(eps) = self.eps {
            cfg.model.eps = ParamSpec::Value(eps);
        }
        if let Some(c) = self.c {
            cfg.model.c = ParamSpec::Value(c);
        }
        let sim = &mut cfg.analysis.simulate;
        if let Some(s) = self.system {
            sim.system = match s {
                SystemArg::Original => SystemKind::Original,
                SystemArg::Transformed => SystemKind::Transformed,
            };
        }
        if let Some(t) = self.t_end {
            sim.t_end = t;
        }
        if let Some(k) = self.eps_k {
            cfg.analysis.stability.eps_k = k;
        }
        if let Some(f) = self.format {
            cfg.output.format = match f {
                FormatArg::Csv => OutputFormat::Csv,
                FormatArg::Json => OutputFormat::Json,
                FormatArg::Text => OutputFormat::Text,
            };
        }
        if let Some(p) = &self.output {
            cfg.output.path = Some(p.display().to_string());
        }
        Ok(cfg)
    }
}

/// What a command produced.
struct Rendered {
    /// The command's document: written to `--output` when given, else stdout.
    body: String,
    /// Trajectory CSV of `simulate`; takes the `--output` slot when present.
    trajectory: Option<String>,
    code: i32,
}

fn emit(cfg: &RunConfig, r: &Rendered) -> Result<(), Error> {
    let write_file = |p: &str, text: &str| std::fs::write(p, text).map_err(|e| Error::Config(format!("{p}: {e}")));
    let mut stdout = std::io::stdout().lock();
    match (&cfg.output.path, &r.trajectory) {
        (Some(p), Some(csv)) => {
            write_file(p, csv)?;
            let _ = stdout.write_all(r.body.as_bytes());
        }
        // CSV requested on stdout: the summary moves to stderr.
        (None, Some(csv)) if cfg.output.format == OutputFormat::Csv => {
            let _ = stdout.write_all(csv.as_bytes());
            eprint!("{}", r.body);
        }
        (Some(p), None) => write_file(p, &r.body)?,
        (None, _) => {
            let _ = stdout.write_all(r.body.as_bytes());
        }
    }
    Ok(())
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn render(cmd: Command, cfg: &RunConfig) -> Result<Rendered, Error> {
    let fmt = cfg.output.format;
    let ok = |body: String| Rendered { body, trajectory: None, code: EXIT_OK };
    match cmd {
        Command::Equilibrium => {
            let r = equilibrium_report(cfg)?;
            Ok(ok(match fmt {
                OutputFormat::Json => json(&r),
                OutputFormat::Csv => r.to_csv(),
                OutputFormat::Text => r.to_text(),
            }))
        }
        Command::Stability => {
            let r = stability_report(cfg)?;
            Ok(ok(match fmt {
                OutputFormat::Json => json(&r),
                OutputFormat::Csv => r.to_csv(),
                OutputFormat::Text => r.to_text(),
            }))
        }
        Command::NormalForm => {
            let r = normal_form_report(cfg)?;
            Ok(ok(match fmt {
                OutputFormat::Json => json(&r),
                OutputFormat::Csv => r.to_csv(),
                OutputFormat::Text => r.to_text(),
            }))
        }
        Command::Simulate => {
            let (report, traj) = simulate(cfg)?;
            let code = if report.status.is_completed() { EXIT_OK } else { EXIT_INTEGRATION };
            if code != EXIT_OK {
                eprint!("{}", report.event_log());
            }
            let body = match fmt {
                OutputFormat::Json => json(&report),
                OutputFormat::Csv | OutputFormat::Text => report.to_text(),
            };
            let wants_csv = cfg.output.path.is_some() || fmt == OutputFormat::Csv;
            Ok(Rendered { body, trajectory: wants_csv.then(|| traj.to_csv()), code })
        }
        Command::Sweep => {
            let r = run_sweep(cfg)?;
            Ok(ok(match fmt {
                OutputFormat::Json => json(&r),
                OutputFormat::Csv => r.to_csv(),
                OutputFormat::Text => r.to_text(),
            }))
        }
    }
}

/// Runs the command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match cli.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match render(cli.command, &cfg).and_then(|r| emit(&cfg, &r).map(|_| r.code)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `std::env::args` and runs; argument errors exit with the config code.
pub fn main_entry() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}
