//! `carleson`: batch certification runs with JSON reports.
//!
//! Exit codes: 0 certified, 1 ran but not certified (or a numeric step
//! failed; the partial report is still written), 2 input error.

mod commands;
mod lambda;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::commands::{Context, Failure};

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "carleson",
    version,
    about = "Finite-truncation checks for Carleson frames"
)]
pub struct Cli {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Spectrum JSON (a raw spectrum or a `gen-spectrum` report).
    #[arg(long, global = true)]
    pub spectrum: Option<PathBuf>,
    /// Exponent set: `arith:N=3,jitter=random`, `explicit:0,1.5,4`, `dyadic`,
    /// `naturals`, or a JSON file.
    #[arg(long, global = true)]
    pub lambda: Option<String>,
    /// Spectrum rows in the truncation.
    #[arg(long, global = true)]
    pub rows: Option<usize>,
    /// Exponent columns in the truncation.
    #[arg(long, global = true)]
    pub cols: Option<usize>,
    #[arg(long = "N", global = true)]
    #[serde(rename = "N")]
    pub n_step: Option<u32>,
    /// Jitter rule: `random`, `random-int`, `zero`, `const:x`, or a JSON file.
    #[arg(long, global = true)]
    pub jitter: Option<String>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long = "T", global = true)]
    #[serde(rename = "T")]
    pub t_cut: Option<f64>,
    #[arg(long, global = true, env = "CARLESON_DEFAULT_TOL")]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    /// `z_j = 1 - base * ratio^j`.
    Geometric,
    /// Geometric moduli with angles in `|theta| <= c`.
    Sector,
    /// `z_0 = r_0`, `z_1 = -r_0`, then the geometric moduli from `r_1`.
    Antipodal,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleRuleArg {
    Zero,
    Alternating,
    Sweep,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a spectrum; the report carries it under `result`.
    GenSpectrum {
        #[arg(long, value_enum, default_value = "geometric")]
        kind: SpectrumKind,
        #[arg(long, default_value_t = 0.5)]
        base: f64,
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
        #[arg(long, default_value_t = 12)]
        count: usize,
        /// Sector half-angle.
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, value_enum, default_value = "alternating")]
        angle_rule: AngleRuleArg,
    },
    /// Separation constant and derived frame constant.
    CheckCarleson,
    /// Frame bounds of the truncated synthesis matrix against the separation window.
    FrameBounds {
        /// Grow K until the lower bound settles instead of using `--cols`.
        #[arg(long)]
        converge: bool,
        #[arg(long, default_value_t = 1 << 15)]
        k_max: usize,
        /// Also write the matrix as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Frame bounds for an exponent set with at most one exponent per block.
    SubsampleCheck {
        #[arg(long, default_value_t = 1 << 15)]
        k_max: usize,
        #[arg(long, default_value_t = 0.05)]
        rel_tol: f64,
        /// Blocks must hold fewer than this many exponents.
        #[arg(long, default_value_t = 2)]
        max_count: usize,
    },
    /// Cutoff row for the jittered perturbation and randomized chain checks.
    Perturbation {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 4096)]
        jitter_count: usize,
        #[arg(long, default_value_t = 1 << 15)]
        k_max: usize,
    },
    /// Row-by-row extension from the perturbation cutoff down to row 0.
    Extension {
        /// Starting row; defaults to the perturbation cutoff.
        #[arg(long = "J")]
        #[serde(rename = "J")]
        j_start: Option<usize>,
        #[arg(long, default_value_t = 1 << 15)]
        k_max: usize,
    },
    /// Point pairs that collapse under `z -> z^N`, with their null vectors.
    Degenerate,
    /// Muntz-Szasz sums, block density and theta bounds for an exponent set.
    Density {
        #[arg(long)]
        count: Option<usize>,
    },
    /// Continuous-time energy sandwich for random vectors.
    Continuous {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        /// Random vectors live on the first `support` coordinates.
        #[arg(long, default_value_t = 4)]
        support: usize,
        /// Write `t, energy` samples of the first vector.
        #[arg(long)]
        samples_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        stride: usize,
    },
    /// Reconstruction of random vectors from their samples.
    Reconstruct {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1 << 15)]
        k_max: usize,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenSpectrum { .. } => "gen-spectrum",
            Command::CheckCarleson => "check-carleson",
            Command::FrameBounds { .. } => "frame-bounds",
            Command::SubsampleCheck { .. } => "subsample-check",
            Command::Perturbation { .. } => "perturbation",
            Command::Extension { .. } => "extension",
            Command::Degenerate => "degenerate",
            Command::Density { .. } => "density",
            Command::Continuous { .. } => "continuous",
            Command::Reconstruct { .. } => "reconstruct",
        }
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a Cli,
    inputs: &'a serde_json::Map<String, serde_json::Value>,
    tolerances: &'a serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct Report<'a> {
    command: &'static str,
    status: &'static str,
    provenance: Provenance<'a>,
    result: Option<serde_json::Value>,
    error: Option<String>,
}

fn emit(cli: &Cli, report: &Report) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    text.push('\n');
    match &cli.common.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut ctx = Context::new(&cli.common);
    let outcome = commands::run(&cli.common, &cli.command, &mut ctx);
    let (status, result, error, code) = match outcome {
        Ok(out) if out.certified => ("certified", Some(out.result), None, 0),
        Ok(out) => ("not_certified", Some(out.result), None, 1),
        Err(Failure::Numeric(msg)) => ("failed", None, Some(msg), 1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let report = Report {
        command: cli.command.name(),
        status,
        provenance: Provenance {
            tool: "carleson",
            version: carleson::VERSION,
            config: &cli,
            inputs: &ctx.inputs,
            tolerances: &ctx.tolerances,
        },
        result,
        error,
    };
    if let Err(e) = emit(&cli, &report) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if let Some(msg) = &report.error {
        eprintln!("error: {msg}");
    }
    ExitCode::from(code)
}
