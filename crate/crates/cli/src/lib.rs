//! `fcplan`: plan, validate, ground, benchmark and import from the command line.
//!
//! Exit codes: 0 accepted, 2 rejected or no plan found, 1 error.

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fcp_core::search::BackwardAgg;
use fcp_core::{Criticality, TNormKind};
use thiserror::Error;

pub use commands::{cmd_bench, cmd_gen_suite, cmd_ground, cmd_import, cmd_plan, cmd_validate};

pub const EXIT_ACCEPTED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("oracle: {0}")]
    Oracle(String),
    #[error(transparent)]
    Search(#[from] fcp_core::search::SearchError),
    #[error(transparent)]
    Validation(#[from] fcp_core::acceptance::ValidationError),
    #[error(transparent)]
    Grounding(#[from] fcp_core::grounding::GroundingError),
    #[error(transparent)]
    Bench(#[from] fcp_core::bench::BenchError),
}

#[derive(Debug, Parser)]
#[command(name = "fcplan", version, about = "Graded-applicability planner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a plan and write it as JSON.
    Plan(PlanArgs),
    /// Replay a plan file and report degrees, membership and violations.
    Validate(ValidateArgs),
    /// Query the membership oracle for one (state, action, predicate).
    Ground(GroundArgs),
    /// Run an ablation grid over a suite directory and emit CSV.
    Bench(BenchArgs),
    /// Write the synthetic recipe suite to a directory.
    GenSuite(GenSuiteArgs),
    /// Convert a preference-subset planning task into domain and problem JSON.
    Import(ImportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleKind {
    Table,
    Rule,
    Llm,
}

impl OracleKind {
    pub fn name(self) -> &'static str {
        match self {
            OracleKind::Table => "table",
            OracleKind::Rule => "rule",
            OracleKind::Llm => "llm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

fn parse_tnorm(s: &str) -> Result<TNormKind, String> {
    s.parse()
}

fn parse_criticality(s: &str) -> Result<Criticality, String> {
    s.parse()
}

fn parse_agg(s: &str) -> Result<BackwardAgg, String> {
    s.parse()
}

#[derive(Debug, Clone, Args)]
pub struct AlphaArgs {
    /// Fixed acceptance threshold.
    #[arg(long, conflicts_with = "adaptive")]
    pub alpha: Option<f64>,
    /// Adaptive threshold around the problem's base alpha.
    #[arg(long)]
    pub adaptive: bool,
    #[arg(long, requires = "adaptive", value_parser = parse_criticality)]
    pub criticality: Option<Criticality>,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub domain: PathBuf,
    #[arg(long)]
    pub problem: PathBuf,
    #[command(flatten)]
    pub alpha: AlphaArgs,
    #[arg(long, default_value = "lukasiewicz", value_parser = parse_tnorm)]
    pub tnorm: TNormKind,
    /// Oracle samples per grounding query.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Defaults to `rule` when the domain has rules and no table, else `table`.
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    #[arg(long, default_value_t = 0.15)]
    pub epsilon_d: f64,
    #[arg(long, default_value_t = 16)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "on")]
    pub chunking: Switch,
    #[arg(long, default_value = "max", value_parser = parse_agg)]
    pub backward_agg: BackwardAgg,
    /// Write the search trace as JSON lines.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Keep raw oracle samples in the plan file; the llm oracle also logs every exchange to FILE.
    #[arg(long, num_args = 0..=1, default_missing_value = "fcplan-audit.jsonl", value_name = "FILE")]
    pub audit: Option<PathBuf>,
    /// Plan file path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub domain: PathBuf,
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[command(flatten)]
    pub alpha: AlphaArgs,
    /// Overrides the plan's t-norm (with a warning when they differ).
    #[arg(long, value_parser = parse_tnorm)]
    pub tnorm: Option<TNormKind>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct GroundArgs {
    #[arg(long)]
    pub domain: PathBuf,
    /// State document: `facts`, `resources`, `elapsed`, optional `time_budget`.
    #[arg(long, required_unless_present = "problem", conflicts_with = "problem")]
    pub state: Option<PathBuf>,
    /// Use the problem's initial state instead of --state.
    #[arg(long)]
    pub problem: Option<PathBuf>,
    #[arg(long)]
    pub action: String,
    #[arg(long)]
    pub predicate: String,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, value_enum)]
    pub oracle: Option<OracleKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub suite: PathBuf,
    /// Comma-separated axes: tnorm, k, chunking, alpha-policy, backward-agg.
    #[arg(long, value_delimiter = ',')]
    pub ablate: Vec<fcp_core::bench::Axis>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base k for configurations that do not ablate k.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 16)]
    pub max_depth: usize,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenSuiteArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',')]
    pub lengths: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub missing: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<usize>>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub outlier_rate: Option<f64>,
    #[arg(long)]
    pub conflict_rate: Option<f64>,
    #[arg(long)]
    pub phase_len: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ImportArgs {
    /// Domain and problem files, read in order as one text.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub out_domain: PathBuf,
    #[arg(long)]
    pub out_problem: PathBuf,
}

/// Parses `args` (program name first) and runs the command, printing reports to
/// `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_ACCEPTED };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Plan(a) => cmd_plan(&a, out, err),
        Command::Validate(a) => cmd_validate(&a, out, err),
        Command::Ground(a) => cmd_ground(&a, out).map(|()| EXIT_ACCEPTED),
        Command::Bench(a) => cmd_bench(&a, out, err).map(|()| EXIT_ACCEPTED),
        Command::GenSuite(a) => cmd_gen_suite(&a, err).map(|()| EXIT_ACCEPTED),
        Command::Import(a) => cmd_import(&a, err).map(|()| EXIT_ACCEPTED),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
