use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod adjust;
mod bound;
mod curve;
mod error;
mod grid;
mod output;
mod simulate;
mod verify;

use error::CliResult;
use grid::Grid;

#[derive(Debug, Parser)]
#[command(
    name = "gbh",
    version,
    about = "Adaptive GBH procedure, its FDR bound and audit tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the FDR upper bound at one (lambda, rho, alpha).
    Bound(BoundArgs),
    /// Evaluate the bound on a grid and write `lambda,rho,bound,ratio` CSV.
    Curve(CurveArgs),
    /// Run a Monte Carlo campaign and print its summary as JSON.
    Simulate(SimulateArgs),
    /// Apply BH, Storey or GBH1 to a CSV of p-values.
    Adjust(AdjustArgs),
    /// Run the quadrature and Monte Carlo audits.
    Verify(VerifyArgs),
}

#[derive(Debug, clap::Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Also evaluate the a-parameterized form and report the termwise difference.
    #[arg(long)]
    pub aform: bool,
    /// Evaluate for lambda in (1/2, 1) too; output is marked out of domain.
    #[arg(long)]
    pub force: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, clap::Args)]
pub struct CurveArgs {
    /// Comma list or start:stop:step.
    #[arg(long, default_value = "0.05:0.5:0.05")]
    pub lambdas: Grid,
    #[arg(long, default_value = "0.005:0.335:0.005")]
    pub rhos: Grid,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub force: bool,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Flat `key = value` configuration file.
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable), e.g. `--set rho=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Worker threads; all cores when omitted. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// CSV file the summary line is appended to.
    #[arg(long, default_value = "results.csv")]
    pub log: PathBuf,
    #[arg(long, conflicts_with = "log")]
    pub no_log: bool,
}

#[derive(Debug, clap::Args)]
pub struct AdjustArgs {
    /// CSV with a header row holding `pvalue` and, for gbh1, `group`.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ProcedureArg::Gbh1)]
    pub procedure: ProcedureArg,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcedureArg {
    Gbh1,
    Storey,
    Bh,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = SectionArg::All)]
    pub section: SectionArg,
    #[arg(long, default_value_t = 20180101)]
    pub seed: u64,
    /// Monte Carlo draws per lemma point.
    #[arg(long, default_value_t = 20_000)]
    pub replications: usize,
    #[arg(long)]
    pub threads: Option<usize>,
    /// JSON destination; stdout when omitted. The summary table goes to stderr.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SectionArg {
    Integrals,
    #[value(name = "m_bound")]
    MBound,
    Mvt,
    Lemmas,
    All,
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Bound(args) => bound::run(&args),
        Command::Curve(args) => curve::run(&args),
        Command::Simulate(args) => simulate::run(&args),
        Command::Adjust(args) => adjust::run(&args),
        Command::Verify(args) => verify::run(&args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
