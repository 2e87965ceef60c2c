use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;

/// Pixel-level fusion of two grayscale images with a Mamdani fuzzy engine or
/// a trained neuro-fuzzy (ANFIS) engine.
#[derive(Debug, Parser)]
#[command(name = "fusecraft", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse an image pair with one method and write the result plus a
    /// provenance sidecar (`<output>.json`).
    Fuse(FuseArgs),
    /// Compute the quality indices for a source pair and a fused image.
    Evaluate(EvaluateArgs),
    /// Fuse a pair with both methods and print a comparison table.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(short = 'a', value_name = "IMAGE")]
    pub a: PathBuf,
    #[arg(short = 'b', value_name = "IMAGE")]
    pub b: PathBuf,
    /// Output image; the extension picks the format (.pgm or .png).
    #[arg(short = 'o', long = "output", value_name = "IMAGE")]
    pub output: PathBuf,
    /// Also write the trained neuro-fuzzy model as JSON.
    #[arg(long, value_name = "PATH")]
    pub save_model: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(short = 'a', value_name = "IMAGE")]
    pub a: PathBuf,
    #[arg(short = 'b', value_name = "IMAGE")]
    pub b: PathBuf,
    #[arg(long, value_name = "IMAGE")]
    pub fused: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(short = 'a', value_name = "IMAGE")]
    pub a: PathBuf,
    #[arg(short = 'b', value_name = "IMAGE")]
    pub b: PathBuf,
    /// Directory for the fused images, their sidecars and the report.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub report: ReportArgs,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Reference image for IQI, RMSE, PSNR and CC (defaults to input A).
    #[arg(long, value_name = "IMAGE")]
    pub reference: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
    #[arg(long, value_enum, default_value_t = PsnrArg::Standard)]
    pub psnr_formula: PsnrArg,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// Engine config (TOML). `compare` accepts one per engine.
    #[arg(long = "config", value_name = "PATH")]
    pub configs: Vec<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Membership functions per input for the neuro-fuzzy engine.
    #[arg(long)]
    pub mfs: Option<usize>,
    #[arg(long)]
    pub step_size: Option<f64>,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
    #[arg(long)]
    pub defuzz_resolution: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Fuzzy,
    Anfis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PsnrArg {
    Standard,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Identity,
    Mean,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Gbell,
    Gaussian,
}

/// Collapses clap's multi-line report into a single diagnostic line.
fn one_line(err: &clap::Error) -> String {
    let text = err.render().to_string();
    text.lines()
        .take_while(|l| !l.starts_with("Usage:"))
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("For more information"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Drops source snippets (`2 | key = 1`, `  | ^^^`) from multi-line
/// messages such as TOML parse errors and joins what is left.
fn squash(message: &str) -> String {
    message
        .lines()
        .map(str::trim)
        .filter(|l| {
            let gutter = l
                .trim_start_matches(|c: char| c.is_ascii_digit())
                .trim_start();
            !l.is_empty() && !gutter.starts_with('|')
        })
        .collect::<Vec<_>>()
        .join(": ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FUSECRAFT_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{}", e.render());
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", one_line(&e));
            return ExitCode::from(2);
        }
    };

    let result = match cli.command {
        Command::Fuse(args) => commands::fuse(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
        Command::Compare(args) => commands::compare(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", squash(&e.to_string()));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

impl From<MethodArg> for fusecraft::Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Fuzzy => fusecraft::Method::Fuzzy,
            MethodArg::Anfis => fusecraft::Method::NeuroFuzzy,
        }
    }
}

impl From<PsnrArg> for fusecraft::PsnrFormula {
    fn from(p: PsnrArg) -> Self {
        match p {
            PsnrArg::Standard => fusecraft::PsnrFormula::Standard,
            PsnrArg::Paper => fusecraft::PsnrFormula::Paper,
        }
    }
}

impl From<TargetArg> for fusecraft::TrainingTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Identity => fusecraft::TrainingTarget::Identity,
            TargetArg::Mean => fusecraft::TrainingTarget::Mean,
            TargetArg::Max => fusecraft::TrainingTarget::Max,
        }
    }
}

impl From<ShapeArg> for fusecraft::PremiseShape {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Gbell => fusecraft::PremiseShape::Gbell,
            ShapeArg::Gaussian => fusecraft::PremiseShape::Gaussian,
        }
    }
}
