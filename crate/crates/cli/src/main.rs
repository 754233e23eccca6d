use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "metabasin", version, about = "Metabasins of Metropolis chains on finite energy landscapes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filtration, valleys, tree and saddle table.
    Analyze(Opts),
    /// Metropolis trajectory and statistics.
    Simulate(Opts),
    /// Metastate space, jump chain and exponents at one level.
    Aggregate(Opts),
    /// Search for a metabasin level of order `--eps`.
    Mb(Opts),
    /// Run the acceptance checks.
    Verify(Opts),
    /// Render curve CSVs from `verify` as SVG.
    Report(Opts),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Dot,
    Svg,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!("expected lo:hi:n, got {s}"));
    };
    let lo: f64 = lo.parse().map_err(|e| format!("{lo}: {e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("{hi}: {e}"))?;
    let n: usize = n.parse().map_err(|e| format!("{n}: {e}"))?;
    if !(lo > 0.0 && hi >= lo && n >= 1) || (n == 1 && hi != lo) {
        return Err(format!("grid {s} needs 0 < lo <= hi and n >= 1"));
    }
    Ok(Grid(metabasin::analysis::linear_grid(lo, hi, n)))
}

#[derive(Args, Clone, Debug)]
pub struct Opts {
    /// Landscape JSON file.
    #[arg(long, conflicts_with = "canonical")]
    pub landscape: Option<PathBuf>,
    /// Built-in landscape: L6, L14 or L14X.
    #[arg(long)]
    pub canonical: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `lo:hi:n`, evenly spaced.
    #[arg(long, value_parser = parse_grid)]
    pub beta_grid: Option<Grid>,
    /// 1-based filtration level.
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 20240611)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Check names or numbers for `verify`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Trajectory length for `simulate`.
    #[arg(long, default_value_t = 10_000)]
    pub steps: usize,
    /// Starting state label for `simulate`.
    #[arg(long)]
    pub start: Option<i64>,
    /// Directory holding `curves/` for `report`; defaults to `--out`.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(o) => commands::analyze(o),
        Command::Simulate(o) => commands::simulate(o),
        Command::Aggregate(o) => commands::aggregate(o),
        Command::Mb(o) => commands::mb(o),
        Command::Verify(o) => commands::verify(o),
        Command::Report(o) => commands::report(o),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
