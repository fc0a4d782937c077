use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, ValueEnum};
use worstcase::{run, Artifacts, Config, Rayon, RunError, Subcommand};

#[derive(Parser)]
#[command(name = "worstcase", version, about = "Worst-case American option values under uncertain regime-switching rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Value surface and price for a fixed rate matrix
    Price(Common),
    /// Worst-case HJB solve compared against the extremal matrix
    Worstcase(Common),
    /// Exercise boundaries per regime
    Boundary(Common),
    /// Dominance of the extremal matrix over sampled and enumerated matrices
    VerifyExtremal(Common),
    /// Monte Carlo saddle-point and lower-bound checks
    Game(Common),
    /// Moment bound for the running maximum
    Moments(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Overrides `mc.seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of CPUs
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

fn write_outputs(dir: &Path, format: Format, a: &Artifacts) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    match format {
        Format::Json => std::fs::write(dir.join(format!("{}.json", a.subcommand.name())), &a.json)?,
        Format::Csv => {
            for (name, contents) in &a.csv {
                std::fs::write(dir.join(name), contents)?;
            }
            std::fs::write(dir.join("checks.csv"), a.checks_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, common) = match cli.command {
        Command::Price(c) => (Subcommand::Price, c),
        Command::Worstcase(c) => (Subcommand::Worstcase, c),
        Command::Boundary(c) => (Subcommand::Boundary, c),
        Command::VerifyExtremal(c) => (Subcommand::VerifyExtremal, c),
        Command::Game(c) => (Subcommand::Game, c),
        Command::Moments(c) => (Subcommand::Moments, c),
    };
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let mut cfg = match Config::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = common.seed {
        cfg.mc.seed = seed;
    }
    let artifacts = match run(&Rayon, sub, &cfg) {
        Ok(a) => a,
        Err(e @ RunError::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&common.out, common.format, &artifacts) {
        eprintln!("error: writing {}: {e}", common.out.display());
        return ExitCode::from(1);
    }
    for c in &artifacts.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<_> = artifacts.failures().map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("check failed: {}", failed.join(", "));
        ExitCode::from(1)
    }
}
