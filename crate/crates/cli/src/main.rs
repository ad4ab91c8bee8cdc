use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ortholoc_cli::commands::{
    cmd_compare, cmd_gen_flight, cmd_gen_world, cmd_rank, cmd_report, cmd_robustness, cmd_run,
    cmd_sweep,
};
use ortholoc_cli::{with_jobs, CliError, Config, RunRecord};

/// Map-relative particle-filter localization: data generation, runs and
/// experiment sweeps.
#[derive(Parser)]
#[command(name = "ortholoc", version)]
struct Cli {
    /// JSON configuration; relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a procedural orthophoto map.
    GenWorld,
    /// Simulate a flight over the configured map.
    GenFlight,
    /// Run the filter over a stored flight.
    Run,
    /// Repeated runs over scenarios × conversion functions.
    Sweep,
    /// Rank conversion functions from a sweep table.
    Rank {
        #[arg(long)]
        input: PathBuf,
    },
    /// Accuracy change and speedup of run B relative to run A.
    Compare { a: PathBuf, b: PathBuf },
    /// Accuracy against aged maps.
    Robustness,
    /// Chart a run report or a robustness table.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let quiet = cli.quiet;
    let report_progress = move |r: &RunRecord| {
        if quiet {
            return;
        }
        match r.mean_error_m {
            Some(e) => eprintln!(
                "{} {} level={} rep={} error={:.2} m evaluations={:.0}",
                r.scenario,
                r.conversion,
                r.level,
                r.rep,
                e,
                r.mean_evaluations.unwrap_or(0.0)
            ),
            None => eprintln!(
                "{} {} rep={} failed: {}",
                r.scenario, r.conversion, r.rep, r.error
            ),
        }
    };
    let out = &cli.out;
    match &cli.command {
        Command::GenWorld => {
            let path = cmd_gen_world(&load_config(cli)?, out)?;
            if !quiet {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::GenFlight => cmd_gen_flight(&load_config(cli)?, out)?,
        Command::Run => {
            let cfg = load_config(cli)?;
            let report = with_jobs(cli.jobs, || cmd_run(&cfg, out))?;
            let s = report.summary();
            if !quiet {
                println!(
                    "frames={} mean_error_m={:.3} dead_reckoning_m={:.3} mean_evaluations={:.1}",
                    s.frames, s.mean_error_m, s.dr_mean_error_m, s.mean_evaluations
                );
            }
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            with_jobs(cli.jobs, || cmd_sweep(&cfg, out, Some(&report_progress)))?;
        }
        Command::Rank { input } => {
            let rows = cmd_rank(input, out)?;
            if !quiet {
                for r in rows {
                    println!("{:<18} {}", r.conversion, r.total);
                }
            }
        }
        Command::Compare { a, b } => {
            let c = cmd_compare(a, b, out)?;
            if !quiet {
                print!("{}", c.to_text());
            }
        }
        Command::Robustness => {
            let cfg = load_config(cli)?;
            with_jobs(cli.jobs, || {
                cmd_robustness(&cfg, out, Some(&report_progress))
            })?;
        }
        Command::Report { input } => {
            let path = cmd_report(input, out)?;
            if !quiet {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ortholoc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
