use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use radmorse::pipeline::Backend;
use radmorse_harness::config::{CachePolicy, RunConfig};
use radmorse_harness::record::Status;
use radmorse_harness::sweep::{run_sweep, write_file, Level};
use radmorse_harness::{export, selftest, verify, Result};

#[derive(Parser)]
#[command(name = "radmorse", version, about = "Morse index sweeps for weighted Lane-Emden problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// shooting, matrix or both.
    #[arg(long, global = true)]
    backend: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ignore cached profiles and spectra.
    #[arg(long, global = true)]
    recompute: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the nodal profiles.
    Solve,
    /// Profiles, spectra and diagnostics.
    Spectrum,
    /// Full pipeline through Morse assembly and bound verdicts.
    Morse,
    /// Re-derive and check a stored sweep.
    Verify,
    /// Write export.csv and missing.txt from a stored sweep.
    Export,
    /// Zero-potential comparison table.
    Selftest,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = w.max(1);
    }
    if let Some(b) = &cli.backend {
        cfg.options.backend = Backend::parse(b).ok_or_else(|| radmorse_harness::HarnessError::Config {
            line: 0,
            message: format!("unknown backend {b:?}"),
        })?;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if cli.recompute {
        cfg.cache = CachePolicy::Recompute;
    }
    Ok(cfg)
}

fn run_selftest(cfg: &RunConfig) -> Result<bool> {
    let st = selftest::run(&[2.0, 2.5, 3.0, 4.0], 5, cfg.options.resolution)?;
    write_file(&cfg.out.join("selftest.txt"), &st.render())?;
    println!("selftest {}", if st.passed() { "pass" } else { "fail" });
    Ok(st.passed())
}

fn run_level(cfg: &RunConfig, level: Level) -> Result<bool> {
    let records = run_sweep(cfg, level)?;
    let (mut ok, mut skipped, mut failed) = (0, 0, 0);
    for r in &records {
        match &r.status {
            Status::Ok => ok += 1,
            Status::Skipped(_) => skipped += 1,
            Status::Failed { stage, code, reason } => {
                failed += 1;
                eprintln!("{} failed at {stage} [{code}]: {reason}", r.cell.key());
            }
        }
    }
    println!("cells={} ok={ok} skipped={skipped} failed={failed}", records.len());
    if level == Level::Spectrum && cfg.selftest {
        run_selftest(cfg)?;
    }
    Ok(true)
}

fn run(cli: &Cli) -> Result<bool> {
    let cfg = config(cli)?;
    match cli.command {
        Command::Solve => run_level(&cfg, Level::Profile),
        Command::Spectrum => run_level(&cfg, Level::Spectrum),
        Command::Morse => run_level(&cfg, Level::Morse),
        Command::Verify => {
            let sum = verify::verify(&cfg)?;
            if sum.cells == 0 {
                eprintln!("warning: the sweep has no cells");
            }
            print!("{}", sum.render());
            Ok(sum.passed())
        }
        Command::Export => {
            let sum = export::export(&cfg)?;
            println!("rows={} missing={}", sum.rows, sum.missing);
            Ok(true)
        }
        Command::Selftest => run_selftest(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
