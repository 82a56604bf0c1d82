//! `hmimos`: runs one pipeline stage on a scenario file, or a named figure
//! preset, and writes CSV files into the output directory.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when a precoder
//! meets a degenerate scenario, 1 for anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hmimos_core::config::{parse_config, parse_pa, parse_schemes, parse_sweep, parse_tol, RunConfig};
use hmimos_core::experiments::{run_preset, run_stage, Artifact, Stage, PRESETS};
use hmimos_core::Error;

#[derive(Parser, Debug)]
#[command(name = "hmimos", version, about = "Near-field tri-polarized HMIMOS experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Run a named figure preset instead of a scenario file.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Scenario file (flat dotted key = value).
    #[arg(long, global = true, value_name = "PATH")]
    scenario: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// SNR sweep in dB, `start:step:stop` or a single value.
    #[arg(long, global = true, value_name = "START:STEP:STOP", allow_hyphen_values = true)]
    snr: Option<String>,

    /// Comma-separated precoding schemes (uc, two-layer).
    #[arg(long, alias = "scheme", global = true, value_name = "LIST")]
    schemes: Option<String>,

    /// Comma-separated power allocations (pa1, pa2, pa3).
    #[arg(long, global = true, value_name = "LIST")]
    pa: Option<String>,

    /// Relative rank tolerance.
    #[arg(long, global = true, value_name = "REAL")]
    tol: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Stacked tri-polarized channel.
    Channel,
    /// Transmit-side spatial correlation per user distance.
    Correlation,
    /// DoF per user.
    Dof,
    /// Tri-, dual- and single-polarized capacity over the SNR sweep.
    Capacity,
    /// Spectral efficiency per (scheme, pa, snr).
    PrecodeSweep,
    /// List the figure presets.
    Presets,
}

struct Failure {
    stage: String,
    error: Error,
}

fn fail(stage: &str) -> impl FnOnce(Error) -> Failure + '_ {
    move |error| Failure {
        stage: stage.to_string(),
        error,
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Geometry(_) | Error::Tolerance(_) => 2,
        Error::Degenerate { .. } | Error::CapacityExceeded { .. } => 3,
        _ => 1,
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("HMIMOS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| fail("setup")(Error::Config(format!("HMIMOS_THREADS must be a positive integer, got '{v}'"))))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| fail("setup")(Error::Config(e.to_string())))
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| fail("config")(Error::Config("--scenario <path> or --preset <name> is required".into())))?;
    let text = fs::read_to_string(path)
        .map_err(|e| fail("config")(Error::Config(format!("cannot read {}: {e}", path.display()))))?;
    let mut cfg = parse_config(&text).map_err(fail("config"))?;
    let s = &mut cfg.settings;
    if let Some(v) = &cli.snr {
        s.snr_db = parse_sweep(v).map_err(fail("config"))?;
    }
    if let Some(v) = &cli.schemes {
        s.schemes = parse_schemes(v).map_err(fail("config"))?;
    }
    if let Some(v) = &cli.pa {
        s.pa = parse_pa(v).map_err(fail("config"))?;
    }
    if let Some(v) = &cli.tol {
        s.tol = parse_tol(v).map_err(fail("config"))?;
    }
    Ok(cfg)
}

fn write_all(dir: &Path, files: &[Artifact]) -> Result<(), Failure> {
    let io = |e: std::io::Error| fail("output")(Error::Config(format!("{}: {e}", dir.display())));
    fs::create_dir_all(dir).map_err(io)?;
    for a in files {
        let path = dir.join(&a.name);
        fs::write(&path, &a.content).map_err(io)?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(Command::Presets) = cli.command {
        for p in PRESETS {
            println!("{p}");
        }
        return Ok(());
    }
    configure_threads()?;
    if let Some(name) = &cli.preset {
        if cli.command.is_some() || cli.scenario.is_some() {
            return Err(fail("config")(Error::Config(
                "--preset cannot be combined with a subcommand or --scenario".into(),
            )));
        }
        let files = run_preset(name).map_err(fail(name))?;
        return write_all(&cli.out, &files);
    }
    let stage = match cli.command {
        Some(Command::Channel) => Stage::Channel,
        Some(Command::Correlation) => Stage::Correlation,
        Some(Command::Dof) => Stage::Dof,
        Some(Command::Capacity) => Stage::Capacity,
        Some(Command::PrecodeSweep) => Stage::PrecodeSweep,
        Some(Command::Presets) => unreachable!(),
        None => {
            return Err(fail("config")(Error::Config(
                "a subcommand or --preset <name> is required".into(),
            )))
        }
    };
    let cfg = load(cli)?;
    let files = run_stage(stage, &cfg).map_err(fail(stage.label()))?;
    write_all(&cli.out, &files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("hmimos: {} failed: {}", f.stage, f.error);
            ExitCode::from(exit_code(&f.error))
        }
    }
}
