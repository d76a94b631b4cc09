use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod manifest;

use commands::Command;

/// Purity dynamics of a qubit under injected transverse noise.
#[derive(Debug, Parser)]
#[command(name = "puritysim", version)]
struct Cli {
    /// Worker threads for shot-level parallelism.
    #[arg(long, global = true, env = "PURITYSIM_THREADS", default_value_t = 1)]
    threads: usize,

    #[command(subcommand)]
    action: Action,
}

#[derive(Debug, Subcommand)]
enum Action {
    /// Ramsey sequence with gated noise.
    Ramsey(RunArgs),
    /// Relaxation from |1> under gated noise.
    Relaxation(RunArgs),
    /// Ramsey runs over `protocol.phi_sweep_deg` with shared noise.
    PhaseSweep(RunArgs),
    /// Ramsey runs averaged over `noise.rotations` noise-frame rotations.
    Isotropic(RunArgs),
    /// Spectrum of a purity series (from `psd.input` or a fresh Ramsey run).
    Psd(RunArgs),
    /// Closed-form predictions on the configured grid.
    Oracle(RunArgs),
    /// Noise traces of one shot.
    NoiseGen(RunArgs),
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    config: PathBuf,
    /// Replaces the master seed from the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the shot count from the file.
    #[arg(long)]
    shots: Option<usize>,
    /// Replaces the output directory from the file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: &RunArgs, cmd: Command, threads: usize) -> Result<()> {
    let mut cfg = config::load(&args.config)?.config;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.shots {
        cfg.shots = n;
    }
    if let Some(d) = &args.out {
        cfg.output.dir = d.clone();
    }
    let (m, mpath) = commands::execute(cmd, &cfg, threads.max(1))?;
    for o in &m.outputs {
        println!("wrote {}", o.path.display());
    }
    println!("wrote {} ({:.2} s)", mpath.display(), m.wall_clock_s);
    Ok(())
}

fn validate(path: &Path) -> Result<()> {
    let loaded = config::load(path)?;
    loaded.config.check()?;
    let c = &loaded.config;
    println!("{}: valid", path.display());
    println!("digest: {}", c.digest());
    let grid = c.protocol.tau_n.values();
    println!(
        "tau_n: {} points, {} .. {} ns",
        grid.len(),
        grid.first().copied().unwrap_or(0.0),
        grid.last().copied().unwrap_or(0.0)
    );
    println!(
        "phi: {} deg; phi sweep: {:?} deg",
        c.protocol.phi_deg, c.protocol.phi_sweep_deg
    );
    for (axis, spec) in [("x", &c.noise.x), ("y", &c.noise.y)] {
        if let Some(s) = spec {
            println!(
                "noise.{axis}: {}",
                toml::to_string(s)?.trim().replace('\n', ", ")
            );
        }
    }
    println!(
        "routing: {:?}, rotations: {}",
        c.noise.two_axis, c.noise.rotations
    );
    let defaulted = loaded.defaulted();
    if !defaulted.is_empty() {
        println!("defaulted fields:");
        for (k, v) in defaulted {
            println!("  {k} = {v}");
        }
    }
    for w in commands::physics_warnings(c) {
        println!("warning: {w}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.action {
        Action::Ramsey(a) => run(a, Command::Ramsey, cli.threads),
        Action::Relaxation(a) => run(a, Command::Relaxation, cli.threads),
        Action::PhaseSweep(a) => run(a, Command::PhaseSweep, cli.threads),
        Action::Isotropic(a) => run(a, Command::Isotropic, cli.threads),
        Action::Psd(a) => run(a, Command::Psd, cli.threads),
        Action::Oracle(a) => run(a, Command::Oracle, cli.threads),
        Action::NoiseGen(a) => run(a, Command::NoiseGen, cli.threads),
        Action::Validate { config } => validate(config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
