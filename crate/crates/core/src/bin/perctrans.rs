//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage/config/missing
//! input, 3 numerical failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use perctrans::analysis::{analyze_dir, summary_csv};
use perctrans::ensemble::{run_ensemble, write_outputs, EnsembleConfig, Grid, StreamKey};
use perctrans::lattice::Lattice;
use perctrans::manifest::{unix_now, RunManifest};
use perctrans::percolation::grow_trajectory;
use perctrans::validate::{run_validation, Fault};
use perctrans::Error;

#[derive(Parser)]
#[command(name = "perctrans", version, about = "Explosive percolation transport simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo ensemble and write curve CSVs plus a manifest.
    Simulate(SimulateArgs),
    /// Grow one lattice and dump its growth history as CSV.
    Trajectory(TrajectoryArgs),
    /// Recompute the threshold summary from curve CSVs.
    Analyze {
        /// Directory holding mu_c.csv and p_w.csv.
        dir: PathBuf,
    },
    /// Run the cross-method validation suite.
    Validate {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Inject a known fault; the suite must then fail.
        #[arg(long)]
        inject_fault: bool,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// INI-style key=value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "L")]
    side: Option<usize>,
    /// Correlation strength; repeat for several.
    #[arg(long = "m")]
    ms: Vec<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    grid_stride: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, env = "PERCTRANS_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[arg(long = "L", default_value_t = 7)]
    side: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Realization index selecting the stream under `seed`.
    #[arg(long, default_value_t = 0)]
    realization: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the 1-based `bond_id site_a site_b` edge list here.
    #[arg(long)]
    edges: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numerical { .. } => 3,
        _ => 2,
    }
}

fn simulate(args: SimulateArgs) -> perctrans::Result<()> {
    let started = unix_now();
    let mut config = EnsembleConfig::default();
    if let Some(path) = &args.config {
        config.apply_ini(&fs::read_to_string(path)?)?;
    }
    if let Some(v) = args.side {
        config.side = v;
    }
    if !args.ms.is_empty() {
        config.ms = args.ms.clone();
    }
    if let Some(v) = args.realizations {
        config.realizations = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.grid_stride {
        config.grid = Grid::Stride(v);
    }
    if let Some(v) = args.threads {
        config.threads = Some(v);
    }
    config.validate()?;
    let result = run_ensemble(&config)?;
    let files = write_outputs(&result, &args.out_dir)?;
    let manifest = RunManifest::finish(config.to_ini(), config.seed, started, &files)?;
    manifest.write_atomic(&args.out_dir)?;
    for s in &result.strengths {
        if !s.retried.is_empty() {
            eprintln!("m={}: {} realizations retried", s.m, s.retried.len());
        }
    }
    eprintln!("wrote {} files to {}", files.len() + 1, args.out_dir.display());
    Ok(())
}

fn trajectory(args: TrajectoryArgs) -> perctrans::Result<()> {
    let lattice = Lattice::new(args.side)?;
    let key = StreamKey::new(args.seed, args.m as u64, args.realization);
    let mut traj = grow_trajectory(&lattice, args.m, &mut key.rng())?;
    traj.seed = Some(key);
    let csv = traj.to_csv();
    match &args.out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.edges {
        fs::write(path, lattice.edge_list())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Trajectory(args) => trajectory(args),
        Command::Analyze { dir } => analyze_dir(&dir).map(|(rows, _)| print!("{}", summary_csv(&rows))),
        Command::Validate { seed, inject_fault } => {
            let fault = inject_fault.then_some(Fault::PerturbEigenvector);
            match run_validation(seed, fault) {
                Ok(report) => {
                    print!("{}", report.render());
                    if !report.passed() {
                        return ExitCode::from(1);
                    }
                    Ok(())
                }
                Err(e) => Err(e),
            }
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
