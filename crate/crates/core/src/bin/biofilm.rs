use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use biofilm_core::io::{load_config, run_to_disk};
use biofilm_core::{with_threads, Error};

/// Coupled biofilm growth simulator.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the number of steps derived from `time.t_end / time.dt`.
    #[arg(long)]
    steps: Option<usize>,
    /// Prints the fully expanded configuration and exits.
    #[arg(long)]
    print_config: bool,
    /// Checks the configuration and initial data, then exits.
    #[arg(long)]
    validate_only: bool,
    /// Overrides `initial.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 uses all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn run(args: &Args) -> Result<(), Error> {
    let mut cfg = load_config(&args.config)?;
    if let Some(dir) = &args.out_dir {
        cfg.output.out_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        cfg.initial.seed = seed;
        cfg.validate()?;
    }
    if args.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    if args.validate_only {
        cfg.prepare()?;
        println!("configuration ok: {} steps", args.steps.unwrap_or_else(|| cfg.time.steps()));
        return Ok(());
    }
    let summary = with_threads(args.threads, || run_to_disk(&cfg, args.steps))?;
    let d = &summary.last;
    eprintln!(
        "done: {} steps, t = {:.6}, u in [{:.4e}, {:.4e}], kinetic energy {:.4e}; series {}",
        d.step,
        d.t,
        d.u_min,
        d.u_max,
        d.kinetic_energy,
        summary.series.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
