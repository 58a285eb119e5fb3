use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmwcov::cli::{error_record, execute, read_config, threads_from_env, Mode, RunConfig};
use mmwcov::simkernel::Scheme;
use mmwcov::Result;

#[derive(Parser)]
#[command(name = "mmwcov", version, about = "Coverage and rate analysis for mmWave hybrid beamforming")]
struct Cli {
    /// Print the reference configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// analytic, simulate, validate, compare or sweep.
        #[arg(long)]
        mode: Option<String>,
        /// mu, su or sm.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = threads_from_env()? {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    if cli.print_defaults {
        print!("{}", RunConfig::default().canonical_text());
        return Ok(());
    }
    let Some(Command::Run { config, mode, scheme, seed, trials, out }) = cli.command else {
        return Err(mmwcov::Error::param("command", "expected `run --config <file>` or `--print-defaults`"));
    };
    let mut cfg = read_config(&config)?;
    if let Some(m) = mode {
        cfg.mode = Mode::parse(&m)?;
    }
    if let Some(s) = scheme {
        cfg.scheme = Scheme::parse(&s)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = trials {
        if t == 0 {
            return Err(mmwcov::Error::param("trials", "must be at least 1"));
        }
        cfg.trials = t;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    let summary = execute(&cfg)?;
    let text = serde_json::to_string_pretty(&summary).map_err(|e| mmwcov::Error::Io(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(2)
        }
    }
}
