use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use entroflow::harness::{self, Failure, Overrides, EXIT_CAP, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "entroflow", version, about = "Relative-entropy diagnostics for lattice spin dynamics")]
struct Cli {
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for stochastic runs (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run { config: PathBuf },
    /// Run a parameter grid over a base config.
    Sweep { config: PathBuf },
    /// Print reference values.
    Oracle {
        #[command(subcommand)]
        which: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// 1d Ising pressure from the transfer matrix.
    PressureIsing1d {
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        h: f64,
        /// Periodic chain length (infinite volume when omitted).
        #[arg(long)]
        length: Option<usize>,
    },
    /// Single-site marginal of the flip process started from a point mass.
    FlipMarginal {
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
    },
    /// Relative entropy of a point mass against the uniform measure.
    EntropyPointmassUniform {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        q: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = entroflow::par::configure_threads(n) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let ov = Overrides { out: cli.out, seed: cli.seed };
    let result = match cli.command {
        Command::Run { config } => harness::cmd_run(&config, &ov).map(|d| println!("wrote {}", d.display())),
        Command::Sweep { config } => harness::cmd_sweep(&config, &ov).map(|d| println!("wrote {}", d.display())),
        Command::Oracle { which } => match which {
            Oracle::PressureIsing1d { beta, h, length } => {
                println!("{}", harness::oracle_pressure_ising1d(beta, h, length));
                Ok(())
            }
            Oracle::FlipMarginal { t, rate } => {
                println!("{}", harness::oracle_flip_marginal(t, rate));
                Ok(())
            }
            Oracle::EntropyPointmassUniform { n, q } => harness::oracle_entropy_pointmass_uniform(n, q)
                .map(|h| println!("{h}"))
                .map_err(|e| Failure {
                    code: if matches!(e, entroflow::Error::CapExceeded { .. }) { EXIT_CAP } else { EXIT_CONFIG },
                    message: e.to_string(),
                }),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
