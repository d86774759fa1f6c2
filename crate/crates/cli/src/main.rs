use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use repeater_cli::{
    cmd_rates, cmd_simulate, cmd_sweep, cmd_verify, CliError, Output, SimulateOptions, DEFAULT_MAX_ATTEMPTS,
    EXIT_CONFIG,
};
use repeater_core::Scheme;

/// Rates, sweeps, Monte Carlo checks and protocol verification for an
/// atomic-ensemble quantum repeater with fluorescent swap readout.
#[derive(Debug, Parser)]
#[command(name = "repeater", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimized rate, fidelity and error budget at one distance.
    Rates {
        config: PathBuf,
        /// Total distance; defaults to chain.total_km.
        #[arg(long)]
        distance_km: Option<f64>,
        /// new_single_rail, new_dual_rail, ref_dlcz or ref_dual_rail; defaults to chain.scheme.
        #[arg(long)]
        scheme: Option<Scheme>,
    },
    /// Optimized rates of all schemes over log-spaced distances, as CSV.
    Sweep {
        config: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        dmin_km: f64,
        #[arg(long, default_value_t = 2000.0)]
        dmax_km: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo waiting time against the analytic rate.
    Simulate {
        config: PathBuf,
        /// Number of elementary segments (power of two); defaults to 2^chain.nesting_s.
        #[arg(long)]
        segments: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Abort once a trial runs this many attempt periods.
        #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
        max_attempts: u64,
        /// Override the heralding probability per attempt.
        #[arg(long)]
        p0: Option<f64>,
        /// Override the swap success probability.
        #[arg(long)]
        p_swap: Option<f64>,
    },
    /// Exact state-vector checks of the swap protocol.
    Verify,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("REPEATER_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("REPEATER_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot configure thread pool: {e}")))
}

fn emit(output: &Output) {
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", output.stdout);
}

fn run(cli: Cli) -> Result<Output, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Rates {
            config,
            distance_km,
            scheme,
        } => cmd_rates(&config, distance_km, scheme),
        Command::Sweep {
            config,
            dmin_km,
            dmax_km,
            points,
            out,
        } => cmd_sweep(&config, dmin_km, dmax_km, points, out.as_deref()),
        Command::Simulate {
            config,
            segments,
            trials,
            seed,
            max_attempts,
            p0,
            p_swap,
        } => {
            let opts = SimulateOptions {
                segments,
                trials,
                seed,
                max_attempts,
                p0,
                p_swap,
            };
            cmd_simulate(&config, &opts)
        }
        Command::Verify => cmd_verify().map_err(|(output, err)| {
            emit(&output);
            err
        }),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(cli) {
        Ok(output) => {
            emit(&output);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
