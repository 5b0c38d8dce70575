//! `csgrad run|sweep-noise|recon-bench|diag --config <path> [--out <dir>]`
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error (including
//! a failed `diag`). `CSGRAD_THREADS` sets the worker pool size.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use csgrad::experiment::{self, Command};
use csgrad::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Sub {
    Run,
    SweepNoise,
    ReconBench,
    Diag,
}

impl Sub {
    fn command(self) -> Command {
        match self {
            Sub::Run => Command::Run,
            Sub::SweepNoise => Command::SweepNoise,
            Sub::ReconBench => Command::ReconBench,
            Sub::Diag => Command::Diag,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "csgrad", version, about = "Compressed gradient SGD experiments")]
struct Cli {
    #[arg(value_enum)]
    command: Sub,
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Ok(v) = std::env::var("CSGRAD_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: cannot set thread pool: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: CSGRAD_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(1);
            }
        }
    }

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let cfg = match experiment::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    if cfg.command != cli.command.command() {
        eprintln!(
            "config error: key `command`: config says `{}` but `{}` was requested",
            cfg.command.name(),
            cli.command.command().name()
        );
        return ExitCode::from(1);
    }
    let out = cli.out.unwrap_or_else(|| cfg.output_path.clone());

    let started = Instant::now();
    let result: Result<bool, Error> = match cfg.command {
        Command::Run | Command::SweepNoise => experiment::run_experiment(&cfg, &out).map(|s| {
            for t in &s.trials {
                println!(
                    "trial {} W={} final_f={} mean_sp_p_last100={}",
                    t.trial,
                    t.noise_std,
                    fmt(t.final_f),
                    fmt(t.mean_sp_p_last100)
                );
            }
            true
        }),
        Command::ReconBench => experiment::recon_bench(&cfg, &out).map(|levels| {
            for l in &levels {
                println!(
                    "lambda={} Q={} fiht={} count_sketch={}",
                    l.lambda,
                    l.q,
                    fmt(l.mean_fiht),
                    fmt(l.mean_count_sketch)
                );
            }
            true
        }),
        Command::Diag => experiment::diag(&cfg).map(|outcomes| {
            for o in &outcomes {
                print!("{}", o.render());
            }
            let ok = outcomes.iter().all(|o| o.passed);
            println!("diag: {}", if ok { "PASS" } else { "FAIL" });
            ok
        }),
    };
    eprintln!("wall time {:.3}s", started.elapsed().as_secs_f64());

    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e @ Error::Config { .. }) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "null".into())
}
