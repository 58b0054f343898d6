use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chronoq::cli::{cmd_metrics, cmd_reconstruct, cmd_simulate, resolve_pulse, with_threads};
use chronoq::config::{load_or_default, RunConfig};
use chronoq::{Error, Result};

/// Chronocyclic Q-function scans: simulate, reconstruct, compare.
#[derive(Parser)]
#[command(name = "chronoq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate photon counts for a pulse and write a dataset plus its theory file.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Inline spec such as `double_pulse:separation=3.0`, or a file holding one.
        #[arg(long)]
        pulse: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Expected counts at the Q-function maximum.
        #[arg(long)]
        scale: Option<f64>,
        /// Expected background counts per scan point.
        #[arg(long)]
        background: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximum-likelihood reconstruction of a dataset into a directory of tables.
    Reconstruct {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Similarity of a dataset to its theory, and fidelity of a reconstruction.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        /// Theory file written by `simulate`.
        #[arg(long)]
        truth: PathBuf,
        /// Output directory of `reconstruct`.
        #[arg(long)]
        recon: Option<PathBuf>,
        /// Write the amplitude/phase comparison table here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn revalidate(cfg: RunConfig, origin: &Option<PathBuf>) -> Result<RunConfig> {
    // Flags bypass the file's own validation, so check the merged result again.
    let path = origin.clone().unwrap_or_else(|| PathBuf::from("<flags>"));
    cfg.pulse_spec()?;
    cfg.mle_options().validate()?;
    if !(cfg.noise.scale > 0.0) || !(cfg.noise.background >= 0.0) {
        return Err(Error::Config {
            path,
            line: None,
            message: "scale must be positive and background non-negative".into(),
        });
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            pulse,
            seed,
            scale,
            background,
            threads,
            out,
        } => {
            let mut cfg = load_or_default(config.as_ref())?;
            if let Some(p) = pulse {
                cfg.pulse = resolve_pulse(&p)?;
            }
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.noise.scale = scale.unwrap_or(cfg.noise.scale);
            cfg.noise.background = background.unwrap_or(cfg.noise.background);
            cfg.threads = threads.unwrap_or(cfg.threads);
            let cfg = revalidate(cfg, &config)?;
            let summary = with_threads(cfg.threads, || cmd_simulate(&cfg, &out))??;
            println!("{summary}");
        }
        Command::Reconstruct {
            config,
            input,
            max_iters,
            tol,
            threads,
            out,
        } => {
            let mut cfg = load_or_default(config.as_ref())?;
            cfg.mle.max_iters = max_iters.unwrap_or(cfg.mle.max_iters);
            cfg.mle.tol = tol.unwrap_or(cfg.mle.tol);
            cfg.threads = threads.unwrap_or(cfg.threads);
            let cfg = revalidate(cfg, &config)?;
            let summary = with_threads(cfg.threads, || cmd_reconstruct(&cfg, &input, &out))??;
            println!("{summary}");
        }
        Command::Metrics {
            input,
            truth,
            recon,
            out,
        } => {
            let report = cmd_metrics(&input, &truth, recon.as_deref())?;
            println!("{report}");
            if let Some(path) = out {
                std::fs::write(&path, report.profile_tsv()).map_err(|e| Error::Io { path, source: e })?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
