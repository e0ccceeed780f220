//! `latentml`: synthesize data, run the experiment grid, emit reports,
//! inspect archives and serve a trained model.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use latentml::dataio::{generate_synthetic, save_binary, DEFAULT_UNLABELED};
use latentml::persist::inspect;
use latentml::pipeline::{
    read_run_report, run_experiment, write_reports, ExperimentConfig, FeatureMode,
};
use latentml::service::{serve, ScoringPipeline};
use latentml::{ClassifierKind, Error, SyntheticSpec};

#[derive(Parser)]
#[command(
    name = "latentml",
    version,
    about = "Latent-feature malware classification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labelled dataset in LMLD format.
    Synth {
        #[arg(long, default_value_t = 5000)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        dim: usize,
        #[arg(long, default_value_t = 32)]
        informative: usize,
        #[arg(long, default_value_t = 2.0)]
        sep: f64,
        /// Fraction of positive rows.
        #[arg(long, default_value_t = 0.5)]
        balance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment grid described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `seeds`, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Overrides `feature_mode`.
        #[arg(long)]
        mode: Option<Mode>,
        /// Overrides `classifiers`, comma separated.
        #[arg(long, value_delimiter = ',')]
        classifiers: Option<Vec<String>>,
        /// Leave wall-clock timings out so reruns are byte-identical.
        #[arg(long)]
        no_timings: bool,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Rewrite the CSV tables of a finished run from its run.json.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Serve newline-delimited JSON scoring requests over TCP.
    Serve {
        #[arg(long)]
        scaler: PathBuf,
        /// Omit to serve a classifier trained on raw features.
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        bind: String,
    },
    /// Print an archive's metadata as JSON.
    Inspect { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Raw,
    Latent,
    Both,
}

impl From<Mode> for FeatureMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Raw => FeatureMode::Raw,
            Mode::Latent => FeatureMode::Latent,
            Mode::Both => FeatureMode::Both,
        }
    }
}

enum Failure {
    Usage(String),
    Lib(Error),
    /// Reported as a runtime failure even when the cause is an I/O error.
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Synth {
            n,
            dim,
            informative,
            sep,
            balance,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                n_samples: n,
                feature_dim: dim,
                n_informative: informative,
                class_separation: sep,
                label_balance: balance,
            };
            spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let ds = generate_synthetic(&spec, seed)?;
            save_binary(&ds, Some(DEFAULT_UNLABELED), &out)?;
            eprintln!(
                "wrote {} rows x {} features to {}",
                ds.len(),
                ds.feature_dim(),
                out.display()
            );
        }
        Command::Run {
            config,
            out,
            seeds,
            mode,
            classifiers,
            no_timings,
            quiet,
        } => {
            let mut cfg = ExperimentConfig::load(&config).map_err(|e| match e {
                Error::Precondition(msg) => Failure::Usage(msg),
                other => Failure::Lib(other),
            })?;
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            if let Some(mode) = mode {
                cfg.feature_mode = mode.into();
            }
            if let Some(names) = classifiers {
                cfg.classifiers = names
                    .iter()
                    .map(|n| n.parse::<ClassifierKind>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| Failure::Usage(e.to_string()))?;
            }
            if no_timings {
                cfg.record_timings = false;
            }
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let mut progress = |msg: &str| {
                if !quiet {
                    eprintln!("{msg}");
                }
            };
            let report = run_experiment(&cfg, &mut progress)?;
            eprintln!(
                "{} cells evaluated, {} failed; reports in {}",
                report.cells.len(),
                report.failures.len(),
                cfg.output_dir.display()
            );
        }
        Command::Report { dir } => {
            let report = read_run_report(&dir)?;
            write_reports(&dir, &report)?;
        }
        Command::Serve {
            scaler,
            encoder,
            classifier,
            bind,
        } => {
            let pipeline =
                ScoringPipeline::from_archives(&scaler, encoder.as_deref(), &classifier)?;
            let digest = pipeline.digest().to_string();
            let handle = serve(pipeline, bind.as_str()).map_err(Failure::Runtime)?;
            eprintln!("serving model {digest} on {}", handle.local_addr());
            handle.wait();
        }
        Command::Inspect { path } => {
            let info = inspect(&path)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&info).expect("metadata serializes")
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
