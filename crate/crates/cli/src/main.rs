//! `coadapt` — command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage errors (bad flags, missing input
//! files, invalid arguments), 3 on data errors. Failures print
//! `ERR <ErrorName>: <message>` on standard error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use coadapt_core::Error;

mod commands;

#[derive(Debug, Parser)]
#[command(name = "coadapt", version, about = "Co-adaptation simulation laboratory")]
struct Cli {
    /// Worker threads (default: the config's `workers`, else all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a synthetic population from marginals and microdata.
    Synth {
        /// Long-format marginals CSV (`dimension,category,target`).
        #[arg(long)]
        marginals: PathBuf,
        /// Seed microdata CSV (dimension columns, optional `weight`, attributes).
        #[arg(long)]
        microdata: PathBuf,
        /// Number of agents to draw.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Experiment file whose `population.priors` drive θ and η.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the configured replications of one experiment.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Pin policy coordinates: `name=value[,name=value...]`.
        #[arg(long = "do")]
        intervention: Option<String>,
    },
    /// Run a design sweep and write one feature row per run.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "do")]
        intervention: Option<String>,
    },
    /// Information measures of one series.
    Diagnose {
        /// CSV with a header row (a run CSV or a single column of values).
        #[arg(long)]
        input: PathBuf,
        /// Column to analyze (default: `aggregate`, else the first column).
        #[arg(long)]
        column: Option<String>,
        /// Leading rows to drop.
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        /// Experiment file supplying the `[diagnostics]` settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        alphabet: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster run features.
    Cluster {
        #[arg(long)]
        input: PathBuf,
        /// Number of clusters (default: best silhouette).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = Method::Kmeans)]
        method: Method,
        /// Cumulative explained variance kept by PCA (1 keeps every component).
        #[arg(long, default_value_t = 1.0)]
        pca_variance: f64,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Morris elementary-effects screening.
    Morris {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Kmeans,
    Gmm,
}

fn exit_code(err: &Error) -> u8 {
    match err.name() {
        "FileNotFound" | "InvalidArgument" => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERR {}: {e}", e.name());
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::FileNotFound("x".into())), 2);
        assert_eq!(exit_code(&Error::InvalidArgument("x".into())), 2);
        assert_eq!(exit_code(&Error::NoDonor("x".into())), 3);
        let nested = Error::Replication {
            replication: 0,
            source: Box::new(Error::InvalidArgument("x".into())),
        };
        assert_eq!(exit_code(&nested), 2);
    }

    #[test]
    fn do_flag_parses() {
        let cli = Cli::try_parse_from([
            "coadapt", "simulate", "--config", "a.toml", "--out", "o", "--do", "lambda=2",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate { intervention, .. } => assert_eq!(intervention.as_deref(), Some("lambda=2")),
            _ => panic!("wrong subcommand"),
        }
    }
}
