//! `fpca`: estimators, generators and benches from the command line.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "fpca", version, about = "Fourier PCA estimators for ICA, tensor pairs and Gaussian mixtures")]
pub struct Cli {
    /// Master seed for Fourier points, generators and replicas.
    #[arg(long, global = true, env = "FPCA_SEED")]
    pub seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true, env = "FPCA_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true, env = "FPCA_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "FPCA_THREADS")]
    pub threads: Option<usize>,
    /// Independent replicas merged by entrywise median (ica, uica).
    #[arg(long, global = true, env = "FPCA_REPLICAS")]
    pub replicas: Option<usize>,
    /// Estimator parameter override, KEY=VALUE in TOML syntax.
    #[arg(short = 'P', long = "param", global = true, value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Mixture learner parameter override, KEY=VALUE in TOML syntax.
    #[arg(short = 'G', long = "gmm-param", global = true, value_name = "KEY=VALUE")]
    pub gmm_params: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Samples as CSV.
    #[arg(long, env = "FPCA_INPUT")]
    pub input: Option<PathBuf>,
    /// The CSV has a header row.
    #[arg(long)]
    pub header: bool,
    /// Model JSON to generate samples from.
    #[arg(long, env = "FPCA_MODEL")]
    pub model: Option<PathBuf>,
    /// Number of samples to generate from `--model`.
    #[arg(long, env = "FPCA_SAMPLES")]
    pub samples: Option<usize>,
    /// Ground-truth model JSON.
    #[arg(long, env = "FPCA_TRUTH")]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fully determined ICA by Fourier PCA.
    Ica {
        #[command(flatten)]
        data: DataArgs,
        /// Use the covariance-difference variant, robust to Gaussian noise.
        #[arg(long)]
        noisy: bool,
    },
    /// Underdetermined ICA from derivative tensors.
    Uica {
        #[command(flatten)]
        data: DataArgs,
        /// Number of sources (defaults to the truth's column count).
        #[arg(long)]
        m: Option<usize>,
    },
    /// Spherical Gaussian mixture learning.
    Gmm {
        #[command(flatten)]
        data: DataArgs,
        /// Number of components (defaults to the truth's).
        #[arg(long)]
        k: Option<usize>,
        /// Use closed-form population moments of `--model` instead of samples.
        #[arg(long)]
        analytic: bool,
    },
    /// Decomposition of a tensor pair file.
    Tensor {
        /// Tensor pair JSON.
        #[arg(long)]
        input: PathBuf,
        /// Component count, or `auto`.
        #[arg(long, default_value = "auto")]
        rank: String,
    },
    /// Khatri-Rao conditioning bench, written as CSV.
    BenchKr {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Synthetic models and samples.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MixingArg {
    /// Haar orthogonal (requires m = n).
    Orthogonal,
    Gaussian,
    Rademacher,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// ICA model JSON and, with `--samples`, a sample CSV.
    Ica {
        #[arg(long)]
        n: usize,
        /// Number of sources (defaults to n).
        #[arg(long)]
        m: Option<usize>,
        /// rademacher, uniform, laplace, gaussian or bernoulli:P.
        #[arg(long, default_value = "rademacher")]
        source: String,
        #[arg(long, value_enum, default_value = "orthogonal")]
        mixing: MixingArg,
        /// Isotropic noise variance.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Order used for the conditioning floor of non-orthogonal mixing.
        #[arg(long, default_value_t = 4)]
        d: usize,
        #[arg(long)]
        samples: Option<usize>,
        /// Where to write the model JSON.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Mixture model JSON and, with `--samples`, a sample CSV.
    Gmm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        /// Distance between every pair of means.
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.2)]
        sd_min: f64,
        #[arg(long, default_value_t = 0.4)]
        sd_max: f64,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Exact tensor pair JSON with its components as truth.
    Tensor {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        m: usize,
        /// Floor on sigma_m of the Khatri-Rao power.
        #[arg(long, default_value_t = 0.02)]
        floor: f64,
        /// Minimum distance between eigenvalue ratios.
        #[arg(long, default_value_t = 0.1)]
        min_gap: f64,
    },
}

/// Merges the config file and the command line; flags and environment win.
fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if cli.replicas.is_some() {
        cfg.replicas = cli.replicas;
    }
    cfg.params = config::apply_overrides(&cfg.params, &cli.params)?;
    cfg.gmm = config::apply_overrides(&cfg.gmm, &cli.gmm_params)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = resolve(&cli)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    commands::dispatch(&cli.command, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.to_json());
            ExitCode::from(f.exit_code as u8)
        }
    }
}
