//! The `fpclass` command-line pipeline.
//!
//! Every subcommand writes its report to the supplied writer so that the
//! binary and the tests share one code path. Progress goes to stderr.

pub mod commands;
pub mod config;
pub mod data;

use std::io::Write;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "fpclass", version, about = "Fingerprint classification from orientation fields")]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigFlags,

    #[command(subcommand)]
    pub command: Option<Command>,
}

/// Settings shared by all subcommands. Each overrides the config file.
#[derive(Debug, Default, Args)]
pub struct ConfigFlags {
    /// Read settings from a file of `key=value` lines
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the resolved settings and exit
    #[arg(long, global = true)]
    pub show_config: bool,
    /// Comma-separated hidden layer sizes, or `none`
    #[arg(long, global = true)]
    pub layers: Option<String>,
    /// Multiplier applied to every hidden layer size (rounded down)
    #[arg(long, global = true)]
    pub scale: Option<String>,
    /// Weight decay of the first autoencoder layer
    #[arg(long, global = true)]
    pub sae_lambda: Option<String>,
    /// Weight decay of the deeper autoencoder layers
    #[arg(long, global = true)]
    pub sae_deep_lambda: Option<String>,
    /// Sparsity weight of the first autoencoder layer
    #[arg(long, global = true)]
    pub sae_beta: Option<String>,
    /// Sparsity weight of the deeper autoencoder layers
    #[arg(long, global = true)]
    pub sae_deep_beta: Option<String>,
    #[arg(long, global = true)]
    pub sae_rho: Option<String>,
    #[arg(long, global = true)]
    pub sae_max_iters: Option<String>,
    #[arg(long, global = true)]
    pub sae_grad_tol: Option<String>,
    #[arg(long, global = true)]
    pub softmax_lambda: Option<String>,
    #[arg(long, global = true)]
    pub softmax_max_iters: Option<String>,
    #[arg(long, global = true)]
    pub softmax_grad_tol: Option<String>,
    /// Top probability below which a second class is assigned
    #[arg(long, global = true)]
    pub threshold: Option<String>,
    /// Comma-separated thresholds for the evaluation sweep
    #[arg(long, global = true)]
    pub thresholds: Option<String>,
    /// Flag samples whose top two probabilities sum below this
    #[arg(long, global = true)]
    pub sum_threshold: Option<String>,
    /// Fraction of lowest-confidence samples to reject
    #[arg(long, global = true)]
    pub reject: Option<String>,
    /// Fraction of samples used for training
    #[arg(long, global = true)]
    pub split: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Block size in pixels for images
    #[arg(long, global = true)]
    pub block: Option<String>,
    /// Bins per feature for information gain
    #[arg(long, global = true)]
    pub bins: Option<String>,
}

impl ConfigFlags {
    fn overrides(&self) -> [(&'static str, &Option<String>); 20] {
        [
            ("layers", &self.layers),
            ("scale", &self.scale),
            ("sae_lambda", &self.sae_lambda),
            ("sae_deep_lambda", &self.sae_deep_lambda),
            ("sae_beta", &self.sae_beta),
            ("sae_deep_beta", &self.sae_deep_beta),
            ("sae_rho", &self.sae_rho),
            ("sae_max_iters", &self.sae_max_iters),
            ("sae_grad_tol", &self.sae_grad_tol),
            ("softmax_lambda", &self.softmax_lambda),
            ("softmax_max_iters", &self.softmax_max_iters),
            ("softmax_grad_tol", &self.softmax_grad_tol),
            ("threshold", &self.threshold),
            ("thresholds", &self.thresholds),
            ("sum_threshold", &self.sum_threshold),
            ("reject", &self.reject),
            ("split", &self.split),
            ("seed", &self.seed),
            ("block", &self.block),
            ("bins", &self.bins),
        ]
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        for (key, value) in self.overrides() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    Train,
    Test,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled dataset of orientation fields
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 250)]
        per_class: usize,
        /// Standard deviation of angle noise in radians
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 25)]
        rows: usize,
        #[arg(long, default_value_t = 25)]
        cols: usize,
    },
    /// Train the autoencoder stack and classifier on the training split
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Classify one `.of` or `.pgm` input
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Confusion matrix, threshold sweep and recall report
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = Subset::Test)]
        subset: Subset,
    },
    /// Write the orientation field decoded by the autoencoder stack
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank angle encodings by mean information gain
    Infogain {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated schemes (f1..f6)
        #[arg(long, default_value = "f1,f2,f3,f4,f5,f6")]
        schemes: String,
    },
}

/// Runs a parsed command line, writing the report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = cli.config.resolve()?;
    if cli.config.show_config {
        out.write_all(cfg.to_text().as_bytes())?;
        return Ok(());
    }
    let Some(command) = &cli.command else {
        anyhow::bail!("no subcommand given (try --help)");
    };
    commands::dispatch(command, &cfg, out)
}
