//! Run configuration: built-in defaults, overridden by a `key=value` file,
//! overridden by command-line flags.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use fpclass_core::sae::SaeHyper;
use fpclass_core::softmax::SoftmaxTraining;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Hidden sizes before scaling; empty means no autoencoder.
    pub layers: Vec<usize>,
    pub scale: f64,
    /// Weight decay for the first layer.
    pub sae_lambda: f64,
    /// Weight decay for every layer after the first.
    pub sae_deep_lambda: f64,
    /// Sparsity weight for the first layer.
    pub sae_beta: f64,
    /// Sparsity weight for every layer after the first.
    pub sae_deep_beta: f64,
    pub sae_rho: f64,
    pub sae_max_iters: usize,
    pub sae_grad_tol: f64,
    pub softmax_lambda: f64,
    pub softmax_max_iters: usize,
    pub softmax_grad_tol: f64,
    pub threshold: f64,
    pub thresholds: Vec<f64>,
    pub sum_threshold: f64,
    pub reject: f64,
    pub split: f64,
    pub seed: u64,
    pub block: usize,
    pub bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sae = SaeHyper::default();
        let sm = SoftmaxTraining::default();
        Self {
            layers: vec![400, 100, 50],
            scale: 1.0,
            sae_lambda: sae.lambda,
            sae_deep_lambda: 0.0,
            sae_beta: sae.beta,
            sae_deep_beta: 0.0,
            sae_rho: sae.rho,
            sae_max_iters: sae.max_iters,
            sae_grad_tol: sae.grad_tol,
            softmax_lambda: sm.lambda,
            softmax_max_iters: sm.max_iters,
            softmax_grad_tol: sm.grad_tol,
            threshold: 0.6,
            thresholds: vec![0.6, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 1.0],
            sum_threshold: 0.8,
            reject: 0.0,
            split: 0.5,
            seed: 0,
            block: fpclass_core::orientation::DEFAULT_BLOCK,
            bins: fpclass_core::infogain::DEFAULT_BINS,
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>> {
    let value = value.trim();
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| v.trim().parse::<T>().map_err(|_| anyhow::anyhow!("bad list item {v:?}")))
        .collect()
}

fn join<T: ToString>(values: &[T]) -> String {
    if values.is_empty() {
        return "none".into();
    }
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("invalid value {value:?} for {key}"))
}

impl RunConfig {
    pub const KEYS: [&'static str; 20] = [
        "layers",
        "scale",
        "sae_lambda",
        "sae_deep_lambda",
        "sae_beta",
        "sae_deep_beta",
        "sae_rho",
        "sae_max_iters",
        "sae_grad_tol",
        "softmax_lambda",
        "softmax_max_iters",
        "softmax_grad_tol",
        "threshold",
        "thresholds",
        "sum_threshold",
        "reject",
        "split",
        "seed",
        "block",
        "bins",
    ];

    /// Sets one key. Keys accept `-` in place of `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        match key.as_str() {
            "layers" => self.layers = parse_list(value).with_context(|| "invalid layers")?,
            "scale" => self.scale = parse(&key, value)?,
            "sae_lambda" => self.sae_lambda = parse(&key, value)?,
            "sae_deep_lambda" => self.sae_deep_lambda = parse(&key, value)?,
            "sae_beta" => self.sae_beta = parse(&key, value)?,
            "sae_deep_beta" => self.sae_deep_beta = parse(&key, value)?,
            "sae_rho" => self.sae_rho = parse(&key, value)?,
            "sae_max_iters" => self.sae_max_iters = parse(&key, value)?,
            "sae_grad_tol" => self.sae_grad_tol = parse(&key, value)?,
            "softmax_lambda" => self.softmax_lambda = parse(&key, value)?,
            "softmax_max_iters" => self.softmax_max_iters = parse(&key, value)?,
            "softmax_grad_tol" => self.softmax_grad_tol = parse(&key, value)?,
            "threshold" => self.threshold = parse(&key, value)?,
            "thresholds" => self.thresholds = parse_list(value).with_context(|| "invalid thresholds")?,
            "sum_threshold" => self.sum_threshold = parse(&key, value)?,
            "reject" => self.reject = parse(&key, value)?,
            "split" => self.split = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "block" => self.block = parse(&key, value)?,
            "bins" => self.bins = parse(&key, value)?,
            _ => bail!("unknown config key {key:?}"),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "layers" => join(&self.layers),
            "scale" => self.scale.to_string(),
            "sae_lambda" => self.sae_lambda.to_string(),
            "sae_deep_lambda" => self.sae_deep_lambda.to_string(),
            "sae_beta" => self.sae_beta.to_string(),
            "sae_deep_beta" => self.sae_deep_beta.to_string(),
            "sae_rho" => self.sae_rho.to_string(),
            "sae_max_iters" => self.sae_max_iters.to_string(),
            "sae_grad_tol" => self.sae_grad_tol.to_string(),
            "softmax_lambda" => self.softmax_lambda.to_string(),
            "softmax_max_iters" => self.softmax_max_iters.to_string(),
            "softmax_grad_tol" => self.softmax_grad_tol.to_string(),
            "threshold" => self.threshold.to_string(),
            "thresholds" => join(&self.thresholds),
            "sum_threshold" => self.sum_threshold.to_string(),
            "reject" => self.reject.to_string(),
            "split" => self.split.to_string(),
            "seed" => self.seed.to_string(),
            "block" => self.block.to_string(),
            "bins" => self.bins.to_string(),
            _ => return None,
        })
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("config line {}: expected key=value", i + 1))?;
            self.set(key, value).with_context(|| format!("config line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))
    }

    /// One `key=value` line per setting, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in Self::KEYS {
            let _ = writeln!(s, "{key}={}", self.get(key).expect("known key"));
        }
        s
    }

    /// Hidden sizes after applying `scale`, rounding down.
    pub fn layer_sizes(&self) -> Result<Vec<usize>> {
        ensure!(self.scale > 0.0 && self.scale.is_finite(), "scale must be positive");
        self.layers
            .iter()
            .map(|&n| {
                let scaled = (n as f64 * self.scale).floor() as usize;
                ensure!(scaled > 0, "layer of {n} units scales to zero at scale {}", self.scale);
                Ok(scaled)
            })
            .collect()
    }

    pub fn sae_hyper(&self) -> SaeHyper {
        SaeHyper {
            lambda: self.sae_lambda,
            beta: self.sae_beta,
            rho: self.sae_rho,
            max_iters: self.sae_max_iters,
            grad_tol: self.sae_grad_tol,
        }
    }

    /// Per-layer settings for a stack of `depth` layers.
    pub fn sae_hypers(&self, depth: usize) -> Vec<SaeHyper> {
        let first = self.sae_hyper();
        let deep = SaeHyper {
            lambda: self.sae_deep_lambda,
            beta: self.sae_deep_beta,
            ..first
        };
        (0..depth).map(|k| if k == 0 { first } else { deep }).collect()
    }

    pub fn softmax_training(&self) -> SoftmaxTraining {
        SoftmaxTraining {
            lambda: self.softmax_lambda,
            max_iters: self.softmax_max_iters,
            grad_tol: self.softmax_grad_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sae_hypers(2).iter().try_for_each(SaeHyper::check)?;
        self.layer_sizes()?;
        ensure!(
            self.softmax_lambda >= 0.0 && self.softmax_lambda.is_finite(),
            "softmax_lambda must be >= 0"
        );
        ensure!(self.softmax_grad_tol > 0.0, "softmax_grad_tol must be > 0");
        for t in std::iter::once(&self.threshold).chain(&self.thresholds) {
            ensure!((0.0..=1.0).contains(t), "threshold {t} must lie in [0, 1]");
        }
        ensure!(self.sum_threshold.is_finite(), "sum_threshold must be finite");
        ensure!((0.0..1.0).contains(&self.reject), "reject must lie in [0, 1)");
        ensure!(self.split > 0.0 && self.split < 1.0, "split must lie in (0, 1)");
        ensure!(self.block > 0, "block must be positive");
        ensure!(self.bins > 0, "bins must be positive");
        Ok(())
    }
}
