//! Run configuration: a `key = value` file merged under command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use brl::data::LoadOptions;
use brl::eval::CvConfig;
use brl::{EnsembleConfig, Execution, Hyperparams};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Settings shared by the data-driven subcommands. Every field is optional
/// so a config file and flags can be layered; unset fields fall back to
/// [`RunConfig::default`].
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Config file of `key = value` lines using the long flag names.
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Input CSV with a header row.
    #[arg(long, value_name = "CSV")]
    pub data: Option<String>,

    /// Name of the label column.
    #[arg(long = "label-col", value_name = "NAME")]
    pub label_col: Option<String>,

    /// Numeric column thresholds, e.g. `age=18,65`. Repeatable.
    #[arg(long, value_name = "COL=T1,T2,..")]
    #[serde(default)]
    pub thresholds: Vec<String>,

    /// Numeric column quantile bins, e.g. `age=4`. Repeatable.
    #[arg(long, value_name = "COL=K")]
    #[serde(default)]
    pub quantiles: Vec<String>,

    /// Columns that must hold only 0/1. Repeatable.
    #[arg(long, value_name = "COL")]
    #[serde(default)]
    pub binary: Vec<String>,

    #[arg(long = "min-support", value_name = "FRACTION")]
    pub min_support: Option<f64>,

    #[arg(long = "max-card", value_name = "C")]
    pub max_card: Option<usize>,

    /// Prior mean list length.
    #[arg(long)]
    pub lambda: Option<f64>,

    /// Prior mean antecedent cardinality.
    #[arg(long)]
    pub eta: Option<f64>,

    /// Dirichlet prior, one value per label, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub alpha: Option<Vec<f64>>,

    #[arg(long)]
    pub chains: Option<usize>,

    /// Initial iterations per chain.
    #[arg(long)]
    pub iters: Option<usize>,

    /// Iteration cap per chain when R-hat has not converged.
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,

    #[arg(long = "rhat-threshold")]
    pub rhat_threshold: Option<f64>,

    #[arg(long)]
    pub thin: Option<usize>,

    /// Credible interval level.
    #[arg(long)]
    pub level: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,
}

impl Settings {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("config {}: {}", path.display(), e.message())))
    }

    /// `self` overridden by every field set in `top`.
    pub fn merged_under(self, top: Settings) -> Settings {
        fn pick<T>(low: Option<T>, high: Option<T>) -> Option<T> {
            high.or(low)
        }
        fn pick_vec<T>(low: Vec<T>, high: Vec<T>) -> Vec<T> {
            if high.is_empty() {
                low
            } else {
                high
            }
        }
        Settings {
            config: pick(self.config, top.config),
            data: pick(self.data, top.data),
            label_col: pick(self.label_col, top.label_col),
            thresholds: pick_vec(self.thresholds, top.thresholds),
            quantiles: pick_vec(self.quantiles, top.quantiles),
            binary: pick_vec(self.binary, top.binary),
            min_support: pick(self.min_support, top.min_support),
            max_card: pick(self.max_card, top.max_card),
            lambda: pick(self.lambda, top.lambda),
            eta: pick(self.eta, top.eta),
            alpha: pick(self.alpha, top.alpha),
            chains: pick(self.chains, top.chains),
            iters: pick(self.iters, top.iters),
            max_iters: pick(self.max_iters, top.max_iters),
            rhat_threshold: pick(self.rhat_threshold, top.rhat_threshold),
            thin: pick(self.thin, top.thin),
            level: pick(self.level, top.level),
            seed: pick(self.seed, top.seed),
        }
    }

    /// Loads the config file named by `--config`, if any, and layers the
    /// flags over it.
    pub fn resolve(self, command: &str) -> Result<RunConfig, CliError> {
        let layered = match &self.config {
            Some(path) => Settings::from_file(path)?.merged_under(self),
            None => self,
        };
        RunConfig::from_settings(command, layered)
    }
}

/// Fully resolved configuration, embedded verbatim in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub data: Option<String>,
    pub label_col: Option<String>,
    pub thresholds: BTreeMap<String, Vec<f64>>,
    pub quantiles: BTreeMap<String, usize>,
    pub binary: Vec<String>,
    pub min_support: f64,
    pub max_card: usize,
    pub lambda: f64,
    pub eta: f64,
    pub alpha: Option<Vec<f64>>,
    pub chains: usize,
    pub iters: usize,
    pub max_iters: usize,
    pub rhat_threshold: f64,
    pub thin: usize,
    pub level: f64,
    pub seed: u64,
    /// Subcommand-specific values such as output paths and fold counts.
    pub extra: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let ens = EnsembleConfig::default();
        RunConfig {
            command: String::new(),
            data: None,
            label_col: None,
            thresholds: BTreeMap::new(),
            quantiles: BTreeMap::new(),
            binary: Vec::new(),
            min_support: 0.1,
            max_card: 2,
            lambda: 3.0,
            eta: 1.0,
            alpha: None,
            chains: ens.chains,
            iters: ens.initial_iterations,
            max_iters: ens.max_iterations,
            rhat_threshold: ens.r_hat_threshold,
            thin: ens.thin,
            level: brl::inference::DEFAULT_LEVEL,
            seed: 0,
            extra: BTreeMap::new(),
        }
    }
}

fn split_assignment(s: &str) -> Result<(&str, &str), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, v)| !k.is_empty() && !v.is_empty())
        .ok_or_else(|| CliError::Usage(format!("expected COLUMN=VALUES, got `{s}`")))
}

fn parse_thresholds(specs: &[String]) -> Result<BTreeMap<String, Vec<f64>>, CliError> {
    let mut out = BTreeMap::new();
    for s in specs {
        let (col, values) = split_assignment(s)?;
        let ts = values
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("bad threshold `{t}` for column `{col}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.insert(col.to_string(), ts);
    }
    Ok(out)
}

fn parse_quantiles(specs: &[String]) -> Result<BTreeMap<String, usize>, CliError> {
    let mut out = BTreeMap::new();
    for s in specs {
        let (col, k) = split_assignment(s)?;
        let k = k
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("bad bin count `{k}` for column `{col}`")))?;
        out.insert(col.to_string(), k);
    }
    Ok(out)
}

impl RunConfig {
    pub fn from_settings(command: &str, s: Settings) -> Result<Self, CliError> {
        let d = RunConfig::default();
        let config = RunConfig {
            command: command.to_string(),
            data: s.data,
            label_col: s.label_col,
            thresholds: parse_thresholds(&s.thresholds)?,
            quantiles: parse_quantiles(&s.quantiles)?,
            binary: s.binary,
            min_support: s.min_support.unwrap_or(d.min_support),
            max_card: s.max_card.unwrap_or(d.max_card),
            lambda: s.lambda.unwrap_or(d.lambda),
            eta: s.eta.unwrap_or(d.eta),
            alpha: s.alpha,
            chains: s.chains.unwrap_or(d.chains),
            iters: s.iters.unwrap_or(d.iters),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            rhat_threshold: s.rhat_threshold.unwrap_or(d.rhat_threshold),
            thin: s.thin.unwrap_or(d.thin),
            level: s.level.unwrap_or(d.level),
            seed: s.seed.unwrap_or(d.seed),
            extra: BTreeMap::new(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return bad(format!("--min-support must lie in (0, 1], got {}", self.min_support));
        }
        if self.max_card == 0 {
            return bad("--max-card must be at least 1".into());
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) || !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("--lambda and --eta must be positive".into());
        }
        if let Some(a) = &self.alpha {
            if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return bad("--alpha entries must be positive".into());
            }
        }
        if self.chains < 2 {
            return bad(format!("--chains must be at least 2, got {}", self.chains));
        }
        if self.iters < 4 || self.max_iters < self.iters {
            return bad(format!(
                "need 4 <= --iters ({}) <= --max-iters ({})",
                self.iters, self.max_iters
            ));
        }
        if self.rhat_threshold.is_nan() || self.rhat_threshold <= 1.0 {
            return bad("--rhat-threshold must exceed 1".into());
        }
        if self.thin == 0 {
            return bad("--thin must be at least 1".into());
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad("--level must lie in (0, 1)".into());
        }
        Ok(())
    }

    pub fn require_data(&self) -> Result<(&str, &str), CliError> {
        let data = self
            .data
            .as_deref()
            .ok_or_else(|| CliError::Usage("--data is required".into()))?;
        let label = self
            .label_col
            .as_deref()
            .ok_or_else(|| CliError::Usage("--label-col is required".into()))?;
        Ok((data, label))
    }

    pub fn load_options(&self) -> Result<LoadOptions, CliError> {
        let (_, label) = self.require_data()?;
        let mut opts = LoadOptions::new(label);
        opts.thresholds = self.thresholds.clone();
        opts.quantiles = self.quantiles.clone();
        opts.binary = self.binary.iter().cloned().collect();
        Ok(opts)
    }

    pub fn hyperparams(&self, n_labels: usize) -> Result<Hyperparams, CliError> {
        let mut hp = Hyperparams::new(self.lambda, self.eta, n_labels);
        if let Some(alpha) = &self.alpha {
            if alpha.len() != n_labels {
                return Err(CliError::Usage(format!(
                    "--alpha has {} values but the data has {n_labels} labels",
                    alpha.len()
                )));
            }
            hp.alpha = alpha.clone();
        }
        Ok(hp)
    }

    pub fn ensemble(&self, execution: Execution) -> EnsembleConfig {
        EnsembleConfig {
            chains: self.chains,
            initial_iterations: self.iters,
            max_iterations: self.max_iters,
            r_hat_threshold: self.rhat_threshold,
            thin: self.thin,
            execution,
        }
    }

    pub fn cv(&self, execution: Execution, stratified: bool) -> CvConfig {
        CvConfig {
            min_support: self.min_support,
            max_cardinality: self.max_card,
            lambda: self.lambda,
            eta: self.eta,
            alpha: self.alpha.clone(),
            ensemble: self.ensemble(execution),
            stratified,
            execution,
        }
    }
}
