//! JSON documents written by the CLI.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use brl::inference::{BayesianDecisionList, PointSelection, PosteriorPredictor};
use brl::{Hyperparams, Item, PosteriorEnsemble, RuleList};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{io_error, CliError};

pub const MODEL_FORMAT: &str = "brl-model/1";

/// Seconds since the Unix epoch; the only time-dependent field in any
/// artifact.
pub fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Non-finite diagnostics become `null`.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consequent {
    pub dirichlet_params: Vec<f64>,
    pub mean: Vec<f64>,
    pub interval: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub items: Vec<String>,
    #[serde(flatten)]
    pub consequent: Consequent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcSummary {
    pub r_hat: Option<f64>,
    pub converged: bool,
    pub chains: usize,
    pub iterations: usize,
    pub retained_samples: usize,
    pub acceptance_rates: Vec<f64>,
    pub point_log_posterior: f64,
    pub point_chain: usize,
    pub point_iteration: usize,
    pub window_widened: usize,
}

impl McmcSummary {
    pub fn new(ensemble: &PosteriorEnsemble, point: &PointSelection) -> Self {
        McmcSummary {
            r_hat: finite(ensemble.r_hat),
            converged: ensemble.converged,
            chains: ensemble.traces.len(),
            iterations: ensemble.iterations,
            retained_samples: ensemble.len(),
            acceptance_rates: ensemble.acceptance_rates.clone(),
            point_log_posterior: point.log_posterior,
            point_chain: point.chain,
            point_iteration: point.iteration,
            window_widened: point.widened,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub created_at: u64,
    pub seed: u64,
    pub config: RunConfig,
    pub label_names: Vec<String>,
    /// Item vocabulary new data is encoded against.
    pub items: Vec<Item>,
    pub hyperparameters: Hyperparams,
    pub pool_size: usize,
    /// Antecedent ids of the list within the mined pool.
    pub list: RuleList,
    pub level: f64,
    pub rules: Vec<RuleEntry>,
    pub default_rule: Consequent,
    pub mcmc: McmcSummary,
    /// Distinct sampled lists with multiplicities and training counts;
    /// present when fitted with `--keep-ensemble`.
    pub ensemble: Option<PosteriorPredictor>,
}

fn consequent(model: &BayesianDecisionList, j: usize) -> Consequent {
    Consequent {
        dirichlet_params: model.dirichlet_params[j].clone(),
        mean: model.posterior_means[j].clone(),
        interval: model.credible_intervals[j].clone(),
    }
}

impl ModelArtifact {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: &RunConfig,
        items: &[Item],
        hp: &Hyperparams,
        pool_size: usize,
        model: &BayesianDecisionList,
        mcmc: McmcSummary,
        ensemble: Option<PosteriorPredictor>,
    ) -> Self {
        let rules = model
            .antecedent_items
            .iter()
            .enumerate()
            .map(|(j, ant)| RuleEntry {
                items: ant.iter().map(|&i| items[i].to_string()).collect(),
                consequent: consequent(model, j + 1),
            })
            .collect();
        ModelArtifact {
            format: MODEL_FORMAT.to_string(),
            created_at: now(),
            seed: config.seed,
            config: config.clone(),
            label_names: model.label_names.clone(),
            items: items.to_vec(),
            hyperparameters: hp.clone(),
            pool_size,
            list: model.list.clone(),
            level: model.level,
            rules,
            default_rule: consequent(model, 0),
            mcmc,
            ensemble,
        }
    }

    pub fn read(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        let artifact: ModelArtifact = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{path}: not a model file: {e}")))?;
        if artifact.format != MODEL_FORMAT {
            return Err(CliError::Data(format!(
                "{path}: unsupported model format `{}`",
                artifact.format
            )));
        }
        Ok(artifact)
    }

    /// Rebuilds the in-memory decision list.
    pub fn model(&self) -> Result<BayesianDecisionList, CliError> {
        let index = |text: &str| {
            self.items
                .iter()
                .position(|i| i.to_string() == text)
                .ok_or_else(|| CliError::Data(format!("rule item `{text}` missing from the vocabulary")))
        };
        let antecedent_items = self
            .rules
            .iter()
            .map(|r| r.items.iter().map(|t| index(t)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let rows = std::iter::once(&self.default_rule).chain(self.rules.iter().map(|r| &r.consequent));
        let (mut dirichlet_params, mut posterior_means, mut credible_intervals) = (vec![], vec![], vec![]);
        for c in rows {
            dirichlet_params.push(c.dirichlet_params.clone());
            posterior_means.push(c.mean.clone());
            credible_intervals.push(c.interval.clone());
        }
        Ok(BayesianDecisionList {
            list: self.list.clone(),
            antecedent_text: self.rules.iter().map(|r| r.items.join(" and ")).collect(),
            antecedent_items,
            label_names: self.label_names.clone(),
            n_items: self.items.len(),
            dirichlet_params,
            posterior_means,
            credible_intervals,
            level: self.level,
        })
    }
}

pub fn write_json<T: Serialize>(path: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize {path}: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &str, text: &str) -> Result<(), CliError> {
    if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(path, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
