//! From posterior samples to classifiers.
//!
//! A fitted [`BayesianDecisionList`] carries, for every rule and the default,
//! the posterior Dirichlet parameters `alpha + N_j`, the posterior mean label
//! distribution and per-label credible intervals. Row 0 is always the
//! default rule and row `j` the `j`-th antecedent, so a matched rule index of
//! 0 means "nothing matched".

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mcmc::{EnsembleSample, PosteriorEnsemble};
use crate::mining::AntecedentPool;
use crate::model::{compute_counts, CountMatrix, RuleList};

pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesianDecisionList {
    pub list: RuleList,
    /// Item column indices of each antecedent, in list order.
    pub antecedent_items: Vec<Vec<usize>>,
    /// Rendered condition of each antecedent, in list order.
    pub antecedent_text: Vec<String>,
    pub label_names: Vec<String>,
    /// Width of the binary feature vectors the model scores.
    pub n_items: usize,
    /// `(m+1) x L`, row 0 the default rule.
    pub dirichlet_params: Vec<Vec<f64>>,
    pub posterior_means: Vec<Vec<f64>>,
    pub credible_intervals: Vec<Vec<(f64, f64)>>,
    pub level: f64,
}

impl BayesianDecisionList {
    pub fn n_rules(&self) -> usize {
        self.list.len()
    }

    /// Index of the first antecedent satisfied by `x`, or 0 for the default.
    pub fn matched_rule(&self, x: &[bool]) -> usize {
        self.antecedent_items
            .iter()
            .position(|items| items.iter().all(|&i| x[i]))
            .map_or(0, |j| j + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    /// `0` for the default rule, otherwise the 1-based list position.
    pub matched_rule_index: usize,
    pub explanation: String,
}

/// Posterior mean of a Dirichlet row.
pub fn dirichlet_mean(row: &[f64]) -> Vec<f64> {
    let total: f64 = row.iter().sum();
    row.iter().map(|a| a / total).collect()
}

/// Equal-tailed interval of label `label`'s marginal
/// `Beta(a_l, sum_{k != l} a_k)` at the given level.
pub fn credible_interval(row: &[f64], label: usize, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("credible level {level} outside (0, 1)")));
    }
    if row.len() < 2 || label >= row.len() || row.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidArgument("Dirichlet row must hold at least two positive parameters".into()));
    }
    let a = row[label];
    let b: f64 = row.iter().sum::<f64>() - a;
    let beta = Beta::new(a, b).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let tail = (1.0 - level) / 2.0;
    Ok((beta.inverse_cdf(tail), beta.inverse_cdf(1.0 - tail)))
}

/// Posterior consequents of list `d` on `dataset`.
pub fn fit_consequents(
    d: &RuleList,
    pool: &AntecedentPool,
    dataset: &Dataset,
    alpha: &[f64],
    level: f64,
) -> Result<BayesianDecisionList> {
    if alpha.len() != dataset.n_labels() {
        return Err(Error::SizeMismatch {
            expected: dataset.n_labels(),
            found: alpha.len(),
        });
    }
    let counts = compute_counts(d, pool, dataset)?;
    let dirichlet_params: Vec<Vec<f64>> = counts
        .rows()
        .map(|r| r.iter().zip(alpha).map(|(&c, &a)| a + c as f64).collect())
        .collect();
    let posterior_means = dirichlet_params.iter().map(|r| dirichlet_mean(r)).collect();
    let credible_intervals = dirichlet_params
        .iter()
        .map(|r| (0..r.len()).map(|l| credible_interval(r, l, level)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    Ok(BayesianDecisionList {
        list: d.clone(),
        antecedent_items: d
            .ids()
            .iter()
            .map(|&id| pool.antecedent(id).items.clone())
            .collect(),
        antecedent_text: d.ids().iter().map(|&id| pool.describe(id, dataset)).collect(),
        label_names: dataset.label_names().to_vec(),
        n_items: dataset.n_items(),
        dirichlet_params,
        posterior_means,
        credible_intervals,
        level,
    })
}

/// First-match prediction from the posterior mean consequents.
pub fn predict_point(model: &BayesianDecisionList, x: &[bool]) -> Result<Prediction> {
    if x.len() != model.n_items {
        return Err(Error::SizeMismatch {
            expected: model.n_items,
            found: x.len(),
        });
    }
    let j = model.matched_rule(x);
    let explanation = if j == 0 {
        "default rule".to_string()
    } else {
        model.antecedent_text[j - 1].clone()
    };
    Ok(Prediction {
        probabilities: model.posterior_means[j].clone(),
        matched_rule_index: j,
        explanation,
    })
}

/// Outcome of the BRL-point search.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSelection {
    pub list: RuleList,
    pub log_posterior: f64,
    pub chain: usize,
    pub iteration: usize,
    /// Times the length/cardinality window was widened to find a sample.
    pub widened: usize,
}

fn better(candidate: &EnsembleSample, best: Option<&EnsembleSample>) -> bool {
    match best {
        None => true,
        Some(b) => {
            candidate.log_posterior > b.log_posterior
                || (candidate.log_posterior == b.log_posterior
                    && (candidate.chain, candidate.iteration) < (b.chain, b.iteration))
        }
    }
}

fn selection(s: &EnsembleSample, widened: usize) -> PointSelection {
    PointSelection {
        list: s.list.clone(),
        log_posterior: s.log_posterior,
        chain: s.chain,
        iteration: s.iteration,
        widened,
    }
}

/// Highest-posterior sample whose length is `floor` or `ceil` of the mean
/// length and whose mean cardinality lies between `floor` and `ceil` of the
/// ensemble's average mean cardinality.
pub fn select_brl_point(ensemble: &PosteriorEnsemble, pool: &AntecedentPool) -> Result<PointSelection> {
    let samples = &ensemble.samples;
    if samples.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let s = samples.len();
    let total_m: usize = samples.iter().map(|x| x.list.len()).sum();
    let m_lo = total_m / s;
    let m_hi = total_m.div_ceil(s);
    let cards: Vec<f64> = samples.iter().map(|x| x.list.mean_cardinality(pool)).collect();
    let c_mean = cards.iter().sum::<f64>() / s as f64;
    let c_lo = c_mean.floor();
    let c_hi = c_mean.ceil();

    let mut widened = 0usize;
    loop {
        let w = widened as f64;
        let (ml, mh) = (m_lo.saturating_sub(widened), m_hi + widened);
        let (cl, ch) = (c_lo - w, c_hi + w);
        let mut best: Option<&EnsembleSample> = None;
        for (x, &c) in samples.iter().zip(&cards) {
            let m = x.list.len();
            if m >= ml && m <= mh && c >= cl && c <= ch && better(x, best) {
                best = Some(x);
            }
        }
        if let Some(b) = best {
            if widened > 0 {
                log::warn!("BRL-point window was empty; widened {widened} time(s)");
            }
            return Ok(selection(b, widened));
        }
        widened += 1;
    }
}

/// Globally highest-posterior sample.
pub fn select_map(ensemble: &PosteriorEnsemble) -> Result<PointSelection> {
    let mut best: Option<&EnsembleSample> = None;
    for x in &ensemble.samples {
        if better(x, best) {
            best = Some(x);
        }
    }
    best.map(|b| selection(b, 0)).ok_or(Error::EmptyEnsemble)
}

/// One distinct sampled list with its multiplicity and training counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorComponent {
    pub list: RuleList,
    pub weight: usize,
    pub counts: CountMatrix,
}

/// Posterior predictive: the sample-weighted average of each sampled list's
/// point prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPredictor {
    /// Item column indices of every antecedent referenced by a component.
    pub antecedent_items: BTreeMap<usize, Vec<usize>>,
    pub components: Vec<PosteriorComponent>,
    pub alpha: Vec<f64>,
    pub n_items: usize,
}

impl PosteriorPredictor {
    /// Groups the ensemble by distinct list and fits each list's counts on
    /// `dataset`, the training data.
    pub fn new(
        ensemble: &PosteriorEnsemble,
        pool: &AntecedentPool,
        dataset: &Dataset,
        alpha: &[f64],
    ) -> Result<Self> {
        if ensemble.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        if alpha.len() != dataset.n_labels() {
            return Err(Error::SizeMismatch {
                expected: dataset.n_labels(),
                found: alpha.len(),
            });
        }
        let mut weights: BTreeMap<&RuleList, usize> = BTreeMap::new();
        for s in &ensemble.samples {
            *weights.entry(&s.list).or_default() += 1;
        }
        let mut antecedent_items = BTreeMap::new();
        let mut components = Vec::with_capacity(weights.len());
        for (list, weight) in weights {
            for &id in list.ids() {
                antecedent_items
                    .entry(id)
                    .or_insert_with(|| pool.antecedent(id).items.clone());
            }
            components.push(PosteriorComponent {
                list: list.clone(),
                weight,
                counts: compute_counts(list, pool, dataset)?,
            });
        }
        Ok(PosteriorPredictor {
            antecedent_items,
            components,
            alpha: alpha.to_vec(),
            n_items: dataset.n_items(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn predict(&self, x: &[bool]) -> Result<Vec<f64>> {
        if x.len() != self.n_items {
            return Err(Error::SizeMismatch {
                expected: self.n_items,
                found: x.len(),
            });
        }
        let n_labels = self.alpha.len();
        let alpha_sum: f64 = self.alpha.iter().sum();
        let mut out = vec![0.0; n_labels];
        for c in &self.components {
            let j = c
                .list
                .ids()
                .iter()
                .position(|id| self.antecedent_items[id].iter().all(|&i| x[i]))
                .map_or(0, |j| j + 1);
            let row = c.counts.row(j);
            let total = alpha_sum + row.iter().map(|&v| v as f64).sum::<f64>();
            let w = c.weight as f64;
            for (l, slot) in out.iter_mut().enumerate() {
                *slot += w * (self.alpha[l] + row[l] as f64) / total;
            }
        }
        let n = self.n_samples() as f64;
        out.iter_mut().for_each(|p| *p /= n);
        Ok(out)
    }
}

/// Posterior predictive label distribution for one observation.
pub fn predict_posterior(
    ensemble: &PosteriorEnsemble,
    pool: &AntecedentPool,
    dataset: &Dataset,
    alpha: &[f64],
    x: &[bool],
) -> Result<Vec<f64>> {
    PosteriorPredictor::new(ensemble, pool, dataset, alpha)?.predict(x)
}

fn percent(p: f64) -> String {
    format!("{:.1}%", 100.0 * p)
}

fn consequent_text(model: &BayesianDecisionList, row: usize, label: Option<usize>) -> String {
    let labels: Vec<usize> = match label {
        Some(l) => vec![l],
        None if model.label_names.len() == 2 => vec![1],
        None => (0..model.label_names.len()).collect(),
    };
    labels
        .iter()
        .map(|&l| {
            let (lo, hi) = model.credible_intervals[row][l];
            format!(
                "probability of {} {} ({} to {})",
                model.label_names[l],
                percent(model.posterior_means[row][l]),
                percent(lo),
                percent(hi)
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// The decision list as text, one rule per line:
///
/// ```text
/// if sex=male and age=adult then probability of yes 20.3% (18.4% to 22.3%)
/// else if class=3rd then probability of yes 42.3% (36.2% to 48.5%)
/// else probability of yes 88.0% (81.9% to 92.8%)
/// ```
///
/// For two labels the second label's probability is shown; otherwise every
/// label is listed unless `label` picks one.
pub fn render(model: &BayesianDecisionList, label: Option<usize>) -> String {
    let mut out = String::new();
    for (j, text) in model.antecedent_text.iter().enumerate() {
        let lead = if j == 0 { "if" } else { "else if" };
        let _ = writeln!(out, "{lead} {text} then {}", consequent_text(model, j + 1, label));
    }
    let _ = writeln!(out, "else {}", consequent_text(model, 0, label));
    out
}
