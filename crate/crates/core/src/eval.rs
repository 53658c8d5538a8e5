//! Validation harness: synthetic decision-list data, posterior concentration
//! by Levenshtein distance, ROC/AUC and k-fold cross-validation.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::data::{split_folds, Condition, Dataset, FoldAssignment, Item};
use crate::error::{Error, Result};
use crate::inference::{
    fit_consequents, predict_point, render, select_brl_point, PosteriorPredictor, DEFAULT_LEVEL,
};
use crate::mcmc::{run_ensemble, EnsembleConfig, PosteriorEnsemble};
use crate::mining::{mine_antecedents, AntecedentPool};
use crate::model::{Hyperparams, RuleList, Scorer};
use crate::par::{self, Execution};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub n_rules: usize,
    pub true_list_length: usize,
    pub beta_params: (f64, f64),
    pub feature_prob: f64,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(n: usize, seed: u64) -> Self {
        SimulationSpec {
            n,
            n_rules: 100,
            true_list_length: 5,
            beta_params: (0.5, 0.5),
            feature_prob: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.beta_params;
        if self.n == 0 || self.n_rules == 0 {
            return Err(Error::InvalidArgument("simulation needs observations and rules".into()));
        }
        if self.true_list_length > self.n_rules {
            return Err(Error::InvalidArgument(format!(
                "true list length {} exceeds {} rules",
                self.true_list_length, self.n_rules
            )));
        }
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument("Beta parameters must be positive".into()));
        }
        if !(self.feature_prob > 0.0 && self.feature_prob < 1.0) {
            return Err(Error::InvalidArgument("feature probability must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    /// `n x n_rules` rule truth values with labels `"0"` and `"1"`.
    pub dataset: Dataset,
    pub true_list: RuleList,
    /// Probability of label `"1"` per rule, index 0 the default.
    pub thetas: Vec<f64>,
}

impl SimulatedData {
    /// Probability of label `"1"` under the generating list.
    pub fn true_probability(&self, x: &[bool]) -> f64 {
        let j = self
            .true_list
            .ids()
            .iter()
            .position(|&id| x[id])
            .map_or(0, |j| j + 1);
        self.thetas[j]
    }
}

fn rule_items(n_rules: usize) -> Vec<Item> {
    (0..n_rules)
        .map(|i| Item::new(format!("rule{i}"), Condition::Equals("1".into())).expect("valid name"))
        .collect()
}

/// Draws iid Bernoulli rule truth values, a random true list and Beta
/// consequents, then labels each row from its first matching rule.
pub fn simulate_dataset(spec: &SimulationSpec) -> Result<SimulatedData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let columns: Vec<Bitset> = (0..spec.n_rules)
        .map(|_| Bitset::from_bools((0..spec.n).map(|_| rng.random_bool(spec.feature_prob))))
        .collect();
    let true_ids = sample_indices(&mut rng, spec.n_rules, spec.true_list_length).into_vec();
    let beta = Beta::new(spec.beta_params.0, spec.beta_params.1)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let thetas: Vec<f64> = (0..=spec.true_list_length).map(|_| beta.sample(&mut rng)).collect();

    let mut unclaimed = Bitset::ones(spec.n);
    let mut rule_of = vec![0usize; spec.n];
    for (j, &id) in true_ids.iter().enumerate() {
        for i in unclaimed.and(&columns[id]).iter_ones() {
            rule_of[i] = j + 1;
        }
        unclaimed.and_not_assign(&columns[id]);
    }
    let labels = rule_of
        .iter()
        .map(|&j| usize::from(rng.random_bool(thetas[j])))
        .collect();
    let dataset = Dataset::from_columns(
        rule_items(spec.n_rules),
        columns,
        labels,
        vec!["0".into(), "1".into()],
    )?;
    Ok(SimulatedData {
        dataset,
        true_list: RuleList::new(true_ids, spec.n_rules)?,
        thetas,
    })
}

/// Unit-cost edit distance between antecedent sequences.
pub fn levenshtein(a: &RuleList, b: &RuleList) -> usize {
    let (a, b) = (a.ids(), b.ids());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub distances: Vec<usize>,
    pub mean_distance: f64,
    /// Distance to proportion of samples.
    pub histogram: BTreeMap<usize, f64>,
}

impl ConcentrationReport {
    /// Posterior mass within distance `k` of the true list.
    pub fn mass_within(&self, k: usize) -> f64 {
        self.histogram.range(..=k).fold(0.0, |acc, (_, p)| acc + p)
    }
}

pub fn concentration_report(ensemble: &PosteriorEnsemble, true_list: &RuleList) -> Result<ConcentrationReport> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let distances: Vec<usize> = ensemble
        .samples
        .iter()
        .map(|s| levenshtein(&s.list, true_list))
        .collect();
    let n = distances.len() as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &d in &distances {
        *counts.entry(d).or_default() += 1;
    }
    Ok(ConcentrationReport {
        mean_distance: distances.iter().sum::<usize>() as f64 / n,
        histogram: counts.into_iter().map(|(d, c)| (d, c as f64 / n)).collect(),
        distances,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Observations scoring at least this are called positive.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl Roc {
    /// `fpr,tpr,threshold` with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fpr,tpr,threshold\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.fpr, p.tpr, p.threshold));
        }
        out
    }
}

/// ROC curve and AUC. The AUC is the trapezoidal area under the step curve,
/// which equals the Mann-Whitney statistic with ties counted one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Roc> {
    if scores.len() != labels.len() {
        return Err(Error::SizeMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    // descending sweep: each distinct score is one step of the curve, and
    // its tied block contributes the trapezoid (= half credit for ties)
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as u128;
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: t,
        });
    }
    let auc = area2 as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(Roc { points, auc })
}

/// Index of the largest probability; ties go to the lower label.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (l, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = l;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub min_support: f64,
    pub max_cardinality: usize,
    pub lambda: f64,
    pub eta: f64,
    /// Dirichlet prior; all ones when absent.
    pub alpha: Option<Vec<f64>>,
    pub ensemble: EnsembleConfig,
    pub stratified: bool,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            min_support: 0.05,
            max_cardinality: 3,
            lambda: 8.0,
            eta: 3.0,
            alpha: None,
            ensemble: EnsembleConfig::default(),
            stratified: false,
            execution: Execution::default(),
        }
    }
}

impl CvConfig {
    pub fn hyperparams(&self, n_labels: usize) -> Hyperparams {
        let mut hp = Hyperparams::new(self.lambda, self.eta, n_labels);
        if let Some(alpha) = &self.alpha {
            hp.alpha = alpha.clone();
        }
        hp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub pool_size: usize,
    pub accuracy: Option<f64>,
    pub auc: Option<f64>,
    /// Written separately as CSV.
    #[serde(skip_serializing, default)]
    pub roc: Option<Roc>,
    /// Wall-clock time, kept out of serialized reports.
    #[serde(skip, default)]
    pub train_seconds: f64,
    pub r_hat: f64,
    pub converged: bool,
    pub iterations: usize,
    pub list_items: Vec<Vec<String>>,
    pub rendered: String,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub mean_auc: Option<f64>,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Training split of fold `fold` and the antecedents mined from it alone.
pub fn fold_training_pool(
    dataset: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    config: &CvConfig,
) -> Result<(Dataset, AntecedentPool)> {
    let train = dataset.subset(&folds.train_indices(fold))?;
    let pool = mine_antecedents(&train, config.min_support, config.max_cardinality, config.ensemble.execution)?;
    Ok((train, pool))
}

fn skipped(fold: usize, n_train: usize, n_test: usize, reason: String) -> FoldReport {
    log::warn!("fold {fold} skipped: {reason}");
    FoldReport {
        fold,
        n_train,
        n_test,
        pool_size: 0,
        accuracy: None,
        auc: None,
        roc: None,
        train_seconds: 0.0,
        r_hat: f64::NAN,
        converged: false,
        iterations: 0,
        list_items: Vec::new(),
        rendered: String::new(),
        skipped: Some(reason),
    }
}

fn run_fold(
    dataset: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    config: &CvConfig,
    seed: u64,
) -> Result<FoldReport> {
    let test_idx = folds.test_indices(fold);
    let n_test = test_idx.len();
    let n_train = dataset.n() - n_test;
    let train_labels = folds
        .train_indices(fold)
        .iter()
        .map(|&i| dataset.labels()[i])
        .collect::<std::collections::BTreeSet<_>>();
    if train_labels.len() < 2 {
        return Ok(skipped(fold, n_train, n_test, "training split has a single class".into()));
    }

    let started = Instant::now();
    let (train, pool) = fold_training_pool(dataset, folds, fold, config)?;
    let hp = config.hyperparams(dataset.n_labels());
    let scorer = Scorer::new(&pool, &train, &hp)?;
    let ensemble = run_ensemble(&scorer, &config.ensemble, derive_seed(seed, fold as u64 + 1))?;
    let point = select_brl_point(&ensemble, &pool)?;
    let model = fit_consequents(&point.list, &pool, &train, &hp.alpha, DEFAULT_LEVEL)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let test = dataset.subset(&test_idx)?;
    let mut correct = 0usize;
    let mut scores = Vec::with_capacity(n_test);
    for r in 0..test.n() {
        let p = predict_point(&model, &test.row(r))?;
        correct += usize::from(argmax(&p.probabilities) == test.labels()[r]);
        scores.push(p.probabilities.get(1).copied().unwrap_or(0.0));
    }
    let roc = if dataset.n_labels() == 2 {
        let truth: Vec<bool> = test.labels().iter().map(|&y| y == 1).collect();
        match roc_auc(&scores, &truth) {
            Ok(roc) => Some(roc),
            Err(Error::SingleClass) => {
                log::warn!("fold {fold}: test split has a single class; AUC undefined");
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let list_items = point
        .list
        .ids()
        .iter()
        .map(|&id| {
            pool.antecedent(id)
                .items
                .iter()
                .map(|&i| train.items()[i].to_string())
                .collect()
        })
        .collect();
    Ok(FoldReport {
        fold,
        n_train,
        n_test,
        pool_size: pool.len(),
        accuracy: Some(correct as f64 / n_test as f64),
        auc: roc.as_ref().map(|r| r.auc),
        roc,
        train_seconds,
        r_hat: ensemble.r_hat,
        converged: ensemble.converged,
        iterations: ensemble.iterations,
        list_items,
        rendered: render(&model, None),
        skipped: None,
    })
}

/// k-fold cross-validation of the BRL-point classifier. Antecedents are
/// mined on each training split only.
pub fn run_cv_experiment(dataset: &Dataset, k: usize, config: &CvConfig, seed: u64) -> Result<CvReport> {
    log::debug!("cross-validation: k={k} seed={seed} {config:?}");
    let folds = split_folds(dataset, k, derive_seed(seed, 0), config.stratified)?;
    let folds_out = par::map_range(config.execution, k, |f| run_fold(dataset, &folds, f, config, seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let accuracies: Vec<f64> = folds_out.iter().filter_map(|f| f.accuracy).collect();
    let aucs: Vec<f64> = folds_out.iter().filter_map(|f| f.auc).collect();
    let (mean_accuracy, sd_accuracy) = mean_sd(&accuracies);
    Ok(CvReport {
        k,
        seed,
        folds: folds_out,
        mean_accuracy,
        sd_accuracy,
        mean_auc: (!aucs.is_empty()).then(|| mean_sd(&aucs).0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationConfig {
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub n_rules: usize,
    pub true_list_length: usize,
    pub beta_params: (f64, f64),
    pub feature_prob: f64,
    pub lambda: f64,
    pub eta: f64,
    pub ensemble: EnsembleConfig,
    /// Extra simulated observations per replicate for held-out log-loss.
    pub holdout: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        ConcentrationConfig {
            sizes: vec![100, 5000],
            replicates: 10,
            n_rules: 100,
            true_list_length: 5,
            beta_params: (0.5, 0.5),
            feature_prob: 0.5,
            lambda: 5.0,
            eta: 1.0,
            ensemble: EnsembleConfig::default(),
            holdout: 1000,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateReport {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub true_list: RuleList,
    pub mean_distance: f64,
    pub mass_within_1: f64,
    pub histogram: BTreeMap<usize, f64>,
    pub r_hat: f64,
    pub converged: bool,
    /// Held-out mean log-loss of the BRL-point and posterior-predictive
    /// classifiers.
    pub point_log_loss: Option<f64>,
    pub posterior_log_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationStudy {
    pub replicates: Vec<ReplicateReport>,
    /// Median over replicates of the mean posterior distance, per size.
    pub median_mean_distance: BTreeMap<usize, f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn log_loss(p: &[f64], y: usize) -> f64 {
    -p[y].max(1e-300).ln()
}

/// Fits one simulated replicate with the singleton pool.
pub fn run_replicate(config: &ConcentrationConfig, n: usize, replicate: usize, seed: u64) -> Result<ReplicateReport> {
    let spec = SimulationSpec {
        n: n + config.holdout,
        n_rules: config.n_rules,
        true_list_length: config.true_list_length,
        beta_params: config.beta_params,
        feature_prob: config.feature_prob,
        seed,
    };
    let sim = simulate_dataset(&spec)?;
    let train = sim.dataset.subset(&(0..n).collect::<Vec<_>>())?;
    let pool = AntecedentPool::singletons(&train)?;
    let hp = Hyperparams::new(config.lambda, config.eta, 2);
    let scorer = Scorer::new(&pool, &train, &hp)?;
    let ensemble = run_ensemble(&scorer, &config.ensemble, derive_seed(seed, 1))?;
    let report = concentration_report(&ensemble, &sim.true_list)?;

    let (point_log_loss, posterior_log_loss) = if config.holdout > 0 {
        let point = select_brl_point(&ensemble, &pool)?;
        let model = fit_consequents(&point.list, &pool, &train, &hp.alpha, DEFAULT_LEVEL)?;
        let predictor = PosteriorPredictor::new(&ensemble, &pool, &train, &hp.alpha)?;
        let (mut lp, mut lq) = (0.0, 0.0);
        for r in n..n + config.holdout {
            let x = sim.dataset.row(r);
            let y = sim.dataset.labels()[r];
            lp += log_loss(&predict_point(&model, &x)?.probabilities, y);
            lq += log_loss(&predictor.predict(&x)?, y);
        }
        let h = config.holdout as f64;
        (Some(lp / h), Some(lq / h))
    } else {
        (None, None)
    };
    Ok(ReplicateReport {
        n,
        replicate,
        seed,
        true_list: sim.true_list,
        mean_distance: report.mean_distance,
        mass_within_1: report.mass_within(1),
        histogram: report.histogram,
        r_hat: ensemble.r_hat,
        converged: ensemble.converged,
        point_log_loss,
        posterior_log_loss,
    })
}

/// Replicated simulation study of posterior concentration around the true
/// list as the sample size grows.
pub fn run_concentration_study(config: &ConcentrationConfig, seed: u64) -> Result<ConcentrationStudy> {
    if config.replicates == 0 || config.sizes.is_empty() {
        return Err(Error::InvalidArgument("study needs at least one size and replicate".into()));
    }
    let jobs: Vec<(usize, usize)> = config
        .sizes
        .iter()
        .flat_map(|&n| (0..config.replicates).map(move |r| (n, r)))
        .collect();
    let replicates = par::map_slice(config.execution, &jobs, |&(n, r)| {
        run_replicate(config, n, r, derive_seed(derive_seed(seed, n as u64), r as u64))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let median_mean_distance = config
        .sizes
        .iter()
        .map(|&n| {
            let xs = replicates.iter().filter(|r| r.n == n).map(|r| r.mean_distance).collect();
            (n, median(xs))
        })
        .collect();
    Ok(ConcentrationStudy {
        replicates,
        median_mean_distance,
    })
}
