//! The probabilistic model over antecedent lists.
//!
//! * first-match label counts, computed by sweeping cover bitsets with a
//!   "still unclaimed" mask;
//! * the hierarchical prior: truncated Poisson list length, availability-
//!   truncated Poisson cardinalities and uniform antecedent choice;
//! * the Dirichlet-multinomial marginal likelihood, fully normalized.
//!
//! Everything is computed in log space with log-gamma.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bitset::Bitset;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mining::AntecedentPool;

/// An ordered, duplicate-free list of antecedent ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleList(Vec<usize>);

impl RuleList {
    pub fn new(ids: Vec<usize>, pool_size: usize) -> Result<Self> {
        validate_ids(&ids, pool_size)?;
        Ok(RuleList(ids))
    }

    pub fn empty() -> Self {
        RuleList(Vec::new())
    }

    /// Caller guarantees the ids are distinct and in range.
    pub(crate) fn from_ids_unchecked(ids: Vec<usize>) -> Self {
        RuleList(ids)
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.0.contains(&id)
    }

    /// Mean antecedent cardinality; 0 for the empty list.
    pub fn mean_cardinality(&self, pool: &AntecedentPool) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        let total: usize = self.0.iter().map(|&id| pool.cardinality(id)).sum();
        total as f64 / self.0.len() as f64
    }
}

fn validate_ids(ids: &[usize], pool_size: usize) -> Result<()> {
    if let Some(&index) = ids.iter().find(|&&id| id >= pool_size) {
        return Err(Error::AntecedentOutOfRange { index, pool_size });
    }
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateAntecedent(w[0]));
    }
    Ok(())
}

/// First-match label counts: row 0 is the default rule, row `j` pairs with
/// the `j`-th antecedent of the list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    n_labels: usize,
    counts: Vec<u32>,
}

impl CountMatrix {
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n_labels = rows.first().map_or(0, Vec::len);
        if n_labels == 0 {
            return Err(Error::InvalidArgument("count matrix needs at least one row and label".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n_labels) {
            return Err(Error::SizeMismatch {
                expected: n_labels,
                found: r.len(),
            });
        }
        Ok(CountMatrix {
            n_labels,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    /// Number of antecedent rows (excluding the default).
    pub fn n_rules(&self) -> usize {
        self.counts.len() / self.n_labels - 1
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn row(&self, j: usize) -> &[u32] {
        &self.counts[j * self.n_labels..(j + 1) * self.n_labels]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.counts.chunks(self.n_labels)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Prior expected list length.
    pub lambda: f64,
    /// Prior expected antecedent cardinality.
    pub eta: f64,
    /// Dirichlet pseudocounts, one per label.
    pub alpha: Vec<f64>,
}

impl Hyperparams {
    /// `alpha` defaults to all ones.
    pub fn new(lambda: f64, eta: f64, n_labels: usize) -> Self {
        Hyperparams {
            lambda,
            eta,
            alpha: vec![1.0; n_labels],
        }
    }

    pub fn validate(&self, n_labels: usize) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.lambda) || !ok(self.eta) {
            return Err(Error::InvalidArgument(format!(
                "lambda and eta must be positive, got {} and {}",
                self.lambda, self.eta
            )));
        }
        if self.alpha.len() != n_labels {
            return Err(Error::SizeMismatch {
                expected: n_labels,
                found: self.alpha.len(),
            });
        }
        if !self.alpha.iter().all(|&a| ok(a)) {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        Ok(())
    }
}

/// Count of unused antecedents per cardinality while walking a list prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardinalityAvailability {
    remaining: Vec<usize>,
}

impl CardinalityAvailability {
    pub fn from_pool(pool: &AntecedentPool) -> Self {
        let mut remaining = vec![0; pool.max_cardinality() + 1];
        for (&c, ids) in pool.by_cardinality() {
            remaining[c] = ids.len();
        }
        CardinalityAvailability { remaining }
    }

    pub fn remaining(&self, cardinality: usize) -> usize {
        self.remaining.get(cardinality).copied().unwrap_or(0)
    }

    /// Cardinalities with at least one unused antecedent.
    pub fn available(&self) -> impl Iterator<Item = usize> + Clone + '_ {
        (1..self.remaining.len()).filter(|&c| self.remaining[c] > 0)
    }

    pub fn take(&mut self, cardinality: usize) -> Result<()> {
        match self.remaining.get_mut(cardinality) {
            Some(r) if *r > 0 => {
                *r -= 1;
                Ok(())
            }
            _ => Err(Error::InvalidArgument(format!(
                "no antecedent of cardinality {cardinality} left"
            ))),
        }
    }
}

pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Prior over antecedent lists for one pool, with the list-length
/// normalizer and cardinality weights computed once.
#[derive(Debug, Clone)]
pub struct ListPrior<'a> {
    pool: &'a AntecedentPool,
    /// `ln p(m)` for `m = 0..=|pool|`
    log_length: Vec<f64>,
    length_cdf: Vec<f64>,
    /// `c ln eta - ln c!` indexed by cardinality
    log_card_weight: Vec<f64>,
    initial: CardinalityAvailability,
}

impl<'a> ListPrior<'a> {
    pub fn new(pool: &'a AntecedentPool, lambda: f64, eta: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0 && eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda and eta must be positive, got {lambda} and {eta}"
            )));
        }
        let unnormalized: Vec<f64> = (0..=pool.len())
            .map(|m| m as f64 * lambda.ln() - ln_gamma(m as f64 + 1.0))
            .collect();
        let log_z = log_sum_exp(unnormalized.iter().copied());
        let log_length: Vec<f64> = unnormalized.iter().map(|v| v - log_z).collect();
        let mut acc = 0.0;
        let length_cdf = log_length
            .iter()
            .map(|lp| {
                acc += lp.exp();
                acc
            })
            .collect();
        let log_card_weight = (0..=pool.max_cardinality())
            .map(|c| c as f64 * eta.ln() - ln_gamma(c as f64 + 1.0))
            .collect();
        Ok(ListPrior {
            pool,
            log_length,
            length_cdf,
            log_card_weight,
            initial: CardinalityAvailability::from_pool(pool),
        })
    }

    pub fn pool(&self) -> &'a AntecedentPool {
        self.pool
    }

    /// `ln p(m | A, lambda)`
    pub fn log_length_prior(&self, m: usize) -> f64 {
        self.log_length.get(m).copied().unwrap_or(f64::NEG_INFINITY)
    }

    fn log_card_normalizer(&self, avail: &CardinalityAvailability) -> f64 {
        log_sum_exp(avail.available().map(|c| self.log_card_weight[c]))
    }

    /// Log prior of a list of antecedent ids.
    pub fn log_prior(&self, ids: &[usize]) -> Result<f64> {
        validate_ids(ids, self.pool.len())?;
        Ok(self.log_prior_unchecked(ids))
    }

    pub(crate) fn log_prior_unchecked(&self, ids: &[usize]) -> f64 {
        let mut lp = self.log_length[ids.len()];
        let mut avail = self.initial.clone();
        for &id in ids {
            let c = self.pool.cardinality(id);
            let remaining = avail.remaining(c);
            lp += self.log_card_weight[c] - self.log_card_normalizer(&avail) - (remaining as f64).ln();
            avail.remaining[c] -= 1;
        }
        lp
    }

    /// Draws a list by following the generative process.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RuleList {
        let u: f64 = rng.random();
        let m = self
            .length_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.pool.len());
        let mut unused: Vec<Vec<usize>> = vec![Vec::new(); self.pool.max_cardinality() + 1];
        for (&c, ids) in self.pool.by_cardinality() {
            unused[c] = ids.clone();
        }
        let mut avail = self.initial.clone();
        let mut ids = Vec::with_capacity(m);
        for _ in 0..m {
            let cards: Vec<usize> = avail.available().collect();
            let log_z = self.log_card_normalizer(&avail);
            let mut u: f64 = rng.random();
            let mut c = *cards.last().expect("m <= |A| keeps some cardinality available");
            for &k in &cards {
                let p = (self.log_card_weight[k] - log_z).exp();
                if u < p {
                    c = k;
                    break;
                }
                u -= p;
            }
            let pick = rng.random_range(0..unused[c].len());
            ids.push(unused[c].swap_remove(pick));
            avail.remaining[c] -= 1;
        }
        RuleList(ids)
    }
}

/// Log-gamma lookups for integer counts plus the Dirichlet pseudocounts.
#[derive(Debug, Clone)]
pub struct LikelihoodTables {
    alpha: Vec<f64>,
    ln_gamma_alpha: Vec<f64>,
    ln_gamma_alpha_sum: f64,
    /// `ln Gamma(k + alpha_l)` for `k = 0..=n`, per label.
    per_label: Vec<Vec<f64>>,
    /// `ln Gamma(k + sum(alpha))` for `k = 0..=n`.
    total: Vec<f64>,
}

impl LikelihoodTables {
    pub fn new(alpha: &[f64], max_count: usize) -> Self {
        let alpha_sum: f64 = alpha.iter().sum();
        LikelihoodTables {
            alpha: alpha.to_vec(),
            ln_gamma_alpha: alpha.iter().map(|&a| ln_gamma(a)).collect(),
            ln_gamma_alpha_sum: ln_gamma(alpha_sum),
            per_label: alpha
                .iter()
                .map(|&a| (0..=max_count).map(|k| ln_gamma(k as f64 + a)).collect())
                .collect(),
            total: (0..=max_count)
                .map(|k| ln_gamma(k as f64 + alpha_sum))
                .collect(),
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Dirichlet-multinomial log marginal of one row; exactly 0 when empty.
    #[inline]
    pub fn row(&self, counts: &[u32]) -> f64 {
        let total: usize = counts.iter().map(|&c| c as usize).sum();
        if total == 0 {
            return 0.0;
        }
        let mut ll = self.ln_gamma_alpha_sum - self.total[total];
        for (l, &c) in counts.iter().enumerate() {
            ll += self.per_label[l][c as usize] - self.ln_gamma_alpha[l];
        }
        ll
    }
}

/// Dirichlet-multinomial log marginal likelihood of a count matrix:
/// `sum_j [lnG(sum a) - lnG(sum(N_j + a)) + sum_l (lnG(N_jl + a_l) - lnG(a_l))]`.
pub fn log_marginal_likelihood(counts: &CountMatrix, alpha: &[f64]) -> Result<f64> {
    if alpha.len() != counts.n_labels() {
        return Err(Error::SizeMismatch {
            expected: counts.n_labels(),
            found: alpha.len(),
        });
    }
    if !alpha.iter().all(|&a| a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let alpha_sum: f64 = alpha.iter().sum();
    Ok(counts
        .rows()
        .map(|row| {
            let total: f64 = row.iter().map(|&c| c as f64).sum();
            if total == 0.0 {
                return 0.0;
            }
            let mut ll = ln_gamma(alpha_sum) - ln_gamma(total + alpha_sum);
            for (&c, &a) in row.iter().zip(alpha) {
                ll += ln_gamma(c as f64 + a) - ln_gamma(a);
            }
            ll
        })
        .sum())
}

/// Claims observations for the antecedents in `ids`, in order, starting from
/// the `unclaimed` mask. Writes one count row per antecedent into `out`
/// (`ids.len() * L` entries) and leaves the default rule's observations in
/// `unclaimed`.
pub(crate) fn sweep_counts(
    ids: &[usize],
    pool: &AntecedentPool,
    dataset: &Dataset,
    unclaimed: &mut Bitset,
    out: &mut [u32],
) {
    let n_labels = dataset.n_labels();
    for (j, &id) in ids.iter().enumerate() {
        let cover = pool.cover(id);
        for l in 0..n_labels {
            out[j * n_labels + l] =
                unclaimed.intersection_count3(cover, dataset.label_mask(l)) as u32;
        }
        unclaimed.and_not_assign(cover);
    }
}

pub(crate) fn default_counts(unclaimed: &Bitset, dataset: &Dataset, out: &mut [u32]) {
    for (l, slot) in out.iter_mut().enumerate() {
        *slot = unclaimed.intersection_count(dataset.label_mask(l)) as u32;
    }
}

fn check_sizes(pool: &AntecedentPool, dataset: &Dataset) -> Result<()> {
    if pool.n() != dataset.n() {
        return Err(Error::SizeMismatch {
            expected: dataset.n(),
            found: pool.n(),
        });
    }
    Ok(())
}

pub fn compute_counts(d: &RuleList, pool: &AntecedentPool, dataset: &Dataset) -> Result<CountMatrix> {
    check_sizes(pool, dataset)?;
    validate_ids(d.ids(), pool.len())?;
    let n_labels = dataset.n_labels();
    let mut counts = vec![0u32; (d.len() + 1) * n_labels];
    let mut unclaimed = Bitset::ones(dataset.n());
    sweep_counts(d.ids(), pool, dataset, &mut unclaimed, &mut counts[n_labels..]);
    default_counts(&unclaimed, dataset, &mut counts[..n_labels]);
    Ok(CountMatrix { n_labels, counts })
}

pub fn log_prior(d: &RuleList, pool: &AntecedentPool, hp: &Hyperparams) -> Result<f64> {
    ListPrior::new(pool, hp.lambda, hp.eta)?.log_prior(d.ids())
}

pub fn sample_prior_list<R: Rng + ?Sized>(
    pool: &AntecedentPool,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<RuleList> {
    Ok(ListPrior::new(pool, hp.lambda, hp.eta)?.sample(rng))
}

pub fn log_posterior(
    d: &RuleList,
    pool: &AntecedentPool,
    dataset: &Dataset,
    hp: &Hyperparams,
) -> Result<f64> {
    Scorer::new(pool, dataset, hp)?.log_posterior(d.ids())
}

/// Unnormalized log posterior for one pool, dataset and hyperparameter set.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    dataset: &'a Dataset,
    hp: Hyperparams,
    prior: ListPrior<'a>,
    likelihood: LikelihoodTables,
}

impl<'a> Scorer<'a> {
    pub fn new(pool: &'a AntecedentPool, dataset: &'a Dataset, hp: &Hyperparams) -> Result<Self> {
        check_sizes(pool, dataset)?;
        hp.validate(dataset.n_labels())?;
        Ok(Scorer {
            dataset,
            hp: hp.clone(),
            prior: ListPrior::new(pool, hp.lambda, hp.eta)?,
            likelihood: LikelihoodTables::new(&hp.alpha, dataset.n()),
        })
    }

    pub fn pool(&self) -> &'a AntecedentPool {
        self.prior.pool()
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn prior(&self) -> &ListPrior<'a> {
        &self.prior
    }

    pub fn likelihood(&self) -> &LikelihoodTables {
        &self.likelihood
    }

    pub fn log_likelihood(&self, counts: &CountMatrix) -> f64 {
        counts.rows().map(|r| self.likelihood.row(r)).sum()
    }

    pub fn log_posterior(&self, ids: &[usize]) -> Result<f64> {
        let lp = self.prior.log_prior(ids)?;
        let counts = compute_counts(&RuleList(ids.to_vec()), self.pool(), self.dataset)?;
        Ok(lp + self.log_likelihood(&counts))
    }
}
