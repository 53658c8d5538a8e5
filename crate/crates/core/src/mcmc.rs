//! Metropolis-Hastings over antecedent lists.
//!
//! Proposals move, add or remove one antecedent. The edit kind is chosen
//! uniformly among the kinds feasible at the current length, and the kind
//! probability is part of Q so the chain stays reversible at the boundaries
//! (`m = 0`, `m = 1`, `m = |A|`).
//!
//! Several chains are run from independent prior draws; the first half of
//! each is burn-in and convergence is judged with the Gelman-Rubin PSRF on
//! the log-posterior trace. If the threshold is not met the chains are
//! continued to twice the length, up to a cap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bitset::Bitset;
use crate::error::{Error, Result};
use crate::mining::AntecedentPool;
use crate::model::{self, RuleList, Scorer};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalKind {
    Move,
    Add,
    Remove,
}

/// Edit kinds available at list length `m` for a pool of `pool_size`.
pub fn feasible_kinds(m: usize, pool_size: usize) -> Vec<ProposalKind> {
    let mut kinds = Vec::with_capacity(3);
    if m >= 2 {
        kinds.push(ProposalKind::Move);
    }
    if m < pool_size {
        kinds.push(ProposalKind::Add);
    }
    if m >= 1 {
        kinds.push(ProposalKind::Remove);
    }
    kinds
}

/// Probability of one specific edit given its kind:
/// move `1/(m(m-1))`, add `1/((|A|-m)(m+1))`, remove `1/m`.
pub fn conditional_log_q(kind: ProposalKind, m: usize, pool_size: usize) -> f64 {
    let m_f = m as f64;
    match kind {
        ProposalKind::Move => -(m_f * (m_f - 1.0)).ln(),
        ProposalKind::Add => -(((pool_size - m) as f64) * (m_f + 1.0)).ln(),
        ProposalKind::Remove => -m_f.ln(),
    }
}

/// Full proposal log-probability from a state of length `m`, including the
/// uniform choice among feasible kinds.
pub fn log_q(kind: ProposalKind, m: usize, pool_size: usize) -> f64 {
    let n_kinds = feasible_kinds(m, pool_size).len() as f64;
    -n_kinds.ln() + conditional_log_q(kind, m, pool_size)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub kind: ProposalKind,
    pub list: RuleList,
    /// `ln Q(d* | d)`
    pub log_q_forward: f64,
    /// `ln Q(d | d*)`
    pub log_q_reverse: f64,
    /// First position at which the proposed list differs from the source.
    pub edit_position: usize,
}

fn reverse_kind(kind: ProposalKind) -> ProposalKind {
    match kind {
        ProposalKind::Move => ProposalKind::Move,
        ProposalKind::Add => ProposalKind::Remove,
        ProposalKind::Remove => ProposalKind::Add,
    }
}

fn draw_absent<R: Rng + ?Sized>(d: &RuleList, pool_size: usize, rng: &mut R) -> usize {
    if d.len() * 2 <= pool_size {
        loop {
            let id = rng.random_range(0..pool_size);
            if !d.contains(id) {
                return id;
            }
        }
    }
    let absent: Vec<usize> = (0..pool_size).filter(|&id| !d.contains(id)).collect();
    absent[rng.random_range(0..absent.len())]
}

pub fn propose<R: Rng + ?Sized>(
    d: &RuleList,
    pool: &AntecedentPool,
    rng: &mut R,
) -> Result<Proposal> {
    let pool_size = pool.len();
    let m = d.len();
    let kinds = feasible_kinds(m, pool_size);
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no feasible proposal for an empty pool".into()));
    }
    let kind = kinds[rng.random_range(0..kinds.len())];
    let mut ids = d.ids().to_vec();
    let edit_position = match kind {
        ProposalKind::Move => {
            let from = rng.random_range(0..m);
            // one of the m-1 positions other than `from`
            let mut to = rng.random_range(0..m - 1);
            if to >= from {
                to += 1;
            }
            let id = ids.remove(from);
            ids.insert(to, id);
            from.min(to)
        }
        ProposalKind::Add => {
            let id = draw_absent(d, pool_size, rng);
            let at = rng.random_range(0..=m);
            ids.insert(at, id);
            at
        }
        ProposalKind::Remove => {
            let at = rng.random_range(0..m);
            ids.remove(at);
            at
        }
    };
    let new_m = ids.len();
    Ok(Proposal {
        kind,
        list: RuleList::from_ids_unchecked(ids),
        log_q_forward: log_q(kind, m, pool_size),
        log_q_reverse: log_q(reverse_kind(kind), new_m, pool_size),
        edit_position,
    })
}

/// `ln` of the Metropolis-Hastings ratio; accept with probability
/// `min(1, exp(ratio))`.
pub fn log_acceptance_ratio(current: f64, proposed: f64, proposal: &Proposal) -> f64 {
    proposed - current + proposal.log_q_reverse - proposal.log_q_forward
}

/// Per-position state of the current list, so a proposal only re-sweeps the
/// suffix after its edit point.
#[derive(Debug, Clone)]
struct ListCache {
    /// `unclaimed[j]`: observations no earlier rule claimed, before rule `j`;
    /// `unclaimed[m]` is the default rule's set.
    unclaimed: Vec<Bitset>,
    /// `prefix_ll[j]`: summed row log-likelihood of rules `0..j`.
    prefix_ll: Vec<f64>,
    row_buf: Vec<u32>,
    scratch: Bitset,
}

impl ListCache {
    fn new(ids: &[usize], scorer: &Scorer) -> Self {
        let n = scorer.dataset().n();
        let mut cache = ListCache {
            unclaimed: vec![Bitset::ones(n)],
            prefix_ll: vec![0.0],
            row_buf: vec![0; scorer.dataset().n_labels()],
            scratch: Bitset::zeros(n),
        };
        cache.rebuild_from(0, ids, scorer);
        cache
    }

    fn rebuild_from(&mut self, start: usize, ids: &[usize], scorer: &Scorer) {
        self.unclaimed.truncate(start + 1);
        self.prefix_ll.truncate(start + 1);
        let pool = scorer.pool();
        let dataset = scorer.dataset();
        for &id in &ids[start..] {
            let mut next = self.unclaimed.last().expect("root mask").clone();
            model::sweep_counts(&[id], pool, dataset, &mut next, &mut self.row_buf);
            let ll = scorer.likelihood().row(&self.row_buf);
            self.prefix_ll.push(self.prefix_ll.last().expect("root") + ll);
            self.unclaimed.push(next);
        }
    }

    /// Log-likelihood of `ids`, which must share positions `0..start` with
    /// the cached list.
    fn log_likelihood(&mut self, start: usize, ids: &[usize], scorer: &Scorer) -> f64 {
        let pool = scorer.pool();
        let dataset = scorer.dataset();
        self.scratch.copy_from(&self.unclaimed[start]);
        let mut ll = self.prefix_ll[start];
        for &id in &ids[start..] {
            model::sweep_counts(&[id], pool, dataset, &mut self.scratch, &mut self.row_buf);
            ll += scorer.likelihood().row(&self.row_buf);
        }
        model::default_counts(&self.scratch, dataset, &mut self.row_buf);
        ll + scorer.likelihood().row(&self.row_buf)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub list: RuleList,
    pub log_posterior: f64,
    pub iteration: usize,
}

/// Iterations between full log-posterior recomputations.
pub const VERIFY_EVERY: usize = 1000;

/// One Metropolis-Hastings chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    chain_id: usize,
    current: RuleList,
    current_log_posterior: f64,
    iteration: usize,
    rng: ChaCha8Rng,
    trace: Vec<f64>,
    lengths: Vec<usize>,
    samples: Vec<Sample>,
    thin: usize,
    accepted: usize,
    max_recompute_error: f64,
    cache: ListCache,
}

impl ChainState {
    /// Starts chain `chain_id` of master `seed` from a prior draw. Each chain
    /// uses its own ChaCha stream, so results do not depend on scheduling.
    pub fn start(scorer: &Scorer, seed: u64, chain_id: usize, thin: usize) -> Result<Self> {
        if thin == 0 {
            return Err(Error::InvalidArgument("thinning interval must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain_id as u64);
        let current = scorer.prior().sample(&mut rng);
        Self::from_list(scorer, current, rng, chain_id, thin)
    }

    fn from_list(
        scorer: &Scorer,
        current: RuleList,
        rng: ChaCha8Rng,
        chain_id: usize,
        thin: usize,
    ) -> Result<Self> {
        let current_log_posterior = scorer.log_posterior(current.ids())?;
        let cache = ListCache::new(current.ids(), scorer);
        Ok(ChainState {
            chain_id,
            current,
            current_log_posterior,
            iteration: 0,
            rng,
            trace: Vec::new(),
            lengths: Vec::new(),
            samples: Vec::new(),
            thin,
            accepted: 0,
            max_recompute_error: 0.0,
            cache,
        })
    }

    pub fn chain_id(&self) -> usize {
        self.chain_id
    }

    pub fn current(&self) -> &RuleList {
        &self.current
    }

    pub fn current_log_posterior(&self) -> f64 {
        self.current_log_posterior
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Log posterior after each iteration.
    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    /// List length after each iteration.
    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.iteration == 0 {
            0.0
        } else {
            self.accepted as f64 / self.iteration as f64
        }
    }

    /// Largest gap seen between the incrementally maintained log posterior
    /// and a full recomputation.
    pub fn max_recompute_error(&self) -> f64 {
        self.max_recompute_error
    }

    pub fn advance(&mut self, scorer: &Scorer, iterations: usize) -> Result<()> {
        for _ in 0..iterations {
            mh_step(self, scorer)?;
        }
        Ok(())
    }
}

/// One Metropolis-Hastings transition.
pub fn mh_step(state: &mut ChainState, scorer: &Scorer) -> Result<()> {
    let proposal = propose(&state.current, scorer.pool(), &mut state.rng)?;
    let ids = proposal.list.ids();
    let ll = state.cache.log_likelihood(proposal.edit_position, ids, scorer);
    let proposed = ll + scorer.prior().log_prior_unchecked(ids);
    let log_ratio = log_acceptance_ratio(state.current_log_posterior, proposed, &proposal);
    let accept = log_ratio >= 0.0 || state.rng.random::<f64>().ln() < log_ratio;
    if accept {
        state
            .cache
            .rebuild_from(proposal.edit_position, ids, scorer);
        state.current = proposal.list;
        state.current_log_posterior = proposed;
        state.accepted += 1;
    }
    state.iteration += 1;
    state.trace.push(state.current_log_posterior);
    state.lengths.push(state.current.len());
    if state.iteration.is_multiple_of(state.thin) {
        state.samples.push(Sample {
            list: state.current.clone(),
            log_posterior: state.current_log_posterior,
            iteration: state.iteration,
        });
    }
    if state.iteration.is_multiple_of(VERIFY_EVERY) {
        let full = scorer.log_posterior(state.current.ids())?;
        let err = (full - state.current_log_posterior).abs();
        state.max_recompute_error = state.max_recompute_error.max(err);
        if err > 1e-8 {
            log::error!(
                "chain {}: incremental log posterior drifted by {err:e} at iteration {}",
                state.chain_id,
                state.iteration
            );
            state.current_log_posterior = full;
        }
    }
    Ok(())
}

/// Runs a single chain (stream 0 of `seed`) for `n_iterations`.
pub fn run_chain(scorer: &Scorer, n_iterations: usize, seed: u64, thin: usize) -> Result<ChainState> {
    if n_iterations == 0 {
        return Err(Error::InvalidArgument("at least one iteration is required".into()));
    }
    let mut state = ChainState::start(scorer, seed, 0, thin)?;
    state.advance(scorer, n_iterations)?;
    Ok(state)
}

/// Classic potential scale reduction factor over equal-length traces.
///
/// With `W` the mean within-chain variance and `B/n` the variance of the
/// chain means, `R = sqrt(((n-1)/n W + B/n) / W)`. All-constant equal chains
/// give 1; constant but different chains give `+inf`.
pub fn gelman_rubin<T: AsRef<[f64]>>(traces: &[T]) -> Result<f64> {
    let n_chains = traces.len();
    if n_chains < 2 {
        return Err(Error::TooFewChains(n_chains));
    }
    let n = traces[0].as_ref().len();
    if n < 2 {
        return Err(Error::InvalidArgument("each trace needs at least two draws".into()));
    }
    if traces.iter().any(|t| t.as_ref().len() != n) {
        return Err(Error::InvalidArgument("traces must have equal length".into()));
    }
    let n_f = n as f64;
    let means: Vec<f64> = traces
        .iter()
        .map(|t| t.as_ref().iter().sum::<f64>() / n_f)
        .collect();
    let within: f64 = traces
        .iter()
        .zip(&means)
        .map(|(t, mu)| t.as_ref().iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n_f - 1.0))
        .sum::<f64>()
        / n_chains as f64;
    let grand = means.iter().sum::<f64>() / n_chains as f64;
    let between_over_n =
        means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_chains as f64 - 1.0);
    if within == 0.0 {
        return Ok(if between_over_n == 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_hat = (n_f - 1.0) / n_f * within + between_over_n;
    Ok((var_hat / within).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub chains: usize,
    pub initial_iterations: usize,
    pub max_iterations: usize,
    pub r_hat_threshold: f64,
    pub thin: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            chains: 3,
            initial_iterations: 20_000,
            max_iterations: 80_000,
            r_hat_threshold: 1.05,
            thin: 1,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub list: RuleList,
    pub log_posterior: f64,
    pub chain: usize,
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub log_posterior: Vec<f64>,
    pub lengths: Vec<usize>,
}

/// Post-burn-in draws from all chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEnsemble {
    pub samples: Vec<EnsembleSample>,
    /// Iterations discarded as burn-in, per chain.
    pub burn_in_discarded: Vec<usize>,
    pub r_hat: f64,
    pub converged: bool,
    /// Iterations per chain.
    pub iterations: usize,
    pub acceptance_rates: Vec<f64>,
    pub traces: Vec<ChainTrace>,
}

impl PosteriorEnsemble {
    /// An ensemble over given samples, e.g. for tests or reloaded models.
    pub fn from_samples(samples: Vec<EnsembleSample>) -> Self {
        PosteriorEnsemble {
            samples,
            burn_in_discarded: Vec::new(),
            r_hat: f64::NAN,
            converged: false,
            iterations: 0,
            acceptance_rates: Vec::new(),
            traces: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `chain_id,iteration,log_posterior,m` per iteration, with a header.
    pub fn trace_csv(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::from("chain_id,iteration,log_posterior,m\n");
        for (chain, trace) in self.traces.iter().enumerate() {
            for (i, (lp, m)) in trace.log_posterior.iter().zip(&trace.lengths).enumerate() {
                let _ = writeln!(out, "{chain},{},{lp},{m}", i + 1);
            }
        }
        out
    }
}

/// Runs `config.chains` chains until the post-burn-in R-hat drops below the
/// threshold or the iteration cap is reached.
pub fn run_ensemble(scorer: &Scorer, config: &EnsembleConfig, seed: u64) -> Result<PosteriorEnsemble> {
    if config.chains < 2 {
        return Err(Error::TooFewChains(config.chains));
    }
    if config.initial_iterations < 4 || config.max_iterations < config.initial_iterations {
        return Err(Error::InvalidArgument(format!(
            "iteration budget must satisfy 4 <= initial ({}) <= max ({})",
            config.initial_iterations, config.max_iterations
        )));
    }
    let exec = config.execution;
    let mut states = par::map_range(exec, config.chains, |c| {
        ChainState::start(scorer, seed, c, config.thin)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut target = config.initial_iterations;
    let r_hat = loop {
        let results = {
            let mut outcome = Vec::with_capacity(states.len());
            let mut wrapped: Vec<(&mut ChainState, Result<()>)> =
                states.iter_mut().map(|s| (s, Ok(()))).collect();
            par::for_each_mut(exec, &mut wrapped, |(s, res)| {
                let todo = target - s.iteration();
                *res = s.advance(scorer, todo);
            });
            for (_, res) in wrapped {
                outcome.push(res);
            }
            outcome
        };
        results.into_iter().collect::<Result<Vec<_>>>()?;

        let burn = target / 2;
        let post: Vec<&[f64]> = states.iter().map(|s| &s.trace()[burn..]).collect();
        let r_hat = gelman_rubin(&post)?;
        if r_hat < config.r_hat_threshold || target >= config.max_iterations {
            break r_hat;
        }
        log::info!("R-hat {r_hat:.4} after {target} iterations; continuing");
        target = (target * 2).min(config.max_iterations);
    };

    let converged = r_hat < config.r_hat_threshold;
    if !converged {
        log::warn!(
            "chains did not converge: R-hat {r_hat:.4} >= {} after {target} iterations",
            config.r_hat_threshold
        );
    }
    let burn = target / 2;
    let mut samples = Vec::new();
    let mut traces = Vec::with_capacity(states.len());
    let mut acceptance_rates = Vec::with_capacity(states.len());
    for s in states {
        acceptance_rates.push(s.acceptance_rate());
        samples.extend(s.samples.into_iter().filter(|x| x.iteration > burn).map(|x| {
            EnsembleSample {
                list: x.list,
                log_posterior: x.log_posterior,
                chain: s.chain_id,
                iteration: x.iteration,
            }
        }));
        traces.push(ChainTrace {
            log_posterior: s.trace,
            lengths: s.lengths,
        });
    }
    Ok(PosteriorEnsemble {
        samples,
        burn_in_discarded: vec![burn; traces.len()],
        r_hat,
        converged,
        iterations: target,
        acceptance_rates,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Condition, Dataset, Item};
    use crate::model::Hyperparams;
    use proptest::prelude::*;
    use rand::Rng;

    fn dataset(rows: &[Vec<bool>], labels: &[usize]) -> Dataset {
        let items = (0..rows[0].len())
            .map(|i| Item::new(format!("f{i}"), Condition::Equals("1".into())).unwrap())
            .collect();
        Dataset::from_rows(items, rows, labels.to_vec(), vec!["a".into(), "b".into()]).unwrap()
    }

    fn random_problem(n: usize, n_items: usize, seed: u64) -> (Dataset, AntecedentPool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<bool>> = (0..n)
            .map(|_| (0..n_items).map(|_| rng.random_bool(0.5)).collect())
            .collect();
        let labels: Vec<usize> = rows
            .iter()
            .map(|r| usize::from(r[0] != rng.random_bool(0.2)))
            .collect();
        let ds = dataset(&rows, &labels);
        let pool = AntecedentPool::singletons(&ds).unwrap();
        (ds, pool)
    }

    #[test]
    fn conditional_q_values() {
        assert!((conditional_log_q(ProposalKind::Move, 3, 10).exp() - 1.0 / 6.0).abs() < 1e-15);
        assert!((conditional_log_q(ProposalKind::Add, 3, 10).exp() - 1.0 / 28.0).abs() < 1e-15);
        assert!((conditional_log_q(ProposalKind::Remove, 3, 10).exp() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn feasibility_at_boundaries() {
        assert_eq!(feasible_kinds(0, 5), vec![ProposalKind::Add]);
        assert_eq!(log_q(ProposalKind::Add, 0, 5), conditional_log_q(ProposalKind::Add, 0, 5));
        assert_eq!(feasible_kinds(1, 5), vec![ProposalKind::Add, ProposalKind::Remove]);
        assert_eq!(feasible_kinds(5, 5), vec![ProposalKind::Move, ProposalKind::Remove]);
        assert_eq!(
            feasible_kinds(3, 5),
            vec![ProposalKind::Move, ProposalKind::Add, ProposalKind::Remove]
        );
    }

    /// True when `to` is reachable from `from` by exactly one edit of `kind`.
    fn one_edit(from: &[usize], to: &[usize], kind: ProposalKind) -> bool {
        match kind {
            ProposalKind::Add => {
                to.len() == from.len() + 1
                    && (0..to.len()).any(|i| {
                        let mut t = to.to_vec();
                        t.remove(i);
                        t == from
                    })
            }
            ProposalKind::Remove => one_edit(to, from, ProposalKind::Add),
            ProposalKind::Move => {
                from != to
                    && from.len() == to.len()
                    && (0..from.len()).any(|i| {
                        let mut f = from.to_vec();
                        let id = f.remove(i);
                        let mut t = to.to_vec();
                        let pos = t.iter().position(|&x| x == id).unwrap();
                        t.remove(pos);
                        f == t
                    })
            }
        }
    }

    proptest! {
        #[test]
        fn proposals_are_single_reversible_edits(
            pool_size in 1usize..12,
            seed in any::<u64>(),
        ) {
            let (ds, _) = random_problem(20, pool_size, 0);
            let pool = AntecedentPool::singletons(&ds).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.random_range(0..=pool_size);
            let mut ids: Vec<usize> = (0..pool_size).collect();
            rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), &mut rng);
            ids.truncate(m);
            let d = RuleList::new(ids, pool_size).unwrap();
            for _ in 0..20 {
                let p = propose(&d, &pool, &mut rng).unwrap();
                prop_assert!(RuleList::new(p.list.ids().to_vec(), pool_size).is_ok());
                prop_assert!(one_edit(d.ids(), p.list.ids(), p.kind));
                prop_assert!(p.log_q_forward.is_finite() && p.log_q_reverse.is_finite());
                prop_assert_eq!(&d.ids()[..p.edit_position], &p.list.ids()[..p.edit_position]);
                // recompute the reverse move's probability from the destination
                let back = log_q(reverse_kind(p.kind), p.list.len(), pool_size);
                prop_assert_eq!(back, p.log_q_reverse);
                prop_assert!(feasible_kinds(p.list.len(), pool_size).contains(&reverse_kind(p.kind)));
            }
        }
    }

    #[test]
    fn psrf_examples() {
        let r = gelman_rubin(&[vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        assert!((r - 0.75f64.sqrt()).abs() < 1e-12);
        let r = gelman_rubin(&[vec![0.0; 10], vec![100.0; 10]]).unwrap();
        assert!(r.is_infinite());
        assert_eq!(gelman_rubin(&[vec![2.0; 5], vec![2.0; 5]]).unwrap(), 1.0);
        assert!(matches!(gelman_rubin(&[vec![1.0, 2.0]]), Err(Error::TooFewChains(1))));
        assert!(gelman_rubin(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn psrf_near_one_for_iid_chains() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let chains: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..20_000).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let r = gelman_rubin(&chains).unwrap();
        assert!(r > 0.99 && r < 1.01, "{r}");
    }

    #[test]
    fn flat_posterior_uses_q_ratio() {
        // three antecedents; from [] only add is feasible (Q = 1/3), and the
        // reverse removal from a length-1 list has Q = 1/2 * 1 = 1/2.
        let (ds, pool) = random_problem(10, 3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let empty = RuleList::empty();
        let p = propose(&empty, &pool, &mut rng).unwrap();
        assert_eq!(p.kind, ProposalKind::Add);
        let ratio = log_acceptance_ratio(0.0, 0.0, &p);
        assert!((ratio - (1.5f64).ln()).abs() < 1e-12);

        // removal from a length-1 list: accepted with probability 2/3
        let single = RuleList::new(vec![1], 3).unwrap();
        loop {
            let p = propose(&single, &pool, &mut rng).unwrap();
            if p.kind == ProposalKind::Remove {
                let ratio = log_acceptance_ratio(0.0, 0.0, &p);
                assert!((ratio.exp() - 2.0 / 3.0).abs() < 1e-12);
                break;
            }
        }
        let _ = ds;
    }

    #[test]
    fn better_symmetric_proposal_always_accepted() {
        let p = Proposal {
            kind: ProposalKind::Move,
            list: RuleList::empty(),
            log_q_forward: -2.0,
            log_q_reverse: -2.0,
            edit_position: 0,
        };
        assert!(log_acceptance_ratio(-10.0, -9.0, &p) > 0.0);
    }

    #[test]
    fn chains_are_deterministic() {
        let (ds, pool) = random_problem(80, 8, 2);
        let hp = Hyperparams::new(3.0, 1.0, 2);
        let scorer = Scorer::new(&pool, &ds, &hp).unwrap();
        let a = run_chain(&scorer, 2000, 17, 1).unwrap();
        let b = run_chain(&scorer, 2000, 17, 1).unwrap();
        assert_eq!(a.trace(), b.trace());
        assert_eq!(a.samples(), b.samples());
        let c = run_chain(&scorer, 2000, 18, 1).unwrap();
        assert_ne!(a.trace(), c.trace());

        let one = run_chain(&scorer, 1, 17, 1).unwrap();
        assert_eq!(one.iteration(), 1);
        assert_eq!(one.trace().len(), 1);
        assert_eq!(one.samples().len(), 1);
        assert!(run_chain(&scorer, 0, 1, 1).is_err());
    }

    #[test]
    fn thinning_keeps_every_kth() {
        let (ds, pool) = random_problem(40, 5, 3);
        let hp = Hyperparams::new(2.0, 1.0, 2);
        let scorer = Scorer::new(&pool, &ds, &hp).unwrap();
        let s = run_chain(&scorer, 100, 1, 7).unwrap();
        assert_eq!(s.samples().len(), 14);
        assert!(s.samples().iter().all(|x| x.iteration % 7 == 0));
    }

    #[test]
    fn incremental_matches_full_recompute() {
        let (ds, pool) = random_problem(300, 20, 4);
        let hp = Hyperparams::new(6.0, 1.0, 2);
        let scorer = Scorer::new(&pool, &ds, &hp).unwrap();
        let s = run_chain(&scorer, 20_000, 3, 1).unwrap();
        assert!(s.max_recompute_error() <= 1e-8, "{}", s.max_recompute_error());
        let full = scorer.log_posterior(s.current().ids()).unwrap();
        assert!((full - s.current_log_posterior()).abs() <= 1e-8);
        assert!(s.acceptance_rate() > 0.0);
    }

    #[test]
    fn ensemble_requires_two_chains() {
        let (ds, pool) = random_problem(20, 3, 5);
        let hp = Hyperparams::new(1.0, 1.0, 2);
        let scorer = Scorer::new(&pool, &ds, &hp).unwrap();
        let config = EnsembleConfig {
            chains: 1,
            ..Default::default()
        };
        assert!(matches!(run_ensemble(&scorer, &config, 1), Err(Error::TooFewChains(1))));
    }

    #[test]
    fn separable_data_converges_at_initial_budget() {
        // item 0 determines the label exactly
        let (ds, pool) = {
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let rows: Vec<Vec<bool>> = (0..2000)
                .map(|_| (0..6).map(|_| rng.random_bool(0.5)).collect())
                .collect();
            let labels: Vec<usize> = rows.iter().map(|r| usize::from(r[0])).collect();
            let ds = dataset(&rows, &labels);
            let pool = AntecedentPool::singletons(&ds).unwrap();
            (ds, pool)
        };
        let hp = Hyperparams::new(1.0, 1.0, 2);
        let scorer = Scorer::new(&pool, &ds, &hp).unwrap();
        let config = EnsembleConfig {
            initial_iterations: 4000,
            max_iterations: 16_000,
            ..Default::default()
        };
        let ens = run_ensemble(&scorer, &config, 9).unwrap();
        assert!(ens.converged, "r_hat {}", ens.r_hat);
        assert_eq!(ens.iterations, 4000);
        assert_eq!(ens.samples.len(), 3 * 2000);
        assert_eq!(ens.burn_in_discarded, vec![2000; 3]);
        assert!(ens.samples.iter().all(|s| s.iteration > 2000));
        let with_zero = ens.samples.iter().filter(|s| s.list.ids().first() == Some(&0)).count();
        assert!(with_zero as f64 > 0.9 * ens.samples.len() as f64);
    }

    #[test]
    fn ensemble_independent_of_execution_mode() {
        let (ds, pool) = random_problem(100, 6, 7);
        let hp = Hyperparams::new(2.0, 1.0, 2);
        let scorer = Scorer::new(&pool, &ds, &hp).unwrap();
        let mut config = EnsembleConfig {
            initial_iterations: 1000,
            max_iterations: 4000,
            execution: Execution::Sequential,
            ..Default::default()
        };
        let seq = run_ensemble(&scorer, &config, 21).unwrap();
        config.execution = Execution::Parallel;
        let par = run_ensemble(&scorer, &config, 21).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.trace_csv().lines().count(), 1 + 3 * seq.iterations);
    }
}
