//! Bayesian rule lists.
//!
//! A rule list is an ordered sequence of antecedents (conjunctions of binary
//! conditions) evaluated top-down; the first antecedent that applies to an
//! observation decides which Dirichlet-multinomial consequent classifies it.
//! This crate mines candidate antecedents, samples the posterior over lists
//! with Metropolis-Hastings and turns the samples into decision-list
//! classifiers with credible intervals.
//!
//! Pipeline:
//!
//! 1. [`data`]: load a CSV and expand it into binary items.
//! 2. [`mining`]: mine the antecedent pool with FP-Growth.
//! 3. [`model`]: prior, likelihood and first-match counts.
//! 4. [`mcmc`]: multi-chain sampling with Gelman-Rubin monitoring.
//! 5. [`inference`]: point estimates, posterior predictive, rendering.
//! 6. [`eval`]: simulation study, ROC/AUC and cross-validation.

pub mod bitset;
pub mod data;
pub mod error;
pub mod eval;
pub mod inference;
pub mod mcmc;
pub mod mining;
pub mod model;
pub mod par;
mod seed;
#[cfg(test)]
mod testutil;

pub use bitset::Bitset;
pub use data::{Condition, Dataset, FoldAssignment, Item, LoadOptions};
pub use error::{Error, Result};
pub use inference::{BayesianDecisionList, Prediction};
pub use mcmc::{EnsembleConfig, PosteriorEnsemble};
pub use mining::{Antecedent, AntecedentPool};
pub use model::{CountMatrix, Hyperparams, RuleList, Scorer};
pub use par::Execution;
pub use seed::derive_seed;
