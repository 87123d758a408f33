//! Replicate-based estimation of finite-sample reconstruction error.
//!
//! There is no tight analytic bound for the reconstruction error of the
//! screening estimator at finite sample size, so it is measured empirically:
//! draw `R` independent synthetic data sets of `M` configurations from a known
//! reference model, relearn each one, and compute per-term statistics of the
//! deviations `δ = reference − learned`. The *average-case 3σ threshold* —
//! three times the mean of the per-term standard deviations — separates
//! significant reconstructed terms from sampling noise.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::learn::{all_interaction_keys, learn_model, LearnConfig, LearnError, WeightedData};
use crate::model::{exact_distribution, GibbsModel, ModelError};
use crate::rng::stream_rng;
use crate::sampler::{sample_exact_with_rng, SamplerError};

/// Errors from the replicate protocol.
#[derive(Debug, Error)]
pub enum ErrorEstError {
    #[error("need at least 2 replicates, got {got}")]
    TooFewReplicates { got: usize },
    #[error("need at least 1 sample per replicate")]
    ZeroSamples,
    #[error(
        "{failed} of {requested} replicates failed to relearn (more than 10%); \
         increase M or loosen the learner configuration"
    )]
    TooManyFailures { failed: usize, requested: usize },
    #[error("fewer than 2 replicates usable after exclusions ({used})")]
    TooFewUsable { used: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// Deviation statistics for one interaction key across replicates.
#[derive(Debug, Clone, Serialize)]
pub struct TermStat {
    pub spins: Vec<usize>,
    /// Mean of `reference − learned` across usable replicates.
    pub mean: f64,
    /// Sample standard deviation (n−1 denominator) of the deviations.
    pub sigma: f64,
}

/// Result of the replicate protocol.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub m_samples: u64,
    pub replicates_requested: usize,
    pub replicates_used: usize,
    pub replicates_failed: usize,
    pub order: usize,
    /// Average-case significance threshold: 3 × mean over terms of σ.
    pub threshold: f64,
    /// Per-term statistics, sorted by interaction key.
    pub terms: Vec<TermStat>,
}

impl ErrorReport {
    pub fn term_stat(&self, key: &[usize]) -> Option<&TermStat> {
        self.terms
            .binary_search_by(|stat| stat.spins.as_slice().cmp(key))
            .ok()
            .map(|idx| &self.terms[idx])
    }

    /// CSV rendering with header `term,mean,sigma`; keys are hyphen-joined
    /// spin indices (`0-3` for the pair {0,3}).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("term,mean,sigma\n");
        for stat in &self.terms {
            let key = stat
                .spins
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join("-");
            writeln!(out, "{key},{},{}", stat.mean, stat.sigma).expect("write to String");
        }
        out
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Runs the replicate protocol: `R` independent data sets of `M` samples from
/// the exact distribution of `reference`, each relearned with `config`.
///
/// Replicates use disjoint RNG streams of `seed`, run in parallel, and are
/// aggregated in replicate order, so the report is deterministic. Replicates
/// whose relearning fails (non-convergence or degenerate data) are excluded
/// and counted; if more than 10% fail the whole report is an error.
pub fn estimate_error(
    reference: &GibbsModel,
    m: u64,
    r: usize,
    config: &LearnConfig,
    seed: u64,
) -> Result<ErrorReport, ErrorEstError> {
    if r < 2 {
        return Err(ErrorEstError::TooFewReplicates { got: r });
    }
    if m == 0 {
        return Err(ErrorEstError::ZeroSamples);
    }
    if config.order == 0 {
        return Err(LearnError::OrderZero.into());
    }
    if config.order > reference.n_spins() {
        return Err(LearnError::OrderTooHigh {
            order: config.order,
            n_spins: reference.n_spins(),
        }
        .into());
    }
    let dist = exact_distribution(reference)?;

    let outcomes: Vec<Result<GibbsModel, LearnError>> = (0..r)
        .into_par_iter()
        .map(|replicate| {
            let mut rng = stream_rng(seed, replicate as u64);
            let samples = sample_exact_with_rng(&dist, m, &mut rng)
                .expect("m validated above; sampling from an exact distribution cannot fail");
            learn_model(&WeightedData::from(&samples), config)
        })
        .collect();

    let mut learned_models = Vec::with_capacity(r);
    let mut failed = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(model) => learned_models.push(model),
            Err(
                LearnError::NonConvergence { .. } | LearnError::DegenerateSpin { .. },
            ) => failed += 1,
            Err(other) => return Err(other.into()),
        }
    }
    if failed * 10 > r {
        return Err(ErrorEstError::TooManyFailures {
            failed,
            requested: r,
        });
    }
    let used = learned_models.len();
    if used < 2 {
        return Err(ErrorEstError::TooFewUsable { used });
    }

    let keys = all_interaction_keys(reference.n_spins(), config.order);
    let mut terms = Vec::with_capacity(keys.len());
    let mut sigma_sum = 0.0;
    for key in keys {
        let deviations: Vec<f64> = learned_models
            .iter()
            .map(|learned| reference.term(&key) - learned.term(&key))
            .collect();
        let mean = deviations.iter().sum::<f64>() / used as f64;
        let variance = deviations
            .iter()
            .map(|d| (d - mean).powi(2))
            .sum::<f64>()
            / (used - 1) as f64;
        let sigma = variance.sqrt();
        sigma_sum += sigma;
        terms.push(TermStat {
            spins: key,
            mean,
            sigma,
        });
    }
    let threshold = 3.0 * sigma_sum / terms.len() as f64;

    Ok(ErrorReport {
        m_samples: m,
        replicates_requested: r,
        replicates_used: used,
        replicates_failed: failed,
        order: config.order,
        threshold,
        terms,
    })
}

/// Terms of `learned` whose coefficient magnitude strictly exceeds the
/// report's threshold.
pub fn significance_mask(learned: &GibbsModel, report: &ErrorReport) -> BTreeSet<Vec<usize>> {
    learned
        .terms()
        .filter(|&(_, value)| value.abs() > report.threshold)
        .map(|(key, _)| key.clone())
        .collect()
}
