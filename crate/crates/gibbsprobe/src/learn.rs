//! Neighbourhood-based model reconstruction from configuration statistics.
//!
//! For each focal spin `i` the crate minimises the screening objective
//!
//! ```text
//! S_i(θ) = ⟨ exp( − Σ_{K ∋ i} θ_K Π_{j∈K} σ_j ) ⟩_data
//! ```
//!
//! over all coefficients of interaction keys that contain `i` (up to a chosen
//! order). The average runs over the empirical distribution (or exact
//! weights), so the objective is a convex combination of exponentials of
//! linear functions of θ and therefore smooth and convex. At the population
//! optimum the reconstructed coefficients match the generating model's
//! neighbourhood of `i`; with `M` samples the error decays like `1/√M`.
//!
//! A full model estimate symmetrises the per-neighbourhood results: every key
//! is estimated once per member spin and the arithmetic mean is reported.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use nalgebra::{DMatrix, DVector};

use crate::model::{spin_product_sign, ExactDistribution, GibbsModel, ModelError};
use crate::optim::{fista_l1, lbfgs, LbfgsOptions, MinimizeResult};
use crate::sampler::SampleSet;

/// Errors from the learning routines.
#[derive(Debug, Error)]
pub enum LearnError {
    #[error("no observations with positive weight")]
    EmptyData,
    #[error("interaction order must be at least 1")]
    OrderZero,
    #[error("interaction order {order} exceeds the number of spins {n_spins}")]
    OrderTooHigh { order: usize, n_spins: usize },
    #[error("focal spin {focal} out of range for {n_spins} spins")]
    FocalOutOfRange { focal: usize, n_spins: usize },
    #[error(
        "spin {spin} is constant across all observations; its field is unidentifiable \
         (add data in which the spin takes both values)"
    )]
    DegenerateSpin { spin: usize },
    #[error(
        "neighbourhood of spin {focal} did not converge: gradient norm {grad_norm:.3e} \
         after {iterations} iterations (tolerance {grad_tol:.3e})"
    )]
    NonConvergence {
        focal: usize,
        grad_norm: f64,
        iterations: usize,
        grad_tol: f64,
    },
    #[error("key {key:?} does not contain the focal spin {focal}")]
    KeyMissingFocal { key: Vec<usize>, focal: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Configuration for neighbourhood learning.
#[derive(Debug, Clone)]
pub struct LearnConfig {
    /// Maximum interaction order reconstructed (1 = fields only, 2 adds pair
    /// couplings, …).
    pub order: usize,
    /// Convergence tolerance on the Euclidean gradient norm.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Optional l1 penalty on all neighbourhood coefficients (0 disables it).
    pub l1_penalty: f64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            order: 2,
            grad_tol: 1e-9,
            max_iter: 1000,
            l1_penalty: 0.0,
        }
    }
}

impl LearnConfig {
    pub fn with_order(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }
}

/// Weighted configuration data: the common currency of the learners.
///
/// Each item pairs a configuration index (bit `i` set ⇔ spin `i` is +1) with a
/// positive weight. Weights need not be normalised; the objective normalises
/// by their sum.
#[derive(Debug, Clone)]
pub struct WeightedData {
    n_spins: usize,
    items: Vec<(u64, f64)>,
}

impl WeightedData {
    /// Builds from raw items, dropping non-positive weights.
    pub fn new(n_spins: usize, items: Vec<(u64, f64)>) -> Self {
        let items = items.into_iter().filter(|&(_, w)| w > 0.0).collect();
        Self { n_spins, items }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn items(&self) -> &[(u64, f64)] {
        &self.items
    }

    pub fn total_weight(&self) -> f64 {
        self.items.iter().map(|&(_, w)| w).sum()
    }

    /// Detects spins that never change sign across the data.
    fn constant_spin(&self) -> Option<usize> {
        if self.items.is_empty() {
            return None;
        }
        let first = self.items[0].0;
        for spin in 0..self.n_spins {
            let bit = first >> spin & 1;
            if self
                .items
                .iter()
                .all(|&(config, _)| (config >> spin & 1) == bit)
            {
                return Some(spin);
            }
        }
        None
    }
}

impl From<&SampleSet> for WeightedData {
    fn from(samples: &SampleSet) -> Self {
        let items = samples
            .counts()
            .iter()
            .map(|(&config, &count)| (config, count as f64))
            .collect();
        Self::new(samples.n_spins(), items)
    }
}

impl From<&ExactDistribution> for WeightedData {
    fn from(dist: &ExactDistribution) -> Self {
        let items = dist
            .probs()
            .iter()
            .enumerate()
            .map(|(config, &p)| (config as u64, p))
            .collect();
        Self::new(dist.n_spins(), items)
    }
}

/// Coefficients of one spin's neighbourhood, keyed by sorted interaction keys
/// that all contain the focal spin.
#[derive(Debug, Clone)]
pub struct NeighborhoodParams {
    focal: usize,
    coeffs: BTreeMap<Vec<usize>, f64>,
}

impl NeighborhoodParams {
    pub fn new(focal: usize, coeffs: BTreeMap<Vec<usize>, f64>) -> Result<Self, LearnError> {
        for key in coeffs.keys() {
            if !key.contains(&focal) {
                return Err(LearnError::KeyMissingFocal {
                    key: key.clone(),
                    focal,
                });
            }
        }
        Ok(Self { focal, coeffs })
    }

    pub fn focal(&self) -> usize {
        self.focal
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<usize>, f64> {
        &self.coeffs
    }

    pub fn coeff(&self, key: &[usize]) -> f64 {
        self.coeffs.get(key).copied().unwrap_or(0.0)
    }
}

/// All sorted interaction keys with 1 ≤ |K| ≤ `order`, in lexicographic
/// order: the dense term set reconstructed by an order-`order` fit.
pub fn all_interaction_keys(n_spins: usize, order: usize) -> Vec<Vec<usize>> {
    let mut keys = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..n_spins).rev().map(|i| vec![i]).collect();
    while let Some(key) = stack.pop() {
        keys.push(key.clone());
        if key.len() < order {
            let last = *key.last().expect("non-empty key");
            for next in (last + 1..n_spins).rev() {
                let mut extended = key.clone();
                extended.push(next);
                stack.push(extended);
            }
        }
    }
    keys.sort_unstable();
    keys
}

/// All sorted interaction keys containing `focal` with 1 ≤ |K| ≤ `order`,
/// in lexicographic order (the coefficient/gradient ordering used throughout).
pub fn neighborhood_keys(n_spins: usize, focal: usize, order: usize) -> Vec<Vec<usize>> {
    let others: Vec<usize> = (0..n_spins).filter(|&j| j != focal).collect();
    let mut keys = Vec::new();
    // Enumerate subsets of the other spins with size < order, add the focal.
    let mut stack: Vec<(usize, Vec<usize>)> = vec![(0, Vec::new())];
    while let Some((start, subset)) = stack.pop() {
        let mut key = subset.clone();
        key.push(focal);
        key.sort_unstable();
        keys.push(key);
        if subset.len() + 1 < order {
            for (offset, &j) in others[start..].iter().enumerate() {
                let mut next = subset.clone();
                next.push(j);
                stack.push((start + offset + 1, next));
            }
        }
    }
    keys.sort_unstable();
    keys
}

fn key_mask(key: &[usize]) -> usize {
    key.iter().fold(0usize, |mask, &spin| mask | 1usize << spin)
}

/// Screening objective and gradient at the given neighbourhood coefficients.
///
/// Returns `(value, gradient)`, where the gradient entries follow the
/// lexicographic order of `params.coeffs()` keys. The data average is
/// normalised by the total weight.
pub fn iso_value_grad(data: &WeightedData, params: &NeighborhoodParams) -> (f64, Vec<f64>) {
    let keys: Vec<&Vec<usize>> = params.coeffs.keys().collect();
    let theta: Vec<f64> = params.coeffs.values().copied().collect();
    let masks: Vec<usize> = keys.iter().map(|k| key_mask(k)).collect();
    let total = data.total_weight();
    let mut value = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for &(config, weight) in &data.items {
        let mut exponent = 0.0;
        for (t, &mask) in theta.iter().zip(&masks) {
            exponent += t * spin_product_sign(config as usize, mask);
        }
        let term = weight / total * (-exponent).exp();
        value += term;
        for (g, &mask) in grad.iter_mut().zip(&masks) {
            *g -= spin_product_sign(config as usize, mask) * term;
        }
    }
    (value, grad)
}

/// Per-neighbourhood solver statistics.
#[derive(Debug, Clone, Serialize)]
pub struct NeighborhoodStats {
    pub focal: usize,
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective: f64,
}

/// Minimises the screening objective for one focal spin.
pub fn learn_neighborhood(
    data: &WeightedData,
    focal: usize,
    config: &LearnConfig,
) -> Result<(NeighborhoodParams, NeighborhoodStats), LearnError> {
    let n_spins = data.n_spins;
    if focal >= n_spins {
        return Err(LearnError::FocalOutOfRange { focal, n_spins });
    }
    validate_config(data, config)?;
    if let Some(spin) = data.constant_spin() {
        return Err(LearnError::DegenerateSpin { spin });
    }

    let keys = neighborhood_keys(n_spins, focal, config.order);
    let masks: Vec<usize> = keys.iter().map(|k| key_mask(k)).collect();
    let total = data.total_weight();
    let items = &data.items;

    // Precompute the sign matrix once: entry (row, col) = Π_{j∈K_col} σ_j(row).
    let signs: Vec<Vec<f64>> = items
        .iter()
        .map(|&(config, _)| {
            masks
                .iter()
                .map(|&m| spin_product_sign(config as usize, m))
                .collect()
        })
        .collect();
    let weights: Vec<f64> = items.iter().map(|&(_, w)| w / total).collect();

    let objective = |theta: &[f64], grad: &mut [f64]| -> f64 {
        let mut value = 0.0;
        grad.fill(0.0);
        for (row, &w) in signs.iter().zip(&weights) {
            let exponent: f64 = row.iter().zip(theta).map(|(s, t)| s * t).sum();
            let term = w * (-exponent).exp();
            value += term;
            for (g, s) in grad.iter_mut().zip(row) {
                *g -= s * term;
            }
        }
        value
    };

    let x0 = vec![0.0; keys.len()];
    let opts = LbfgsOptions {
        grad_tol: config.grad_tol,
        max_iter: config.max_iter,
        memory: 10,
    };
    let mut result = if config.l1_penalty > 0.0 {
        fista_l1(&x0, objective, config.l1_penalty, &opts)
    } else {
        lbfgs(&x0, objective, &opts)
    };
    // Quasi-Newton line searches stall once objective decrements fall below
    // f64 resolution, which can leave the gradient slightly above a very
    // tight tolerance. In the smooth (unpenalised) case a few exact-Hessian
    // Newton steps push the gradient down to the numerical floor.
    if config.l1_penalty == 0.0 && !result.converged {
        newton_polish(&signs, &weights, config.grad_tol, &mut result);
    }
    if !result.converged {
        return Err(LearnError::NonConvergence {
            focal,
            grad_norm: result.grad_norm,
            iterations: result.iterations,
            grad_tol: config.grad_tol,
        });
    }
    let coeffs: BTreeMap<Vec<usize>, f64> = keys.into_iter().zip(result.x).collect();
    let stats = NeighborhoodStats {
        focal,
        iterations: result.iterations,
        grad_norm: result.grad_norm,
        objective: result.value,
    };
    Ok((NeighborhoodParams { focal, coeffs }, stats))
}

/// Cap on `rows × parameters²` for the Newton fallback; beyond this the
/// exact Hessian costs more than it is worth and the quasi-Newton verdict
/// stands.
const NEWTON_POLISH_COST_CAP: usize = 50_000_000;

/// Exact-Hessian Newton refinement of a stalled quasi-Newton solution.
///
/// The screening objective is a positive combination of exponentials, so its
/// Hessian `Σ w·σσᵀ·exp(−σᵀθ)` is positive semidefinite and cheap to form
/// for small neighbourhoods. Steps are accepted on gradient-norm decrease
/// (near the optimum the objective itself no longer resolves progress in
/// f64), with halving backtracking, and stop at `grad_tol` or at the
/// numerical floor.
fn newton_polish(
    signs: &[Vec<f64>],
    weights: &[f64],
    grad_tol: f64,
    result: &mut MinimizeResult,
) {
    let d = result.x.len();
    if d == 0 || signs.len().saturating_mul(d * d) > NEWTON_POLISH_COST_CAP {
        return;
    }
    let value_grad = |theta: &[f64]| -> (f64, DVector<f64>) {
        let mut value = 0.0;
        let mut grad = DVector::zeros(d);
        for (row, &w) in signs.iter().zip(weights) {
            let exponent: f64 = row.iter().zip(theta).map(|(s, t)| s * t).sum();
            let term = w * (-exponent).exp();
            value += term;
            for (k, &sk) in row.iter().enumerate() {
                grad[k] -= sk * term;
            }
        }
        (value, grad)
    };
    let hessian = |theta: &[f64]| -> DMatrix<f64> {
        let mut hess = DMatrix::zeros(d, d);
        for (row, &w) in signs.iter().zip(weights) {
            let exponent: f64 = row.iter().zip(theta).map(|(s, t)| s * t).sum();
            let term = w * (-exponent).exp();
            for (k, &sk) in row.iter().enumerate() {
                for (l, &sl) in row.iter().enumerate().skip(k) {
                    hess[(k, l)] += sk * sl * term;
                }
            }
        }
        for k in 0..d {
            for l in 0..k {
                hess[(k, l)] = hess[(l, k)];
            }
        }
        hess
    };

    let (mut value, mut grad) = value_grad(&result.x);
    for _ in 0..50 {
        let grad_norm = grad.norm();
        result.value = value;
        result.grad_norm = grad_norm;
        if grad_norm <= grad_tol {
            result.converged = true;
            return;
        }
        let Some(chol) = hessian(&result.x).cholesky() else {
            return;
        };
        let step = chol.solve(&grad);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate: Vec<f64> = result
                .x
                .iter()
                .zip(step.iter())
                .map(|(x, s)| x - alpha * s)
                .collect();
            let (cand_value, cand_grad) = value_grad(&candidate);
            result.iterations += 1;
            if cand_grad.norm() < grad_norm {
                result.x = candidate;
                value = cand_value;
                grad = cand_grad;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return;
        }
    }
}

fn validate_config(data: &WeightedData, config: &LearnConfig) -> Result<(), LearnError> {
    if data.items.is_empty() {
        return Err(LearnError::EmptyData);
    }
    if config.order == 0 {
        return Err(LearnError::OrderZero);
    }
    if config.order > data.n_spins {
        return Err(LearnError::OrderTooHigh {
            order: config.order,
            n_spins: data.n_spins,
        });
    }
    Ok(())
}

/// One term of a [`LearnReport`]: the per-neighbourhood estimates that were
/// averaged into the final coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct TermReport {
    pub spins: Vec<usize>,
    /// `(focal, estimate)` pairs, one per member spin, in ascending focal order.
    pub estimates: Vec<(usize, f64)>,
    pub mean: f64,
}

/// Diagnostics from a full-model reconstruction.
#[derive(Debug, Clone, Serialize)]
pub struct LearnReport {
    pub n_spins: usize,
    pub order: usize,
    pub grad_tol: f64,
    pub l1_penalty: f64,
    pub total_weight: f64,
    pub neighborhoods: Vec<NeighborhoodStats>,
    pub terms: Vec<TermReport>,
}

/// Reconstructs a full model by solving every neighbourhood and averaging the
/// per-neighbourhood estimates of each shared key.
pub fn learn_model(data: &WeightedData, config: &LearnConfig) -> Result<GibbsModel, LearnError> {
    learn_model_with_report(data, config).map(|(model, _)| model)
}

/// As [`learn_model`], also returning per-neighbourhood diagnostics.
pub fn learn_model_with_report(
    data: &WeightedData,
    config: &LearnConfig,
) -> Result<(GibbsModel, LearnReport), LearnError> {
    validate_config(data, config)?;
    if let Some(spin) = data.constant_spin() {
        return Err(LearnError::DegenerateSpin { spin });
    }
    let n_spins = data.n_spins;
    let results: Vec<Result<(NeighborhoodParams, NeighborhoodStats), LearnError>> = (0..n_spins)
        .into_par_iter()
        .map(|focal| learn_neighborhood(data, focal, config))
        .collect();
    let mut solved = Vec::with_capacity(n_spins);
    for result in results {
        solved.push(result?);
    }

    let mut estimates: BTreeMap<Vec<usize>, Vec<(usize, f64)>> = BTreeMap::new();
    let mut neighborhoods = Vec::with_capacity(n_spins);
    for (params, stats) in solved {
        for (key, &value) in params.coeffs() {
            estimates
                .entry(key.clone())
                .or_default()
                .push((params.focal(), value));
        }
        neighborhoods.push(stats);
    }

    let mut model = GibbsModel::new(n_spins)?;
    let mut terms = Vec::with_capacity(estimates.len());
    for (key, mut per_focal) in estimates {
        per_focal.sort_unstable_by_key(|&(focal, _)| focal);
        let mean =
            per_focal.iter().map(|&(_, v)| v).sum::<f64>() / per_focal.len() as f64;
        model.set_term(&key, mean)?;
        terms.push(TermReport {
            spins: key,
            estimates: per_focal,
            mean,
        });
    }
    let report = LearnReport {
        n_spins,
        order: config.order,
        grad_tol: config.grad_tol,
        l1_penalty: config.l1_penalty,
        total_weight: data.total_weight(),
        neighborhoods,
        terms,
    };
    Ok((model, report))
}
