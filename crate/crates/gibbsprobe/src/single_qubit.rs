//! Single-spin output-field estimation and response-curve fitting.
//!
//! A single ±1 variable with output distribution `μ(σ) ∝ exp(σ·h_out)` is
//! probed at a series of input fields. From the count `S` of positive
//! observations among `M`, the output field is estimated as
//! `h_out = arctanh(2S/M − 1) = ½·ln(S/(M−S))`, with exact binomial confidence
//! intervals mapped through the same monotone transform.
//!
//! Three nested response models link input to output field:
//!
//! * classical: `h_out = β(h_in + h_res0)`;
//! * quantum: `h_out = arctanh((h+r)·tanh(β·z)/z)` with `z = √((h+r)² + (ξ·h_in)²)`,
//!   where a transverse contribution `ξ·h_in` bends the response into flat tails;
//! * noisy quantum: the residual field `r` fluctuates around `h_res0` with
//!   standard deviation `h_sd` (binary two-point noise by default, uniform as
//!   an alternative), and the observation probability is averaged over noise
//!   before the arctanh.
//!
//! Parameters are fitted by maximising the Bernoulli log-likelihood
//! `Σ_points [ m̂ · h_model − ln cosh(h_model) ]` with `m̂ = 2S/M − 1`, each
//! scan point contributing equally.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use thiserror::Error;

use crate::numeric::atanh_clamped;
use crate::optim::{nelder_mead, NmOptions};
use crate::rng::stream_rng;
use crate::sampler::gl16_nodes_unit;

/// Errors from estimation, fitting, and scan I/O.
#[derive(Debug, Error)]
pub enum SingleQubitError {
    #[error("positive count {s} exceeds total {m}")]
    CountExceedsTotal { s: u64, m: u64 },
    #[error("need at least one observation")]
    ZeroObservations,
    #[error("confidence level must lie strictly between 0 and 1, got {alpha}")]
    BadConfidence { alpha: f64 },
    #[error("scan point {index}: input field {h_in} is not finite")]
    NonFiniteField { index: usize, h_in: f64 },
    #[error("duplicate input field {h_in} in scan")]
    DuplicateField { h_in: f64 },
    #[error("scan is empty")]
    EmptyScan,
    #[error(
        "fit needs at least {needed} non-saturated points (0 < S < M), scan has {got}"
    )]
    TooFewPoints { needed: usize, got: usize },
    #[error("no optimisation start converged")]
    AllStartsFailed,
    #[error("reading scan: {0}")]
    Io(#[from] std::io::Error),
    #[error("scan line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Output-field estimate from a positive-observation count.
///
/// When every observation has the same sign the point estimate is infinite;
/// that case is reported explicitly rather than as a clipped number, with the
/// finite side of the confidence interval preserved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HoutEstimate {
    Finite {
        h_out: f64,
        ci_low: f64,
        ci_high: f64,
    },
    /// All observations were −1: the point estimate is −∞, only the upper
    /// confidence bound is finite.
    SaturatedLow { ci_high: f64 },
    /// All observations were +1: the point estimate is +∞, only the lower
    /// confidence bound is finite.
    SaturatedHigh { ci_low: f64 },
}

impl HoutEstimate {
    pub fn is_saturated(&self) -> bool {
        !matches!(self, HoutEstimate::Finite { .. })
    }

    /// The finite point estimate, if any.
    pub fn h_out(&self) -> Option<f64> {
        match self {
            HoutEstimate::Finite { h_out, .. } => Some(*h_out),
            _ => None,
        }
    }
}

/// Confidence-interval construction for the binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiMethod {
    /// Exact equal-tailed interval (default): (1−α)/2 error in each tail.
    ClopperPearson,
    /// Exact interval minimising the length in probability space over the
    /// split of the error budget between the two tails.
    CrowMinimalLength,
}

/// Beta quantile by bisection on the regularized incomplete beta CDF.
/// (The bundled generic quantile search is only good to ~1e-4; exact
/// confidence bounds deserve full double precision.)
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let dist = Beta::new(a, b).expect("positive beta shapes");
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist.cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Lower exact bound: P(Bin(m,p) ≥ s) = tail ⇒ p = BetaInv(s, m−s+1; tail).
fn binomial_lower(s: u64, m: u64, tail: f64) -> f64 {
    if s == 0 || tail <= 0.0 {
        0.0
    } else {
        beta_quantile(s as f64, (m - s + 1) as f64, tail)
    }
}

/// Upper exact bound: P(Bin(m,p) ≤ s) = tail ⇒ p = BetaInv(s+1, m−s; 1−tail).
fn binomial_upper(s: u64, m: u64, tail: f64) -> f64 {
    if s == m || tail <= 0.0 {
        1.0
    } else {
        beta_quantile((s + 1) as f64, (m - s) as f64, 1.0 - tail)
    }
}

/// Minimal-length exact interval: split the error budget `eps` between the
/// tails to minimise `p_hi − p_lo`, by grid search plus local refinement.
fn crow_interval(s: u64, m: u64, eps: f64) -> (f64, f64) {
    let length = |gamma: f64| {
        binomial_upper(s, m, eps - gamma) - binomial_lower(s, m, gamma)
    };
    let steps = 200usize;
    let mut best_gamma = 0.0;
    let mut best_len = f64::INFINITY;
    for k in 0..=steps {
        let gamma = eps * k as f64 / steps as f64;
        let len = length(gamma);
        if len < best_len {
            best_len = len;
            best_gamma = gamma;
        }
    }
    // Ternary refinement inside the bracketing grid cells.
    let mut lo = (best_gamma - eps / steps as f64).max(0.0);
    let mut hi = (best_gamma + eps / steps as f64).min(eps);
    for _ in 0..60 {
        let third = (hi - lo) / 3.0;
        let g1 = lo + third;
        let g2 = hi - third;
        if length(g1) <= length(g2) {
            hi = g2;
        } else {
            lo = g1;
        }
    }
    let gamma = 0.5 * (lo + hi);
    let final_len = length(gamma);
    if final_len < best_len {
        best_gamma = gamma;
    }
    (
        binomial_lower(s, m, best_gamma),
        binomial_upper(s, m, eps - best_gamma),
    )
}

fn atanh_of_probability(p: f64) -> f64 {
    atanh_clamped(2.0 * p - 1.0)
}

/// Estimates the output field from `s` positive observations out of `m`, with
/// an exact binomial confidence interval at confidence level `alpha`
/// (e.g. 0.997) using the requested construction.
///
/// The point estimate is `½·ln(s/(m−s))`, the exact arctanh of the empirical
/// magnetisation written in a form that stays accurate near saturation. For
/// `s ∈ {0, m}` the estimate is infinite and returned as an explicit
/// saturated variant carrying the finite interval endpoint.
pub fn estimate_hout_with(
    s: u64,
    m: u64,
    alpha: f64,
    method: CiMethod,
) -> Result<HoutEstimate, SingleQubitError> {
    if m == 0 {
        return Err(SingleQubitError::ZeroObservations);
    }
    if s > m {
        return Err(SingleQubitError::CountExceedsTotal { s, m });
    }
    if !(alpha.is_finite() && 0.0 < alpha && alpha < 1.0) {
        return Err(SingleQubitError::BadConfidence { alpha });
    }
    let eps = 1.0 - alpha;
    let (p_lo, p_hi) = match method {
        CiMethod::ClopperPearson => (
            binomial_lower(s, m, eps / 2.0),
            binomial_upper(s, m, eps / 2.0),
        ),
        CiMethod::CrowMinimalLength => crow_interval(s, m, eps),
    };
    if s == 0 {
        return Ok(HoutEstimate::SaturatedLow {
            ci_high: atanh_of_probability(p_hi),
        });
    }
    if s == m {
        return Ok(HoutEstimate::SaturatedHigh {
            ci_low: atanh_of_probability(p_lo),
        });
    }
    let h_out = 0.5 * ((s as f64).ln() - ((m - s) as f64).ln());
    Ok(HoutEstimate::Finite {
        h_out,
        ci_low: atanh_of_probability(p_lo),
        ci_high: atanh_of_probability(p_hi),
    })
}

/// [`estimate_hout_with`] using the default equal-tailed interval.
pub fn estimate_hout(s: u64, m: u64, alpha: f64) -> Result<HoutEstimate, SingleQubitError> {
    estimate_hout_with(s, m, alpha, CiMethod::ClopperPearson)
}

/// Linear response: `β·(h_in + h_res0)`.
pub fn h_out_classical(h_in: f64, beta: f64, h_res0: f64) -> f64 {
    beta * (h_in + h_res0)
}

/// One noise branch of the quantum response before the arctanh:
/// `(h+r)·tanh(β·z)/z` with `z = √((h+r)² + t²)`, `t` the transverse part.
fn quantum_branch(longitudinal: f64, transverse: f64, beta: f64) -> f64 {
    if transverse == 0.0 {
        // z = |h+r|: the expression reduces exactly to tanh(β(h+r)).
        return (beta * longitudinal).tanh();
    }
    let z = longitudinal.hypot(transverse);
    if z == 0.0 {
        0.0
    } else {
        longitudinal * (beta * z).tanh() / z
    }
}

/// Transverse-field response:
/// `arctanh((h+r)·tanh(β·z)/z)`, `z = √((h+r)² + (ξ·h_in)²)`, `r = h_res0`.
///
/// The removable singularity at `z = 0` evaluates to 0, and with `ξ = 0` the
/// curve is exactly the classical line wherever composition of tanh and
/// arctanh is exact.
pub fn h_out_quantum(h_in: f64, beta: f64, h_res0: f64, xi: f64) -> f64 {
    let longitudinal = h_in + h_res0;
    let transverse = xi * h_in;
    if transverse == 0.0 {
        // arctanh(tanh(β(h+r))) = β(h+r), evaluated without round-trip loss.
        return beta * longitudinal;
    }
    let mean = quantum_branch(longitudinal, transverse, beta);
    atanh_clamped(mean)
}

/// Transverse response with binary residual-field noise: the observation
/// probability is averaged over `r = h_res0 ± h_sd` (equal weights) before
/// the arctanh.
pub fn h_out_qnoise(h_in: f64, beta: f64, h_res0: f64, xi: f64, h_sd: f64) -> f64 {
    if h_sd == 0.0 {
        return h_out_quantum(h_in, beta, h_res0, xi);
    }
    let transverse = xi * h_in;
    let mean = 0.5 * quantum_branch(h_in + h_res0 + h_sd, transverse, beta)
        + 0.5 * quantum_branch(h_in + h_res0 - h_sd, transverse, beta);
    atanh_clamped(mean)
}

/// Transverse response with uniform residual-field noise on
/// `[h_res0 − √3·h_sd, h_res0 + √3·h_sd]` (same mean and standard deviation
/// as the binary model), averaged by 16-point Gauss–Legendre quadrature.
pub fn h_out_qnoise_uniform(h_in: f64, beta: f64, h_res0: f64, xi: f64, h_sd: f64) -> f64 {
    if h_sd == 0.0 {
        return h_out_quantum(h_in, beta, h_res0, xi);
    }
    let transverse = xi * h_in;
    let half_width = 3f64.sqrt() * h_sd;
    // Accumulate the ±node pairs together so the sum is exactly odd in the
    // longitudinal argument (the node order would otherwise perturb rounding).
    let mut mean = 0.0;
    for pair in gl16_nodes_unit().chunks(2) {
        let (x_lo, w_lo) = pair[0];
        let (x_hi, w_hi) = pair[1];
        mean += w_lo * quantum_branch(h_in + h_res0 + half_width * x_lo, transverse, beta)
            + w_hi * quantum_branch(h_in + h_res0 + half_width * x_hi, transverse, beta);
    }
    atanh_clamped(mean)
}

/// One scan point: `s` positive observations among `m` at input field `h_in`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub h_in: f64,
    pub s: u64,
    pub m: u64,
}

impl ScanPoint {
    /// Empirical magnetisation `2s/m − 1`.
    pub fn magnetisation(&self) -> f64 {
        2.0 * (self.s as f64 / self.m as f64) - 1.0
    }

    pub fn is_saturated(&self) -> bool {
        self.s == 0 || self.s == self.m
    }
}

/// A sweep of the input field with observation counts at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldScan {
    points: Vec<ScanPoint>,
}

impl FieldScan {
    pub fn new(points: Vec<ScanPoint>) -> Result<Self, SingleQubitError> {
        if points.is_empty() {
            return Err(SingleQubitError::EmptyScan);
        }
        for (index, point) in points.iter().enumerate() {
            if !point.h_in.is_finite() {
                return Err(SingleQubitError::NonFiniteField {
                    index,
                    h_in: point.h_in,
                });
            }
            if point.m == 0 {
                return Err(SingleQubitError::ZeroObservations);
            }
            if point.s > point.m {
                return Err(SingleQubitError::CountExceedsTotal {
                    s: point.s,
                    m: point.m,
                });
            }
        }
        let mut fields: Vec<f64> = points.iter().map(|p| p.h_in).collect();
        fields.sort_by(|a, b| a.partial_cmp(b).expect("finite fields"));
        if let Some(pair) = fields.windows(2).find(|w| w[0] == w[1]) {
            return Err(SingleQubitError::DuplicateField { h_in: pair[0] });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[ScanPoint] {
        &self.points
    }

    pub fn non_saturated(&self) -> usize {
        self.points.iter().filter(|p| !p.is_saturated()).count()
    }

    /// CSV rendering with header `h_in,S,M`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("h_in,S,M\n");
        for p in &self.points {
            writeln!(out, "{},{},{}", p.h_in, p.s, p.m).expect("write to String");
        }
        out
    }

    /// Parses scan CSV; the `h_in,S,M` header line is optional.
    pub fn from_csv(text: &str) -> Result<Self, SingleQubitError> {
        let mut points = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 && line.to_ascii_lowercase().starts_with("h_in") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(SingleQubitError::Parse {
                    line: idx + 1,
                    message: format!("expected 3 comma-separated fields, got {}", fields.len()),
                });
            }
            let h_in: f64 = fields[0].parse().map_err(|e| SingleQubitError::Parse {
                line: idx + 1,
                message: format!("bad input field {:?}: {e}", fields[0]),
            })?;
            let s: u64 = fields[1].parse().map_err(|e| SingleQubitError::Parse {
                line: idx + 1,
                message: format!("bad positive count {:?}: {e}", fields[1]),
            })?;
            let m: u64 = fields[2].parse().map_err(|e| SingleQubitError::Parse {
                line: idx + 1,
                message: format!("bad total count {:?}: {e}", fields[2]),
            })?;
            points.push(ScanPoint { h_in, s, m });
        }
        Self::new(points)
    }

    pub fn read_csv(path: &Path) -> Result<Self, SingleQubitError> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SingleQubitError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Which response model to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Classical,
    Quantum,
    NoisyQuantum,
}

impl FitKind {
    pub fn free_parameters(self) -> usize {
        match self {
            FitKind::Classical => 2,
            FitKind::Quantum => 3,
            FitKind::NoisyQuantum => 4,
        }
    }
}

/// Maximum-likelihood parameters of one response model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitFit {
    pub kind: FitKind,
    pub beta: f64,
    pub h_res0: f64,
    /// Transverse coefficient; 0 for the classical model.
    pub xi: f64,
    /// Residual-noise standard deviation; 0 below the noisy model.
    pub h_sd: f64,
    pub log_likelihood: f64,
}

impl SingleQubitFit {
    /// The fitted curve evaluated at one input field.
    pub fn predict(&self, h_in: f64) -> f64 {
        match self.kind {
            FitKind::Classical => h_out_classical(h_in, self.beta, self.h_res0),
            FitKind::Quantum => h_out_quantum(h_in, self.beta, self.h_res0, self.xi),
            FitKind::NoisyQuantum => {
                h_out_qnoise(h_in, self.beta, self.h_res0, self.xi, self.h_sd)
            }
        }
    }
}

/// Numerically stable `ln cosh`.
fn ln_cosh(x: f64) -> f64 {
    x.abs() + (-2.0 * x.abs()).exp().ln_1p() - std::f64::consts::LN_2
}

/// Bernoulli log-likelihood of a scan under a response model:
/// `Σ_points [ m̂·h_model − ln cosh(h_model) ]` with `m̂ = 2S/M − 1`.
/// Every point contributes with equal weight; saturated points enter with
/// `m̂ = ±1`.
pub fn log_likelihood(
    scan: &FieldScan,
    kind: FitKind,
    beta: f64,
    h_res0: f64,
    xi: f64,
    h_sd: f64,
) -> f64 {
    scan.points
        .iter()
        .map(|p| {
            let h_model = match kind {
                FitKind::Classical => h_out_classical(p.h_in, beta, h_res0),
                FitKind::Quantum => h_out_quantum(p.h_in, beta, h_res0, xi),
                FitKind::NoisyQuantum => h_out_qnoise(p.h_in, beta, h_res0, xi, h_sd),
            };
            p.magnetisation() * h_model - ln_cosh(h_model)
        })
        .sum()
}

/// Multi-start initial grid, bracketing all parameter regimes seen in
/// practice: β ∈ {5,10,15}, h_res0 ∈ {−0.02,0,0.02}, ξ ∈ {0,0.02},
/// h_sd ∈ {0,0.03,0.06}. Lower models use the applicable prefix.
const START_BETA: [f64; 3] = [5.0, 10.0, 15.0];
const START_RES: [f64; 3] = [-0.02, 0.0, 0.02];
const START_XI: [f64; 2] = [0.0, 0.02];
const START_SD: [f64; 3] = [0.0, 0.03, 0.06];

fn nm_fit(
    scan: &FieldScan,
    kind: FitKind,
    starts: &[Vec<f64>],
) -> Result<(Vec<f64>, f64), SingleQubitError> {
    // Sign constraints (β > 0, ξ ≥ 0, h_sd ≥ 0) are enforced by evaluating at
    // absolute values, which leaves the objective continuous.
    let objective = |raw: &[f64]| {
        let beta = raw[0].abs();
        let h_res0 = raw[1];
        let xi = if raw.len() > 2 { raw[2].abs() } else { 0.0 };
        let h_sd = if raw.len() > 3 { raw[3].abs() } else { 0.0 };
        -log_likelihood(scan, kind, beta, h_res0, xi, h_sd)
    };
    let steps: Vec<f64> = (0..kind.free_parameters())
        .map(|i| if i == 0 { 1.0 } else { 0.01 })
        .collect();
    let opts = NmOptions::with_steps(steps);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut any_converged = false;
    for start in starts {
        let first = nelder_mead(start, objective, &opts);
        // One restart from the found point shakes off collapsed simplexes.
        let second = nelder_mead(&first.x, objective, &opts);
        let (x, value, converged) = if second.value <= first.value {
            (second.x, second.value, second.converged || first.converged)
        } else {
            (first.x, first.value, first.converged || second.converged)
        };
        any_converged |= converged;
        if best.as_ref().map_or(true, |(_, bv)| value < *bv) {
            best = Some((x, value));
        }
    }
    if !any_converged {
        return Err(SingleQubitError::AllStartsFailed);
    }
    let (x, value) = best.expect("at least one start");
    Ok((x, -value))
}

/// Fits one response model to a scan by maximum likelihood.
///
/// Runs a deterministic multi-start simplex search over the documented grid,
/// augmented with starts seeded from the best fit of each simpler nested
/// model, which guarantees that the maximum log-likelihood is non-decreasing
/// along classical → quantum → noisy-quantum.
pub fn fit_scan(scan: &FieldScan, kind: FitKind) -> Result<SingleQubitFit, SingleQubitError> {
    let needed = (kind.free_parameters() + 1).max(3);
    let got = scan.non_saturated();
    if got < needed {
        return Err(SingleQubitError::TooFewPoints { needed, got });
    }

    // Classical starts and fit (always computed: it seeds the larger models).
    let classical_starts: Vec<Vec<f64>> = START_BETA
        .iter()
        .flat_map(|&b| START_RES.iter().map(move |&r| vec![b, r]))
        .collect();
    let (classical_x, classical_ll) = nm_fit(scan, FitKind::Classical, &classical_starts)?;
    if kind == FitKind::Classical {
        return Ok(SingleQubitFit {
            kind,
            beta: classical_x[0].abs(),
            h_res0: classical_x[1],
            xi: 0.0,
            h_sd: 0.0,
            log_likelihood: classical_ll,
        });
    }

    let mut quantum_starts: Vec<Vec<f64>> = START_BETA
        .iter()
        .flat_map(|&b| {
            START_RES
                .iter()
                .flat_map(move |&r| START_XI.iter().map(move |&x| vec![b, r, x]))
        })
        .collect();
    quantum_starts.push(vec![classical_x[0].abs(), classical_x[1], 0.0]);
    let (quantum_x, quantum_ll) = nm_fit(scan, FitKind::Quantum, &quantum_starts)?;
    if kind == FitKind::Quantum {
        return Ok(SingleQubitFit {
            kind,
            beta: quantum_x[0].abs(),
            h_res0: quantum_x[1],
            xi: quantum_x[2].abs(),
            h_sd: 0.0,
            log_likelihood: quantum_ll,
        });
    }

    let mut noisy_starts: Vec<Vec<f64>> = START_BETA
        .iter()
        .flat_map(|&b| {
            START_RES.iter().flat_map(move |&r| {
                START_XI
                    .iter()
                    .flat_map(move |&x| START_SD.iter().map(move |&sd| vec![b, r, x, sd]))
            })
        })
        .collect();
    noisy_starts.push(vec![quantum_x[0].abs(), quantum_x[1], quantum_x[2].abs(), 0.0]);
    noisy_starts.push(vec![classical_x[0].abs(), classical_x[1], 0.0, 0.0]);
    let (noisy_x, noisy_ll) = nm_fit(scan, FitKind::NoisyQuantum, &noisy_starts)?;
    Ok(SingleQubitFit {
        kind,
        beta: noisy_x[0].abs(),
        h_res0: noisy_x[1],
        xi: noisy_x[2].abs(),
        h_sd: noisy_x[3].abs(),
        log_likelihood: noisy_ll,
    })
}

/// Uniformly spaced grid of `n ≥ 2` points on `[lo, hi]`, endpoints included.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two grid points");
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Generates a synthetic scan: at each grid field the model curve gives the
/// positive-observation probability `(1 + tanh h_out)/2` and the count is a
/// binomial draw with `m` trials. Deterministic given the seed; grid points
/// are consumed in the order given.
pub fn synthetic_scan(
    kind: FitKind,
    beta: f64,
    h_res0: f64,
    xi: f64,
    h_sd: f64,
    grid: &[f64],
    m: u64,
    seed: u64,
) -> Result<FieldScan, SingleQubitError> {
    use rand::distributions::Distribution;
    let mut rng = stream_rng(seed, 0);
    let mut points = Vec::with_capacity(grid.len());
    for &h_in in grid {
        let h_out = match kind {
            FitKind::Classical => h_out_classical(h_in, beta, h_res0),
            FitKind::Quantum => h_out_quantum(h_in, beta, h_res0, xi),
            FitKind::NoisyQuantum => h_out_qnoise(h_in, beta, h_res0, xi, h_sd),
        };
        let p = (1.0 + h_out.tanh()) / 2.0;
        let binomial = rand_distr::Binomial::new(m, p).expect("probability in [0,1]");
        let s = binomial.sample(&mut rng);
        points.push(ScanPoint { h_in, s, m });
    }
    FieldScan::new(points)
}
