//! gibbsprobe — model black-box binary samplers as noisy Gibbs distributions.
//!
//! The crate treats a sampler over ±1 configurations as a Gibbs distribution
//! `μ(σ) ∝ exp(H(σ))` whose effective parameters may be distorted by
//! per-sample field noise, persistent biases, and per-parameter inverse
//! temperatures. It provides:
//!
//! * [`model`] — sparse multi-body energy functions, exact enumeration, and
//!   the JSON model format;
//! * [`sampler`] — exact and noisy-mixture sampling, spin-reversal gauges,
//!   black-box sampler adapters, and the sample-file format;
//! * [`learn`] — interaction-screening reconstruction of models of a chosen
//!   order from samples or exact weights;
//! * [`error_est`] — the replicate protocol for finite-sample reconstruction
//!   error and significance thresholds;
//! * [`single_qubit`] — single-spin output-field estimation with exact
//!   binomial confidence intervals and maximum-likelihood response-curve fits;
//! * [`response`] — quadratic input→output response surfaces and the
//!   simulated response pipeline;
//! * [`oracle`] — closed-form predictions for noise-induced effective fields
//!   and spurious couplings, used as independent cross-checks;
//! * [`cli`] — the `gibbsprobe` command-line surface.
//!
//! Everything stochastic is driven by explicit 64-bit seeds through
//! counter-based streams ([`rng`]), so results are reproducible bit-for-bit
//! regardless of thread count.

pub mod cli;
pub mod error_est;
pub mod learn;
pub mod model;
mod numeric;
pub mod optim;
pub mod oracle;
pub mod reference;
pub mod response;
pub mod rng;
pub mod sampler;
pub mod single_qubit;

pub use model::{
    exact_distribution, exact_distribution_capped, read_model, write_model, ExactDistribution,
    GibbsModel, ModelError, SpinConfig, DEFAULT_ENUM_CAP,
};
pub use sampler::{
    apply_gauge, apply_gauge_samples, blackbox_collect, noisy_mixture_distribution, read_noise,
    read_sample_file, sample_exact, sample_noisy, srt_effective_distribution, write_noise,
    write_sample_file, BlackboxCommand, GaugeVector, NoiseKind, NoiseSpec, SampleSet,
    SamplerError, SrtOptions, SrtResult,
};
