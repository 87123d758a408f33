//! Sampling from exact models, from noisy mixtures with per-sample field
//! noise, and under spin-reversal gauges; adapters for external black-box
//! samplers; the on-disk sample format.
//!
//! The central object is [`NoiseSpec`]: per-spin inverse temperatures `β_i`,
//! persistent biases `h_i^bias`, fast field-noise standard deviations
//! `h_i^sd`, and per-edge inverse temperatures `β_ij`. Conditioned on a noise
//! realization `s`, an order-≤2 input model `(h, J)` becomes the effective
//! model with fields `β_i (h_i^sd s_i + h_i^bias + h_i)` and couplings
//! `β_ij J_ij`; the observable output distribution is the equal-weight
//! mixture of the conditional distributions over noise realizations.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    exact_distribution, ExactDistribution, GibbsModel, ModelError, SpinConfig,
};
use crate::rng::{stream_rng, Rng};

/// Distribution family of the fast per-sample field noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `s_i = ±1` with equal probability; the mixture is an exact average
    /// over sign vectors.
    Binary,
    /// `s_i` uniform on `[−√3·h_i^sd, +√3·h_i^sd]` (same standard deviation
    /// as the binary kind); mixtures use Gauss–Legendre quadrature.
    Uniform,
}

/// Errors from sampling, mixtures, gauges, and sample-file I/O.
#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("noise spec field {field} has length {got}, expected {want}")]
    NoiseLength {
        field: &'static str,
        got: usize,
        want: usize,
    },
    #[error("inverse temperature must be positive, got {value} for {place}")]
    NonPositiveBeta { place: String, value: f64 },
    #[error("noise standard deviation must be non-negative and finite, got {value} for spin {spin}")]
    BadNoiseSd { spin: usize, value: f64 },
    #[error("bias must be finite, got {value} for spin {spin}")]
    BadBias { spin: usize, value: f64 },
    #[error("edge ({i}, {j}) endpoints must satisfy i < j < n_spins = {n_spins}")]
    BadEdge { i: usize, j: usize, n_spins: usize },
    #[error("input model has order {order}; the noisy effective model is defined for order ≤ 2")]
    InputOrderTooHigh { order: usize },
    #[error("input model has {got} spins but the noise spec covers {want}")]
    NoiseDimensionMismatch { got: usize, want: usize },
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("uniform-noise quadrature needs {nodes} evaluation nodes, above the supported limit")]
    QuadratureTooLarge { nodes: u128 },
    #[error("gauge vector has {got} entries, expected {want}")]
    GaugeDimensionMismatch { got: usize, want: usize },
    #[error("Monte-Carlo gauge averaging needs at least 2 gauges, got {got}")]
    TooFewGauges { got: usize },
    #[error("sample set must contain at least one observation")]
    EmptySampleSet,
    #[error("configuration bits {bits:#x} out of range for {n_spins} spins")]
    ConfigOutOfRange { bits: u64, n_spins: usize },
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed sample file {path}, line {line}: {message}")]
    SampleParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("sample file {path} declares total={declared} but lines sum to {observed}")]
    TotalMismatch {
        path: String,
        declared: u64,
        observed: u64,
    },
    #[error("black-box command produced {got} samples, requested {want}")]
    BlackboxCountMismatch { got: u64, want: u64 },
    #[error("black-box command produced samples on {got} spins, expected {want}")]
    BlackboxSpinMismatch { got: usize, want: usize },
    #[error("failed to launch black-box command {program}: {source}")]
    BlackboxSpawn {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("black-box command {program} exited with {status}; stderr: {stderr}")]
    BlackboxFailed {
        program: String,
        status: String,
        stderr: String,
    },
    #[error("black-box collection needs at least one batch")]
    NoBatches,
}

/// Per-spin and per-edge noise/temperature description of a sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    beta_field: Vec<f64>,
    h_bias: Vec<f64>,
    h_sd: Vec<f64>,
    beta_edge: BTreeMap<(usize, usize), f64>,
    beta_edge_default: f64,
    noise_kind: NoiseKind,
}

impl NoiseSpec {
    pub fn new(
        beta_field: Vec<f64>,
        h_bias: Vec<f64>,
        h_sd: Vec<f64>,
        beta_edge: BTreeMap<(usize, usize), f64>,
        beta_edge_default: f64,
        noise_kind: NoiseKind,
    ) -> Result<Self, SamplerError> {
        let n = beta_field.len();
        if h_bias.len() != n {
            return Err(SamplerError::NoiseLength {
                field: "h_bias",
                got: h_bias.len(),
                want: n,
            });
        }
        if h_sd.len() != n {
            return Err(SamplerError::NoiseLength {
                field: "h_sd",
                got: h_sd.len(),
                want: n,
            });
        }
        for (i, &b) in beta_field.iter().enumerate() {
            if !(b > 0.0) || !b.is_finite() {
                return Err(SamplerError::NonPositiveBeta {
                    place: format!("spin {i}"),
                    value: b,
                });
            }
        }
        for (i, &sd) in h_sd.iter().enumerate() {
            if !(sd >= 0.0) || !sd.is_finite() {
                return Err(SamplerError::BadNoiseSd { spin: i, value: sd });
            }
        }
        for (i, &b) in h_bias.iter().enumerate() {
            if !b.is_finite() {
                return Err(SamplerError::BadBias { spin: i, value: b });
            }
        }
        for (&(i, j), &b) in &beta_edge {
            if i >= j || j >= n {
                return Err(SamplerError::BadEdge { i, j, n_spins: n });
            }
            if !(b > 0.0) || !b.is_finite() {
                return Err(SamplerError::NonPositiveBeta {
                    place: format!("edge ({i}, {j})"),
                    value: b,
                });
            }
        }
        if !(beta_edge_default > 0.0) || !beta_edge_default.is_finite() {
            return Err(SamplerError::NonPositiveBeta {
                place: "default edge".to_string(),
                value: beta_edge_default,
            });
        }
        Ok(Self {
            beta_field,
            h_bias,
            h_sd,
            beta_edge,
            beta_edge_default,
            noise_kind,
        })
    }

    /// A noiseless spec: unit temperatures, zero biases and noise.
    pub fn noiseless(n_spins: usize) -> Self {
        Self::new(
            vec![1.0; n_spins],
            vec![0.0; n_spins],
            vec![0.0; n_spins],
            BTreeMap::new(),
            1.0,
            NoiseKind::Binary,
        )
        .expect("noiseless spec is always valid")
    }

    pub fn n_spins(&self) -> usize {
        self.beta_field.len()
    }

    pub fn beta_field(&self) -> &[f64] {
        &self.beta_field
    }

    pub fn h_bias(&self) -> &[f64] {
        &self.h_bias
    }

    pub fn h_sd(&self) -> &[f64] {
        &self.h_sd
    }

    pub fn noise_kind(&self) -> NoiseKind {
        self.noise_kind
    }

    /// Inverse temperature for edge `(i, j)` (either index order), falling
    /// back to the configured default when the edge is not listed.
    pub fn edge_beta(&self, i: usize, j: usize) -> f64 {
        let key = if i < j { (i, j) } else { (j, i) };
        self.beta_edge
            .get(&key)
            .copied()
            .unwrap_or(self.beta_edge_default)
    }

    /// Spins whose fast noise is active (`h_sd > 0`).
    fn noisy_spins(&self) -> Vec<usize> {
        (0..self.n_spins()).filter(|&i| self.h_sd[i] > 0.0).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeBetaEntry {
    i: usize,
    j: usize,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct NoiseFile {
    beta_field: Vec<f64>,
    h_bias: Vec<f64>,
    h_sd: Vec<f64>,
    beta_edge: Vec<EdgeBetaEntry>,
    beta_edge_default: f64,
    noise_kind: NoiseKind,
}

/// Serialises a noise spec to JSON.
pub fn noise_to_json(spec: &NoiseSpec) -> String {
    let file = NoiseFile {
        beta_field: spec.beta_field.clone(),
        h_bias: spec.h_bias.clone(),
        h_sd: spec.h_sd.clone(),
        beta_edge: spec
            .beta_edge
            .iter()
            .map(|(&(i, j), &beta)| EdgeBetaEntry { i, j, beta })
            .collect(),
        beta_edge_default: spec.beta_edge_default,
        noise_kind: spec.noise_kind,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("noise serialisation cannot fail");
    text.push('\n');
    text
}

/// Parses a noise spec from JSON, re-validating all invariants.
pub fn noise_from_json(text: &str, origin: &str) -> Result<NoiseSpec, SamplerError> {
    let file: NoiseFile = serde_json::from_str(text).map_err(|e| SamplerError::SampleParse {
        path: origin.to_string(),
        line: 0,
        message: format!("noise spec: {e}"),
    })?;
    let mut edges = BTreeMap::new();
    for entry in file.beta_edge {
        edges.insert((entry.i, entry.j), entry.beta);
    }
    NoiseSpec::new(
        file.beta_field,
        file.h_bias,
        file.h_sd,
        edges,
        file.beta_edge_default,
        file.noise_kind,
    )
}

pub fn read_noise<P: AsRef<Path>>(path: P) -> Result<NoiseSpec, SamplerError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SamplerError::Io {
        path: path.display().to_string(),
        source,
    })?;
    noise_from_json(&text, &path.display().to_string())
}

pub fn write_noise<P: AsRef<Path>>(spec: &NoiseSpec, path: P) -> Result<(), SamplerError> {
    let path = path.as_ref();
    std::fs::write(path, noise_to_json(spec)).map_err(|source| SamplerError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Observed ±1 configurations with multiplicities and provenance metadata.
///
/// Configurations are stored by their little-endian bit pattern (bit `i` set
/// ⇔ `σ_i = +1`), so iteration order is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n_spins: usize,
    counts: BTreeMap<u64, u64>,
    meta: BTreeMap<String, String>,
}

impl SampleSet {
    /// Builds a sample set from `(bit-pattern, count)` pairs. Counts must be
    /// ≥ 1 and the total positive.
    pub fn from_counts(
        n_spins: usize,
        counts: BTreeMap<u64, u64>,
    ) -> Result<Self, SamplerError> {
        if counts.is_empty() {
            return Err(SamplerError::EmptySampleSet);
        }
        for (&bits, &count) in &counts {
            if n_spins < 64 && bits >= (1u64 << n_spins) {
                return Err(SamplerError::ConfigOutOfRange { bits, n_spins });
            }
            if count == 0 {
                return Err(SamplerError::EmptySampleSet);
            }
        }
        Ok(Self {
            n_spins,
            counts,
            meta: BTreeMap::new(),
        })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Total number of observations `M`.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Distinct configurations with their counts, in bit-pattern order.
    pub fn counts(&self) -> &BTreeMap<u64, u64> {
        &self.counts
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn insert_meta(&mut self, key: &str, value: impl Into<String>) {
        self.meta.insert(key.to_string(), value.into());
    }

    /// Iterates `(SpinConfig, count)` pairs.
    pub fn iter_configs(&self) -> impl Iterator<Item = (SpinConfig, u64)> + '_ {
        self.counts
            .iter()
            .map(move |(&bits, &count)| (SpinConfig::from_index(bits as usize, self.n_spins), count))
    }

    /// True when configurations and counts agree (metadata is ignored).
    pub fn same_observations(&self, other: &SampleSet) -> bool {
        self.n_spins == other.n_spins && self.counts == other.counts
    }
}

/// Stable 64-bit FNV-1a content hash used for provenance metadata.
pub(crate) fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Hash of a model's canonical JSON form, for sample provenance.
pub fn model_hash(model: &GibbsModel) -> String {
    fnv1a_hex(crate::model::model_to_json(model).as_bytes())
}

// ---------------------------------------------------------------------------
// Effective models and mixtures
// ---------------------------------------------------------------------------

/// Effective model for explicit per-spin noise field values `r`:
/// fields `β_i (r_i + h_i^bias + h_i)`, couplings `β_ij J_ij`.
fn effective_model_with_noise_values(
    input: &GibbsModel,
    noise: &NoiseSpec,
    r: &[f64],
) -> Result<GibbsModel, SamplerError> {
    let n = noise.n_spins();
    if input.n_spins() != n {
        return Err(SamplerError::NoiseDimensionMismatch {
            got: input.n_spins(),
            want: n,
        });
    }
    if input.order() > 2 {
        return Err(SamplerError::InputOrderTooHigh {
            order: input.order(),
        });
    }
    debug_assert_eq!(r.len(), n);
    let mut model = GibbsModel::new(n)?;
    for i in 0..n {
        let field = noise.beta_field[i] * (r[i] + noise.h_bias[i] + input.term(&[i]));
        if field != 0.0 {
            model.set_term(&[i], field)?;
        }
    }
    for (key, value) in input.terms() {
        if key.len() == 2 {
            let coupled = noise.edge_beta(key[0], key[1]) * value;
            if coupled != 0.0 {
                model.set_term(key, coupled)?;
            }
        }
    }
    Ok(model)
}

/// Effective model conditioned on one binary noise realization `s ∈ {−1,+1}^n`:
/// fields `β_i (h_i^sd s_i + h_i^bias + h_i)`, couplings `β_ij J_ij`.
pub fn effective_noisy_model(
    input: &GibbsModel,
    noise: &NoiseSpec,
    noise_realization: &SpinConfig,
) -> Result<GibbsModel, SamplerError> {
    let n = noise.n_spins();
    if noise_realization.len() != n {
        return Err(SamplerError::GaugeDimensionMismatch {
            got: noise_realization.len(),
            want: n,
        });
    }
    let r: Vec<f64> = (0..n)
        .map(|i| noise.h_sd[i] * f64::from(noise_realization.values()[i]))
        .collect();
    effective_model_with_noise_values(input, noise, &r)
}

/// 16-point Gauss–Legendre abscissas (positive half) and weights on [−1, 1].
const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003_0,
    0.865_631_202_387_831_7,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_73,
    0.124_628_971_255_533_87,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_095,
];

/// Full 16-node rule on [−1, 1] with weights normalised to sum to 1
/// (i.e. quadrature against the *uniform density* on the interval).
pub(crate) fn gl16_nodes_unit() -> [(f64, f64); 16] {
    let mut nodes = [(0.0, 0.0); 16];
    for k in 0..8 {
        nodes[2 * k] = (-GL16_X[k], GL16_W[k] / 2.0);
        nodes[2 * k + 1] = (GL16_X[k], GL16_W[k] / 2.0);
    }
    nodes
}

/// The observable output distribution of the noisy sampler: the average of the
/// conditional exact distributions over noise realizations.
///
/// Binary noise averages exactly over all sign vectors of the noisy spins;
/// uniform noise uses a tensor-product 16-node Gauss–Legendre rule over
/// `[−√3·h_i^sd, +√3·h_i^sd]` per noisy spin.
pub fn noisy_mixture_distribution(
    input: &GibbsModel,
    noise: &NoiseSpec,
) -> Result<ExactDistribution, SamplerError> {
    let n = noise.n_spins();
    let noisy = noise.noisy_spins();
    let mut acc = vec![0.0f64; 1usize << input.n_spins()];
    match noise.noise_kind {
        NoiseKind::Binary => {
            let k = noisy.len();
            let patterns = 1usize << k;
            let weight = 1.0 / patterns as f64;
            let mut r = vec![0.0f64; n];
            for pattern in 0..patterns {
                for (bit, &spin) in noisy.iter().enumerate() {
                    let sign = if (pattern >> bit) & 1 == 1 { 1.0 } else { -1.0 };
                    r[spin] = sign * noise.h_sd[spin];
                }
                let conditional =
                    exact_distribution(&effective_model_with_noise_values(input, noise, &r)?)?;
                for (a, &p) in acc.iter_mut().zip(conditional.probs()) {
                    *a += weight * p;
                }
            }
        }
        NoiseKind::Uniform => {
            let k = noisy.len();
            let total_nodes = 16u128.saturating_pow(k as u32);
            if total_nodes > (1 << 24) {
                return Err(SamplerError::QuadratureTooLarge { nodes: total_nodes });
            }
            let nodes = gl16_nodes_unit();
            let mut r = vec![0.0f64; n];
            let mut digits = vec![0usize; k];
            let combos = total_nodes as usize;
            for combo in 0..combos.max(1) {
                let mut rem = combo;
                let mut weight = 1.0;
                for (d, &spin) in noisy.iter().enumerate() {
                    digits[d] = rem % 16;
                    rem /= 16;
                    let (x, w) = nodes[digits[d]];
                    r[spin] = 3.0f64.sqrt() * noise.h_sd[spin] * x;
                    weight *= w;
                }
                let conditional =
                    exact_distribution(&effective_model_with_noise_values(input, noise, &r)?)?;
                for (a, &p) in acc.iter_mut().zip(conditional.probs()) {
                    *a += weight * p;
                }
            }
        }
    }
    Ok(ExactDistribution::from_weights(input.n_spins(), &acc))
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Cumulative distribution table with the final entry pinned to exactly 1.
fn cdf_of(probs: &[f64]) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut run = 0.0;
    for &p in probs {
        run += p;
        cdf.push(run);
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

/// First index whose cumulative probability exceeds `u`.
#[inline]
fn draw_index(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Draws `m` i.i.d. configurations by inverse-CDF over the enumerated
/// probabilities, consuming one uniform variate per draw from `rng`.
pub fn sample_exact_with_rng(
    dist: &ExactDistribution,
    m: u64,
    rng: &mut Rng,
) -> Result<SampleSet, SamplerError> {
    if m == 0 {
        return Err(SamplerError::ZeroSamples);
    }
    let cdf = cdf_of(dist.probs());
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..m {
        let u: f64 = rng.gen();
        let idx = draw_index(&cdf, u) as u64;
        *counts.entry(idx).or_insert(0) += 1;
    }
    let mut set = SampleSet::from_counts(dist.n_spins(), counts)?;
    set.insert_meta("source", "exact");
    set.insert_meta("m", m.to_string());
    Ok(set)
}

/// Seeded wrapper around [`sample_exact_with_rng`] (stream 0 of `seed`).
pub fn sample_exact(
    dist: &ExactDistribution,
    m: u64,
    seed: u64,
) -> Result<SampleSet, SamplerError> {
    let mut rng = stream_rng(seed, 0);
    let mut set = sample_exact_with_rng(dist, m, &mut rng)?;
    set.insert_meta("seed", seed.to_string());
    Ok(set)
}

/// Draws `m` configurations from the noisy sampler: every draw first samples a
/// fresh noise realization, then one configuration from the conditional
/// distribution.
///
/// RNG consumption order per draw (pinned for reproducibility): one noise
/// variate per noisy spin in ascending spin order, then one uniform variate
/// for the configuration. Binary noise caches conditional CDF tables per sign
/// pattern, which changes cost but not output. The empirical distribution
/// converges to [`noisy_mixture_distribution`] as `m → ∞`.
pub fn sample_noisy_with_rng(
    input: &GibbsModel,
    noise: &NoiseSpec,
    m: u64,
    rng: &mut Rng,
) -> Result<SampleSet, SamplerError> {
    if m == 0 {
        return Err(SamplerError::ZeroSamples);
    }
    let n = noise.n_spins();
    let noisy = noise.noisy_spins();
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    match noise.noise_kind {
        NoiseKind::Binary => {
            let mut cache: HashMap<u64, Vec<f64>> = HashMap::new();
            let mut r = vec![0.0f64; n];
            for _ in 0..m {
                let mut pattern: u64 = 0;
                for (bit, &spin) in noisy.iter().enumerate() {
                    let up = rng.gen::<bool>();
                    if up {
                        pattern |= 1 << bit;
                    }
                    r[spin] = if up { noise.h_sd[spin] } else { -noise.h_sd[spin] };
                }
                if !cache.contains_key(&pattern) {
                    let conditional =
                        exact_distribution(&effective_model_with_noise_values(input, noise, &r)?)?;
                    cache.insert(pattern, cdf_of(conditional.probs()));
                }
                let cdf = &cache[&pattern];
                let u: f64 = rng.gen();
                *counts.entry(draw_index(cdf, u) as u64).or_insert(0) += 1;
            }
        }
        NoiseKind::Uniform => {
            let half_width = 3.0f64.sqrt();
            let mut r = vec![0.0f64; n];
            for _ in 0..m {
                for &spin in &noisy {
                    let u: f64 = rng.gen();
                    r[spin] = half_width * noise.h_sd[spin] * (2.0 * u - 1.0);
                }
                let conditional =
                    exact_distribution(&effective_model_with_noise_values(input, noise, &r)?)?;
                let cdf = cdf_of(conditional.probs());
                let u: f64 = rng.gen();
                *counts.entry(draw_index(&cdf, u) as u64).or_insert(0) += 1;
            }
        }
    }
    let mut set = SampleSet::from_counts(n, counts)?;
    set.insert_meta("source", "noisy");
    set.insert_meta(
        "noise_kind",
        match noise.noise_kind {
            NoiseKind::Binary => "binary",
            NoiseKind::Uniform => "uniform",
        },
    );
    set.insert_meta("m", m.to_string());
    set.insert_meta("input_model_hash", model_hash(input));
    Ok(set)
}

/// Seeded wrapper around [`sample_noisy_with_rng`] (stream 0 of `seed`).
pub fn sample_noisy(
    input: &GibbsModel,
    noise: &NoiseSpec,
    m: u64,
    seed: u64,
) -> Result<SampleSet, SamplerError> {
    let mut rng = stream_rng(seed, 0);
    let mut set = sample_noisy_with_rng(input, noise, m, &mut rng)?;
    set.insert_meta("seed", seed.to_string());
    Ok(set)
}

// ---------------------------------------------------------------------------
// Spin-reversal gauges
// ---------------------------------------------------------------------------

/// A gauge (spin-reversal) vector `τ ∈ {−1,+1}^n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GaugeVector {
    values: Vec<i8>,
}

impl GaugeVector {
    pub fn new(values: Vec<i8>) -> Result<Self, SamplerError> {
        for &v in &values {
            if v != 1 && v != -1 {
                return Err(SamplerError::GaugeDimensionMismatch {
                    got: values.len(),
                    want: values.len(),
                });
            }
        }
        Ok(Self { values })
    }

    /// Gauge whose entry `i` is −1 iff bit `i` of `mask` is set.
    pub fn from_flip_mask(mask: usize, n_spins: usize) -> Self {
        let values = (0..n_spins)
            .map(|i| if (mask >> i) & 1 == 1 { -1 } else { 1 })
            .collect();
        Self { values }
    }

    pub fn all_plus(n_spins: usize) -> Self {
        Self {
            values: vec![1; n_spins],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Bit mask with bit `i` set iff `τ_i = −1`; XOR-ing a configuration's
    /// bits with this mask applies `σ_i → σ_i τ_i`.
    pub fn flip_mask(&self) -> u64 {
        self.values
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &v)| if v == -1 { acc | (1 << i) } else { acc })
    }
}

/// Gauge-transforms a model: each term's coefficient is multiplied by
/// `Π_{i∈K} τ_i` (for fields `h_i → h_i τ_i`, for couplings
/// `J_ij → J_ij τ_i τ_j`; the same rule extends to higher orders).
pub fn apply_gauge(model: &GibbsModel, tau: &GaugeVector) -> Result<GibbsModel, SamplerError> {
    if tau.len() != model.n_spins() {
        return Err(SamplerError::GaugeDimensionMismatch {
            got: tau.len(),
            want: model.n_spins(),
        });
    }
    let mut out = GibbsModel::new(model.n_spins())?;
    for (key, value) in model.terms() {
        let mut sign = 1.0;
        for &i in key {
            sign *= f64::from(tau.values()[i]);
        }
        out.set_term(key, sign * value)?;
    }
    Ok(out)
}

/// Gauge-transforms samples: `σ_i → σ_i τ_i` for every observation.
pub fn apply_gauge_samples(
    samples: &SampleSet,
    tau: &GaugeVector,
) -> Result<SampleSet, SamplerError> {
    if tau.len() != samples.n_spins() {
        return Err(SamplerError::GaugeDimensionMismatch {
            got: tau.len(),
            want: samples.n_spins(),
        });
    }
    let mask = tau.flip_mask();
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for (&bits, &count) in samples.counts() {
        *counts.entry(bits ^ mask).or_insert(0) += count;
    }
    let mut out = SampleSet::from_counts(samples.n_spins(), counts)?;
    for (k, v) in samples.meta() {
        out.insert_meta(k, v.clone());
    }
    out.insert_meta("gauge_mask", format!("{mask:#x}"));
    Ok(out)
}

/// Options for [`srt_effective_distribution`].
#[derive(Debug, Clone)]
pub struct SrtOptions {
    /// Up to this many spins, all `2^n` gauges are enumerated exactly.
    pub cap_gauge: usize,
    /// Number of Monte-Carlo gauges above the cap.
    pub mc_gauges: usize,
    /// Seed for Monte-Carlo gauge draws (unused in the exact regime).
    pub seed: u64,
}

impl Default for SrtOptions {
    fn default() -> Self {
        Self {
            cap_gauge: 12,
            mc_gauges: 4096,
            seed: 0,
        }
    }
}

/// Result of gauge-averaged sampling.
#[derive(Debug, Clone)]
pub struct SrtResult {
    pub dist: ExactDistribution,
    /// Number of gauges entering the average.
    pub gauges_used: usize,
    /// True when all `2^n` gauges were enumerated.
    pub exact: bool,
    /// Largest per-configuration Monte-Carlo standard error (None when exact).
    pub max_std_error: Option<f64>,
}

/// The spin-reversal-averaged output distribution:
/// `P(σ) = avg_τ Q_τ(σ^τ)`, where `Q_τ` is the noisy mixture of the
/// gauge-transformed *input* model (hardware biases and noise are not gauged —
/// that asymmetry is the method's point) and `σ^τ` maps the observed
/// configuration back through the gauge.
///
/// Up to `cap_gauge` spins the average enumerates all `2^n` gauges exactly;
/// beyond that it draws `mc_gauges` gauges at random and reports the largest
/// per-configuration standard error.
pub fn srt_effective_distribution(
    input: &GibbsModel,
    noise: &NoiseSpec,
    opts: &SrtOptions,
) -> Result<SrtResult, SamplerError> {
    let n = input.n_spins();
    if noise.n_spins() != n {
        return Err(SamplerError::NoiseDimensionMismatch {
            got: n,
            want: noise.n_spins(),
        });
    }
    let states = 1usize << n;
    if n <= opts.cap_gauge {
        let gauges = 1usize << n;
        let mut acc = vec![0.0f64; states];
        for mask in 0..gauges {
            let tau = GaugeVector::from_flip_mask(mask, n);
            let q = noisy_mixture_distribution(&apply_gauge(input, &tau)?, noise)?;
            for (sigma, a) in acc.iter_mut().enumerate() {
                *a += q.probs()[sigma ^ mask];
            }
        }
        for a in &mut acc {
            *a /= gauges as f64;
        }
        Ok(SrtResult {
            dist: ExactDistribution::from_weights(n, &acc),
            gauges_used: gauges,
            exact: true,
            max_std_error: None,
        })
    } else {
        if opts.mc_gauges < 2 {
            return Err(SamplerError::TooFewGauges {
                got: opts.mc_gauges,
            });
        }
        let g = opts.mc_gauges;
        let mut rng = stream_rng(opts.seed, 0);
        let mut mean = vec![0.0f64; states];
        let mut m2 = vec![0.0f64; states];
        for draw in 0..g {
            let mask = (rng.gen::<u64>() as usize) & (states - 1);
            let tau = GaugeVector::from_flip_mask(mask, n);
            let q = noisy_mixture_distribution(&apply_gauge(input, &tau)?, noise)?;
            let k = (draw + 1) as f64;
            for (sigma, (mu, s)) in mean.iter_mut().zip(m2.iter_mut()).enumerate() {
                let x = q.probs()[sigma ^ mask];
                let delta = x - *mu;
                *mu += delta / k;
                *s += delta * (x - *mu);
            }
        }
        let max_se = m2
            .iter()
            .map(|&s| (s / (g as f64 - 1.0) / g as f64).sqrt())
            .fold(0.0f64, f64::max);
        Ok(SrtResult {
            dist: ExactDistribution::from_weights(n, &mean),
            gauges_used: g,
            exact: false,
            max_std_error: Some(max_se),
        })
    }
}

// ---------------------------------------------------------------------------
// Sample file format
// ---------------------------------------------------------------------------

/// Writes the counted sample format:
///
/// ```text
/// spins=<n> total=<M>
/// # key=value           (provenance metadata, optional)
/// <±1 string> <count>
/// ```
///
/// The configuration string has one `+`/`-` character per spin, spin 0
/// leftmost.
pub fn write_sample_file<P: AsRef<Path>>(set: &SampleSet, path: P) -> Result<(), SamplerError> {
    let path = path.as_ref();
    let mut text = String::new();
    let _ = writeln!(text, "spins={} total={}", set.n_spins(), set.total());
    for (k, v) in set.meta() {
        let _ = writeln!(text, "# {k}={v}");
    }
    for (config, count) in set.iter_configs() {
        let _ = writeln!(text, "{config} {count}");
    }
    std::fs::write(path, text).map_err(|source| SamplerError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_config_token(
    token: &str,
    path: &str,
    line_no: usize,
    expect_width: Option<usize>,
) -> Result<u64, SamplerError> {
    if let Some(w) = expect_width {
        if token.len() != w {
            return Err(SamplerError::SampleParse {
                path: path.to_string(),
                line: line_no,
                message: format!(
                    "configuration '{token}' has {} characters, expected {w}",
                    token.len()
                ),
            });
        }
    }
    let mut bits = 0u64;
    for (i, ch) in token.chars().enumerate() {
        match ch {
            '+' => bits |= 1 << i,
            '-' => {}
            other => {
                return Err(SamplerError::SampleParse {
                    path: path.to_string(),
                    line: line_no,
                    message: format!("unexpected character '{other}' in configuration"),
                })
            }
        }
    }
    Ok(bits)
}

/// Reads either sample format:
///
/// * counted — `spins=<n> total=<M>` header, then `<±1 string> <count>` lines;
/// * raw — one `±1` configuration string per line (each counting once).
///
/// Lines starting with `#` are metadata/comments in both forms; `key=value`
/// comments are preserved as metadata. Duplicate configuration lines
/// accumulate. In the counted form the declared total must match the sum of
/// counts.
pub fn read_sample_file<P: AsRef<Path>>(path: P) -> Result<SampleSet, SamplerError> {
    let path_ref = path.as_ref();
    let path_str = path_ref.display().to_string();
    let text = std::fs::read_to_string(path_ref).map_err(|source| SamplerError::Io {
        path: path_str.clone(),
        source,
    })?;
    parse_sample_text(&text, &path_str)
}

/// Parses sample text (see [`read_sample_file`]).
pub fn parse_sample_text(text: &str, origin: &str) -> Result<SampleSet, SamplerError> {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut meta: Vec<(String, String)> = Vec::new();
    let mut header: Option<(usize, u64)> = None;
    let mut width: Option<usize> = None;
    let mut saw_data = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((k, v)) = comment.split_once('=') {
                meta.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !saw_data && header.is_none() && line.starts_with("spins=") {
            let mut n_spins = None;
            let mut total = None;
            for part in line.split_whitespace() {
                if let Some(v) = part.strip_prefix("spins=") {
                    n_spins = v.parse::<usize>().ok();
                } else if let Some(v) = part.strip_prefix("total=") {
                    total = v.parse::<u64>().ok();
                }
            }
            match (n_spins, total) {
                (Some(n), Some(t)) if n > 0 => {
                    header = Some((n, t));
                    width = Some(n);
                }
                _ => {
                    return Err(SamplerError::SampleParse {
                        path: origin.to_string(),
                        line: line_no,
                        message: format!("malformed header '{line}'"),
                    })
                }
            }
            continue;
        }
        saw_data = true;
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line");
        let bits = parse_config_token(token, origin, line_no, width)?;
        if width.is_none() {
            width = Some(token.len());
        }
        let count = match parts.next() {
            Some(c) => {
                if header.is_none() {
                    return Err(SamplerError::SampleParse {
                        path: origin.to_string(),
                        line: line_no,
                        message: "count column present but no 'spins=.. total=..' header".into(),
                    });
                }
                c.parse::<u64>().map_err(|_| SamplerError::SampleParse {
                    path: origin.to_string(),
                    line: line_no,
                    message: format!("invalid count '{c}'"),
                })?
            }
            None => {
                if header.is_some() {
                    return Err(SamplerError::SampleParse {
                        path: origin.to_string(),
                        line: line_no,
                        message: "missing count column in counted format".into(),
                    });
                }
                1
            }
        };
        if count == 0 {
            return Err(SamplerError::SampleParse {
                path: origin.to_string(),
                line: line_no,
                message: "count must be at least 1".into(),
            });
        }
        if parts.next().is_some() {
            return Err(SamplerError::SampleParse {
                path: origin.to_string(),
                line: line_no,
                message: "trailing tokens after count".into(),
            });
        }
        *counts.entry(bits).or_insert(0) += count;
    }

    let n_spins = match (header, width) {
        (Some((n, _)), _) => n,
        (None, Some(w)) => w,
        (None, None) => {
            return Err(SamplerError::SampleParse {
                path: origin.to_string(),
                line: 0,
                message: "file contains no samples".into(),
            })
        }
    };
    let mut set = SampleSet::from_counts(n_spins, counts)?;
    if let Some((_, declared)) = header {
        let observed = set.total();
        if observed != declared {
            return Err(SamplerError::TotalMismatch {
                path: origin.to_string(),
                declared,
                observed,
            });
        }
    }
    for (k, v) in meta {
        set.insert_meta(&k, v);
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// Black-box adapter
// ---------------------------------------------------------------------------

/// An external sampler invoked per batch as
/// `<program> [extra_args..] --model <path> --num-reads <k> --out <path>`.
#[derive(Debug, Clone)]
pub struct BlackboxCommand {
    pub program: String,
    pub extra_args: Vec<String>,
    /// Extra environment for the child process.
    pub env: Vec<(String, String)>,
}

impl BlackboxCommand {
    pub fn new(program: impl Into<String>) -> Self {
        Self {
            program: program.into(),
            extra_args: Vec::new(),
            env: Vec::new(),
        }
    }
}

/// Collects samples from an external command in batches, validating spin
/// count and sample totals, and concatenating results with provenance.
///
/// When `base_seed` is given, batch `b` runs with `GIBBSPROBE_SEED` set to
/// `base_seed + b` so conforming samplers draw independent batches.
pub fn blackbox_collect(
    cmd: &BlackboxCommand,
    input: &GibbsModel,
    batches: &[u64],
    base_seed: Option<u64>,
) -> Result<SampleSet, SamplerError> {
    if batches.is_empty() {
        return Err(SamplerError::NoBatches);
    }
    if batches.iter().any(|&k| k == 0) {
        return Err(SamplerError::ZeroSamples);
    }
    let dir = tempfile::tempdir().map_err(|source| SamplerError::Io {
        path: "tempdir".to_string(),
        source,
    })?;
    let model_path = dir.path().join("model.json");
    crate::model::write_model(input, &model_path)?;

    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    let mut seeds_used: Vec<String> = Vec::new();
    for (b, &k) in batches.iter().enumerate() {
        let out_path = dir.path().join(format!("batch_{b}.samples"));
        let mut command = Command::new(&cmd.program);
        command
            .args(&cmd.extra_args)
            .arg("--model")
            .arg(&model_path)
            .arg("--num-reads")
            .arg(k.to_string())
            .arg("--out")
            .arg(&out_path);
        for (key, value) in &cmd.env {
            command.env(key, value);
        }
        if let Some(seed) = base_seed {
            let batch_seed = seed.wrapping_add(b as u64);
            command.env("GIBBSPROBE_SEED", batch_seed.to_string());
            seeds_used.push(batch_seed.to_string());
        }
        let output = command.output().map_err(|source| SamplerError::BlackboxSpawn {
            program: cmd.program.clone(),
            source,
        })?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let tail: String = stderr.chars().rev().take(400).collect::<Vec<_>>().iter().rev().collect();
            return Err(SamplerError::BlackboxFailed {
                program: cmd.program.clone(),
                status: output.status.to_string(),
                stderr: tail,
            });
        }
        let batch = read_sample_file(&out_path)?;
        if batch.n_spins() != input.n_spins() {
            return Err(SamplerError::BlackboxSpinMismatch {
                got: batch.n_spins(),
                want: input.n_spins(),
            });
        }
        if batch.total() != k {
            return Err(SamplerError::BlackboxCountMismatch {
                got: batch.total(),
                want: k,
            });
        }
        for (&bits, &count) in batch.counts() {
            *counts.entry(bits).or_insert(0) += count;
        }
    }
    let mut set = SampleSet::from_counts(input.n_spins(), counts)?;
    set.insert_meta("source", format!("blackbox:{}", cmd.program));
    set.insert_meta("batches", batches.len().to_string());
    set.insert_meta(
        "batch_sizes",
        batches
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    if !seeds_used.is_empty() {
        set.insert_meta("batch_seeds", seeds_used.join(","));
    }
    set.insert_meta("input_model_hash", model_hash(input));
    Ok(set)
}
