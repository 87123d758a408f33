//! Multi-body Gibbs models over ±1 spins, exact enumeration, and the on-disk
//! model format.
//!
//! A [`GibbsModel`] is a sparse polynomial energy function
//! `H(σ) = Σ_K c_K · Π_{i∈K} σ_i` over spins `σ_i ∈ {−1,+1}`, where each key
//! `K` is a sorted, duplicate-free tuple of spin indices. The associated
//! distribution is `μ(σ) ∝ exp(+H(σ))`; inverse temperatures are *not* part of
//! this type (they belong to the sampler's noise specification), so a "hot" or
//! "cold" model is expressed directly through the magnitude of its
//! coefficients.
//!
//! Configurations are indexed little-endian: bit `i` of the index is set iff
//! `σ_i = +1`. This convention is pinned by tests and shared by the sampler
//! and the learners.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest spin count for which exhaustive state enumeration is allowed by
/// default (2^20 ≈ 10^6 states).
pub const DEFAULT_ENUM_CAP: usize = 20;

/// Errors arising from model construction, evaluation, and file I/O.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model must have at least one spin")]
    ZeroSpins,
    #[error("term key must contain at least one spin index")]
    EmptyKey,
    #[error("term key {key:?} must be strictly increasing (sorted, no duplicates)")]
    UnsortedKey { key: Vec<usize> },
    #[error("spin index {index} out of range for a model on {n_spins} spins")]
    IndexOutOfRange { index: usize, n_spins: usize },
    #[error("coefficient for key {key:?} is not finite: {value}")]
    NonFiniteCoefficient { key: Vec<usize>, value: f64 },
    #[error("duplicate term key {key:?} in model description")]
    DuplicateKey { key: Vec<usize> },
    #[error("configuration has {got} spins but the model has {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("spin value at index {index} must be +1 or -1, got {got}")]
    NotASpin { index: usize, got: i8 },
    #[error("{n_spins} spins exceeds the enumeration cap of {cap}")]
    EnumerationCapExceeded { n_spins: usize, cap: usize },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse model file {path}: {message}")]
    Parse { path: String, message: String },
}

/// A configuration of `n` spins, each exactly +1 or −1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpinConfig {
    values: Vec<i8>,
}

impl SpinConfig {
    /// Validates that every entry is ±1.
    pub fn new(values: Vec<i8>) -> Result<Self, ModelError> {
        for (index, &v) in values.iter().enumerate() {
            if v != 1 && v != -1 {
                return Err(ModelError::NotASpin { index, got: v });
            }
        }
        Ok(Self { values })
    }

    /// Decodes a configuration index: bit `i` set ⇔ `σ_i = +1`.
    pub fn from_index(index: usize, n_spins: usize) -> Self {
        let values = (0..n_spins)
            .map(|i| if (index >> i) & 1 == 1 { 1 } else { -1 })
            .collect();
        Self { values }
    }

    /// Encodes this configuration back into its index.
    pub fn to_index(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &v)| if v == 1 { acc | (1 << i) } else { acc })
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
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &v in &self.values {
            f.write_str(if v == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Sparse multi-body energy function over `n_spins` binary spins.
///
/// Keys are strictly increasing index tuples; a missing key has coefficient 0.
/// The *order* of the model is the length of its longest key.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsModel {
    n_spins: usize,
    terms: BTreeMap<Vec<usize>, f64>,
}

impl GibbsModel {
    pub fn new(n_spins: usize) -> Result<Self, ModelError> {
        if n_spins == 0 {
            return Err(ModelError::ZeroSpins);
        }
        Ok(Self {
            n_spins,
            terms: BTreeMap::new(),
        })
    }

    /// Builds a model from `(key, coefficient)` pairs, validating every key.
    pub fn from_terms<I>(n_spins: usize, terms: I) -> Result<Self, ModelError>
    where
        I: IntoIterator<Item = (Vec<usize>, f64)>,
    {
        let mut model = Self::new(n_spins)?;
        for (key, value) in terms {
            if model.terms.contains_key(&key) {
                return Err(ModelError::DuplicateKey { key });
            }
            model.set_term(&key, value)?;
        }
        Ok(model)
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    /// Length of the longest key, or 0 for an empty model.
    pub fn order(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// Coefficient for `key` (0 when the key is absent).
    pub fn term(&self, key: &[usize]) -> f64 {
        self.terms.get(key).copied().unwrap_or(0.0)
    }

    /// Iterates terms in sorted key order.
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Inserts or overwrites one term after validating the key and value.
    pub fn set_term(&mut self, key: &[usize], value: f64) -> Result<(), ModelError> {
        validate_key(key, self.n_spins)?;
        if !value.is_finite() {
            return Err(ModelError::NonFiniteCoefficient {
                key: key.to_vec(),
                value,
            });
        }
        self.terms.insert(key.to_vec(), value);
        Ok(())
    }

    /// Energy `H(σ) = Σ_K c_K Π_{i∈K} σ_i` of a configuration.
    pub fn energy(&self, config: &SpinConfig) -> Result<f64, ModelError> {
        if config.len() != self.n_spins {
            return Err(ModelError::DimensionMismatch {
                got: config.len(),
                want: self.n_spins,
            });
        }
        let mut total = 0.0;
        for (key, value) in &self.terms {
            let mut product = 1.0;
            for &i in key {
                product *= f64::from(config.values[i]);
            }
            total += value * product;
        }
        Ok(total)
    }

    /// Energy of the configuration with the given little-endian index.
    ///
    /// Uses bit tricks instead of materialising a [`SpinConfig`]; the sign of
    /// `Π_{i∈K} σ_i` is −1 iff the number of *unset* bits of the index within
    /// the key's mask is odd.
    pub fn energy_of_index(&self, index: usize) -> f64 {
        let mut total = 0.0;
        for (key, value) in &self.terms {
            let mut mask = 0usize;
            for &i in key {
                mask |= 1 << i;
            }
            let sign = if ((!index) & mask).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            total += value * sign;
        }
        total
    }

    /// Precomputes `(bitmask, coefficient)` pairs for fast repeated energy
    /// evaluation (used by the enumeration and sampling hot paths).
    pub(crate) fn masked_terms(&self) -> Vec<(usize, f64)> {
        self.terms
            .iter()
            .map(|(key, &value)| {
                let mut mask = 0usize;
                for &i in key {
                    mask |= 1 << i;
                }
                (mask, value)
            })
            .collect()
    }
}

pub(crate) fn validate_key(key: &[usize], n_spins: usize) -> Result<(), ModelError> {
    if key.is_empty() {
        return Err(ModelError::EmptyKey);
    }
    for window in key.windows(2) {
        if window[0] >= window[1] {
            return Err(ModelError::UnsortedKey { key: key.to_vec() });
        }
    }
    let last = *key.last().expect("non-empty");
    if last >= n_spins {
        return Err(ModelError::IndexOutOfRange {
            index: last,
            n_spins,
        });
    }
    Ok(())
}

/// Sign of `Π_{i∈K} σ_i` for the configuration with the given index, where the
/// key is encoded as a bitmask.
#[inline]
pub(crate) fn spin_product_sign(index: usize, mask: usize) -> f64 {
    if ((!index) & mask).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Fully enumerated distribution over the `2^n` configurations of a model.
///
/// `probs[c]` is the probability of the configuration with little-endian
/// index `c`. For distributions built from a single Gibbs model,
/// `probs[c] = exp(H(c) − log_partition)`. For mixture-built distributions the
/// partition function of a single model does not exist; `log_partition` then
/// records the log of the normalisation applied to the averaged weights
/// (≈ 0 for averages of already-normalised distributions).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactDistribution {
    n_spins: usize,
    probs: Vec<f64>,
    log_partition: f64,
}

impl ExactDistribution {
    /// Normalises `exp(energies)` with a max-shift for overflow safety.
    pub fn from_energies(n_spins: usize, energies: &[f64]) -> Self {
        assert_eq!(energies.len(), 1 << n_spins, "energy table has wrong size");
        let max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = energies.iter().map(|&e| (e - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        Self {
            n_spins,
            probs,
            log_partition: max + sum.ln(),
        }
    }

    /// Normalises a vector of non-negative weights into a distribution.
    ///
    /// `log_partition` records `ln(Σ weights)`.
    pub fn from_weights(n_spins: usize, weights: &[f64]) -> Self {
        assert_eq!(weights.len(), 1 << n_spins, "weight table has wrong size");
        let sum: f64 = weights.iter().sum();
        assert!(sum > 0.0 && sum.is_finite(), "weights must sum to a positive finite value");
        let probs = weights.iter().map(|&w| w / sum).collect();
        Self {
            n_spins,
            probs,
            log_partition: sum.ln(),
        }
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// First moment `⟨σ_i⟩`.
    pub fn mean_spin(&self, i: usize) -> f64 {
        assert!(i < self.n_spins);
        let mask = 1usize << i;
        self.probs
            .iter()
            .enumerate()
            .map(|(c, &p)| p * spin_product_sign(c, mask))
            .sum()
    }

    /// Moment `⟨Π_{i∈K} σ_i⟩` for a sorted key.
    pub fn moment(&self, key: &[usize]) -> Result<f64, ModelError> {
        validate_key(key, self.n_spins)?;
        let mut mask = 0usize;
        for &i in key {
            mask |= 1 << i;
        }
        Ok(self
            .probs
            .iter()
            .enumerate()
            .map(|(c, &p)| p * spin_product_sign(c, mask))
            .sum())
    }
}

/// Enumerates all configurations of `model` with the default cap.
pub fn exact_distribution(model: &GibbsModel) -> Result<ExactDistribution, ModelError> {
    exact_distribution_capped(model, DEFAULT_ENUM_CAP)
}

/// Enumerates all configurations of `model`, refusing above `cap` spins.
pub fn exact_distribution_capped(
    model: &GibbsModel,
    cap: usize,
) -> Result<ExactDistribution, ModelError> {
    let n = model.n_spins();
    if n > cap {
        return Err(ModelError::EnumerationCapExceeded { n_spins: n, cap });
    }
    let masked = model.masked_terms();
    let energies: Vec<f64> = (0..(1usize << n))
        .map(|c| {
            masked
                .iter()
                .map(|&(mask, value)| value * spin_product_sign(c, mask))
                .sum()
        })
        .collect();
    Ok(ExactDistribution::from_energies(n, &energies))
}

#[derive(Serialize, Deserialize)]
struct TermEntry {
    spins: Vec<usize>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    n_spins: usize,
    terms: Vec<TermEntry>,
}

/// Serialises a model to the JSON document format:
/// `{"n_spins": n, "terms": [{"spins": [..], "value": v}, ..]}`.
pub fn model_to_json(model: &GibbsModel) -> String {
    let file = ModelFile {
        n_spins: model.n_spins(),
        terms: model
            .terms()
            .map(|(key, value)| TermEntry {
                spins: key.clone(),
                value,
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serialisation cannot fail");
    text.push('\n');
    text
}

/// Parses a model from its JSON document form, rejecting (rather than
/// repairing) unsorted keys, duplicate keys, and out-of-range indices.
pub fn model_from_json(text: &str, origin: &str) -> Result<GibbsModel, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| ModelError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    let mut model = GibbsModel::new(file.n_spins)?;
    for (entry_index, entry) in file.terms.into_iter().enumerate() {
        if model.terms.contains_key(&entry.spins) {
            return Err(ModelError::Parse {
                path: origin.to_string(),
                message: format!(
                    "terms[{entry_index}]: duplicate key {:?}",
                    entry.spins
                ),
            });
        }
        model
            .set_term(&entry.spins, entry.value)
            .map_err(|e| ModelError::Parse {
                path: origin.to_string(),
                message: format!("terms[{entry_index}]: {e}"),
            })?;
    }
    Ok(model)
}

/// Reads a model file (see [`model_from_json`] for the format).
pub fn read_model<P: AsRef<Path>>(path: P) -> Result<GibbsModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    model_from_json(&text, &path.display().to_string())
}

/// Writes a model file (see [`model_to_json`] for the format).
pub fn write_model<P: AsRef<Path>>(model: &GibbsModel, path: P) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn energy_of_empty_model_is_zero() {
        let model = GibbsModel::new(3).unwrap();
        let config = SpinConfig::new(vec![1, -1, 1]).unwrap();
        assert_eq!(model.energy(&config).unwrap(), 0.0);
    }

    #[test]
    fn energy_of_single_field_term() {
        let model = GibbsModel::from_terms(1, vec![(vec![0], 0.5)]).unwrap();
        let config = SpinConfig::new(vec![1]).unwrap();
        assert_eq!(model.energy(&config).unwrap(), 0.5);
    }

    #[test]
    fn energy_of_pair_term_multiplies_signs() {
        let model = GibbsModel::from_terms(2, vec![(vec![0, 1], 0.025)]).unwrap();
        let config = SpinConfig::new(vec![1, -1]).unwrap();
        assert_eq!(model.energy(&config).unwrap(), -0.025);
    }

    #[test]
    fn energy_rejects_dimension_mismatch() {
        let model = GibbsModel::new(3).unwrap();
        let config = SpinConfig::new(vec![1, -1]).unwrap();
        assert!(matches!(
            model.energy(&config),
            Err(ModelError::DimensionMismatch { got: 2, want: 3 })
        ));
    }

    #[test]
    fn energy_of_index_matches_energy_of_config() {
        let model = GibbsModel::from_terms(
            4,
            vec![
                (vec![0], 0.3),
                (vec![1, 3], -0.7),
                (vec![0, 1, 2], 0.11),
                (vec![0, 1, 2, 3], -0.05),
            ],
        )
        .unwrap();
        for c in 0..16 {
            let config = SpinConfig::from_index(c, 4);
            assert_abs_diff_eq!(
                model.energy(&config).unwrap(),
                model.energy_of_index(c),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn config_index_roundtrip_is_little_endian() {
        let config = SpinConfig::from_index(0b0101, 4);
        assert_eq!(config.values(), &[1, -1, 1, -1]);
        assert_eq!(config.to_index(), 0b0101);
    }

    #[test]
    fn zero_model_gives_uniform_distribution() {
        let model = GibbsModel::new(2).unwrap();
        let dist = exact_distribution(&model).unwrap();
        for &p in dist.probs() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_spin_distribution_matches_tanh_closed_form() {
        for &h in &[-2.0, -0.5, 0.0, 0.3, 1.7] {
            let model = GibbsModel::from_terms(1, vec![(vec![0], h)]).unwrap();
            let dist = exact_distribution(&model).unwrap();
            // index 1 has bit 0 set, i.e. σ_0 = +1
            assert_abs_diff_eq!(dist.probs()[1], (1.0 + h.tanh()) / 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn three_spin_chain_matches_direct_summation() {
        let model =
            GibbsModel::from_terms(3, vec![(vec![0, 1], 0.3), (vec![1, 2], -0.2)]).unwrap();
        let dist = exact_distribution(&model).unwrap();

        // Independent brute force: direct triple loop over ±1 values.
        let mut weights = vec![0.0f64; 8];
        let mut z = 0.0;
        for (c, w) in weights.iter_mut().enumerate() {
            let s: Vec<f64> = (0..3)
                .map(|i| if (c >> i) & 1 == 1 { 1.0 } else { -1.0 })
                .collect();
            *w = (0.3 * s[0] * s[1] - 0.2 * s[1] * s[2]).exp();
            z += *w;
        }
        for c in 0..8 {
            assert_abs_diff_eq!(dist.probs()[c], weights[c] / z, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(dist.log_partition(), z.ln(), epsilon = 1e-12);
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let model = GibbsModel::new(21).unwrap();
        assert!(matches!(
            exact_distribution(&model),
            Err(ModelError::EnumerationCapExceeded { n_spins: 21, cap: 20 })
        ));
        assert!(exact_distribution_capped(&GibbsModel::new(4).unwrap(), 3).is_err());
    }

    #[test]
    fn log_partition_equals_direct_sum_up_to_ten_spins() {
        let mut model = GibbsModel::new(10).unwrap();
        for i in 0..10 {
            model.set_term(&[i], 0.1 * (i as f64) - 0.4).unwrap();
        }
        for i in 0..9 {
            model.set_term(&[i, i + 1], 0.2).unwrap();
        }
        let dist = exact_distribution(&model).unwrap();
        let direct: f64 = (0..(1usize << 10))
            .map(|c| model.energy_of_index(c).exp())
            .sum();
        assert!(
            (dist.log_partition().exp() - direct).abs() / direct < 1e-12,
            "partition function mismatch"
        );
    }

    #[test]
    fn probabilities_sum_to_one() {
        let model = GibbsModel::from_terms(5, vec![(vec![0, 4], 3.0), (vec![2], -2.0)]).unwrap();
        let dist = exact_distribution(&model).unwrap();
        let total: f64 = dist.probs().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn global_spin_flip_reverses_probabilities() {
        // Negating all odd-order coefficients equals the σ → −σ relabelling,
        // which in index space is bit complement.
        let model = GibbsModel::from_terms(
            4,
            vec![
                (vec![0], 0.4),
                (vec![2], -0.3),
                (vec![0, 1], 0.25),
                (vec![1, 2, 3], 0.15),
            ],
        )
        .unwrap();
        let mut flipped = GibbsModel::new(4).unwrap();
        for (key, value) in model.terms() {
            let v = if key.len() % 2 == 1 { -value } else { value };
            flipped.set_term(key, v).unwrap();
        }
        let dist = exact_distribution(&model).unwrap();
        let dist_flipped = exact_distribution(&flipped).unwrap();
        let full = 15usize;
        for c in 0..16 {
            assert_abs_diff_eq!(
                dist.probs()[c],
                dist_flipped.probs()[c ^ full],
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn uniform_energy_offset_changes_only_the_partition_function() {
        let model = GibbsModel::from_terms(3, vec![(vec![0, 1], 0.5), (vec![2], -0.2)]).unwrap();
        let base = exact_distribution(&model).unwrap();
        let offset = 1.7;
        let shifted_energies: Vec<f64> = (0..8).map(|c| model.energy_of_index(c) + offset).collect();
        let shifted = ExactDistribution::from_energies(3, &shifted_energies);
        for c in 0..8 {
            assert_abs_diff_eq!(base.probs()[c], shifted.probs()[c], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(
            shifted.log_partition(),
            base.log_partition() + offset,
            epsilon = 1e-12
        );
    }

    #[test]
    fn model_json_roundtrip_preserves_terms() {
        let model = GibbsModel::from_terms(
            6,
            vec![
                (vec![0], 0.123456789012345),
                (vec![1, 4], -3.5e-7),
                (vec![0, 2, 5], 42.0),
            ],
        )
        .unwrap();
        let text = model_to_json(&model);
        let back = model_from_json(&text, "inline").unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn model_file_roundtrip_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let model = GibbsModel::from_terms(2, vec![(vec![0, 1], 0.025)]).unwrap();
        write_model(&model, &path).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn reader_rejects_duplicate_keys() {
        let text = r#"{"n_spins": 2, "terms": [
            {"spins": [0, 1], "value": 0.1},
            {"spins": [0, 1], "value": 0.2}
        ]}"#;
        let err = model_from_json(text, "inline").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "got: {err}");
    }

    #[test]
    fn reader_rejects_out_of_range_index() {
        let text = r#"{"n_spins": 2, "terms": [{"spins": [0, 2], "value": 0.1}]}"#;
        let err = model_from_json(text, "inline").unwrap_err();
        assert!(err.to_string().contains("out of range"), "got: {err}");
    }

    #[test]
    fn reader_rejects_unsorted_keys() {
        for bad in [
            r#"{"n_spins": 3, "terms": [{"spins": [2, 0], "value": 0.1}]}"#,
            r#"{"n_spins": 3, "terms": [{"spins": [1, 1], "value": 0.1}]}"#,
        ] {
            let err = model_from_json(bad, "inline").unwrap_err();
            assert!(
                err.to_string().contains("strictly increasing"),
                "got: {err}"
            );
        }
    }

    #[test]
    fn reader_rejects_malformed_json_with_context() {
        let err = model_from_json("{\"n_spins\": 2,", "somefile.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("somefile.json"), "got: {msg}");
    }

    #[test]
    fn set_term_validates_values_and_keys() {
        let mut model = GibbsModel::new(3).unwrap();
        assert!(model.set_term(&[0, 1], f64::NAN).is_err());
        assert!(model.set_term(&[], 1.0).is_err());
        assert!(model.set_term(&[1, 0], 1.0).is_err());
        assert!(model.set_term(&[3], 1.0).is_err());
        assert!(model.set_term(&[0, 1, 2], 1.0).is_ok());
        assert_eq!(model.order(), 3);
        assert_eq!(model.term(&[0, 1]), 0.0);
    }

    #[test]
    fn moments_match_hand_computation_on_single_spin() {
        let h = 0.8;
        let model = GibbsModel::from_terms(1, vec![(vec![0], h)]).unwrap();
        let dist = exact_distribution(&model).unwrap();
        assert_abs_diff_eq!(dist.mean_spin(0), h.tanh(), epsilon = 1e-14);
        assert_abs_diff_eq!(dist.moment(&[0]).unwrap(), h.tanh(), epsilon = 1e-14);
    }
}
