//! Embedded reference values for the reproduction pipelines.
//!
//! All numbers that `reproduce` targets compare against live in
//! `data/reference.json` (embedded at compile time), never in code, so the
//! expectations can be audited and adjusted in one place. Each block carries
//! a `source` string describing where its numbers come from.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::model::{GibbsModel, ModelError};
use crate::response::Roster;
use crate::sampler::{NoiseKind, NoiseSpec, SamplerError};

/// Calibrated parameters of the four-spin hardware cell.
#[derive(Debug, Clone, Deserialize)]
pub struct FourSpinCell {
    pub source: String,
    pub labels: Vec<String>,
    pub beta_field: Vec<f64>,
    pub h_bias: Vec<f64>,
    pub h_sd: Vec<f64>,
    pub edge_beta: Vec<EdgeBeta>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct EdgeBeta {
    pub edge: (usize, usize),
    pub beta: f64,
}

/// Reference linear self-response coefficients (effective temperatures).
#[derive(Debug, Clone, Deserialize)]
pub struct LinearSelfResponse {
    pub source: String,
    pub tolerance: f64,
    pub values: BTreeMap<String, f64>,
}

/// One reference quadratic susceptibility: the symmetric-convention χ entry
/// of `output` between inputs `input_a` and `input_b`.
#[derive(Debug, Clone, Deserialize)]
pub struct QuadraticEntry {
    pub output: String,
    pub input_a: String,
    pub input_b: String,
    pub value: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct QuadraticResponse {
    pub source: String,
    pub rel_tolerance: f64,
    pub abs_tolerance: f64,
    pub entries: Vec<QuadraticEntry>,
}

/// One significance-threshold scenario: a ferromagnet reference model and
/// the expected average-case 3σ threshold of the replicate protocol.
#[derive(Debug, Clone, Deserialize)]
pub struct ThresholdCase {
    pub name: String,
    pub n_spins: usize,
    /// Natural (temperature-absorbed) coupling on every listed edge.
    pub natural_coupling: f64,
    pub edges: Vec<(usize, usize)>,
    pub m: u64,
    pub replicates: usize,
    pub order: usize,
    pub threshold: f64,
}

impl ThresholdCase {
    /// Build the reference model: the listed edges at the natural coupling,
    /// zero fields.
    pub fn model(&self) -> Result<GibbsModel, ModelError> {
        GibbsModel::from_terms(
            self.n_spins,
            self.edges
                .iter()
                .map(|&(i, j)| (vec![i, j], self.natural_coupling)),
        )
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct SignificanceThresholds {
    pub source: String,
    pub rel_tolerance: f64,
    /// Sample count of the fast mode; the expected threshold rescales by
    /// `sqrt(m / reduced_m)`.
    pub reduced_m: u64,
    pub reduced_replicates: usize,
    pub cases: Vec<ThresholdCase>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ClassicalParams {
    pub beta: f64,
    pub h_res0: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NoisyQuantumParams {
    pub beta: f64,
    pub h_res0: f64,
    pub xi: f64,
    pub h_sd: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RefitSpec {
    pub scan_points: usize,
    pub scan_low: f64,
    pub scan_high: f64,
    pub m_per_point: u64,
    pub rel_tolerance_beta: f64,
    pub rel_tolerance_h_sd: f64,
    pub abs_tolerance_h_res0: f64,
    pub abs_tolerance_xi: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SingleQubitReference {
    pub source: String,
    pub label: String,
    pub classical: ClassicalParams,
    pub noisy_quantum: NoisyQuantumParams,
    pub refit: RefitSpec,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ErrorScaling {
    pub source: String,
    pub m_values: Vec<u64>,
    pub slope: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Bound {
    pub source: String,
    pub bound: f64,
}

/// The complete embedded reference set.
#[derive(Debug, Clone, Deserialize)]
pub struct Reference {
    pub four_spin_cell: FourSpinCell,
    pub linear_self_response: LinearSelfResponse,
    pub quadratic_response: QuadraticResponse,
    pub significance_thresholds: SignificanceThresholds,
    pub single_qubit_reference: SingleQubitReference,
    pub error_scaling: ErrorScaling,
    pub srt_means: Bound,
    pub oracle_grid: Bound,
}

const REFERENCE_JSON: &str = include_str!("../data/reference.json");

impl Reference {
    /// The embedded reference set, parsed once.
    pub fn embedded() -> &'static Reference {
        static PARSED: OnceLock<Reference> = OnceLock::new();
        PARSED.get_or_init(|| {
            serde_json::from_str(REFERENCE_JSON).expect("embedded reference data parses")
        })
    }

    /// The four-spin cell roster (labels plus native edges).
    pub fn four_spin_roster(&self) -> Roster {
        let cell = &self.four_spin_cell;
        Roster::new(
            cell.labels.clone(),
            cell.edge_beta.iter().map(|e| e.edge).collect(),
        )
        .expect("embedded roster is valid")
    }

    /// The calibrated noise specification of the four-spin cell.
    pub fn four_spin_noise(&self) -> Result<NoiseSpec, SamplerError> {
        let cell = &self.four_spin_cell;
        NoiseSpec::new(
            cell.beta_field.clone(),
            cell.h_bias.clone(),
            cell.h_sd.clone(),
            cell.edge_beta.iter().map(|e| (e.edge, e.beta)).collect(),
            cell.edge_beta
                .iter()
                .map(|e| e.beta)
                .fold(f64::NAN, f64::min)
                .max(1.0),
            NoiseKind::Binary,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_reference_parses_and_is_consistent() {
        let reference = Reference::embedded();
        let cell = &reference.four_spin_cell;
        assert_eq!(cell.labels, vec!["304", "308", "305", "309"]);
        assert_eq!(cell.beta_field.len(), 4);
        assert_eq!(cell.edge_beta.len(), 4);
        assert!(cell.h_sd.iter().all(|&sd| sd > 0.0));

        // Every reference output/input name must exist in the roster's
        // labelling, so comparisons can never silently miss.
        let roster = reference.four_spin_roster();
        let inputs = roster.input_labels();
        let outputs = roster.output_labels();
        for (name, &value) in &reference.linear_self_response.values {
            assert!(inputs.contains(name), "unknown input {name}");
            assert!(value > 0.0);
        }
        for entry in &reference.quadratic_response.entries {
            assert!(outputs.contains(&entry.output), "unknown output {}", entry.output);
            assert!(inputs.contains(&entry.input_a), "unknown input {}", entry.input_a);
            assert!(inputs.contains(&entry.input_b), "unknown input {}", entry.input_b);
            assert!(entry.value < 0.0, "reference susceptibilities are negative");
        }
        assert!(reference.four_spin_noise().is_ok());
    }

    #[test]
    fn threshold_case_models_build() {
        let reference = Reference::embedded();
        let cases = &reference.significance_thresholds.cases;
        assert_eq!(cases.len(), 2);
        let eight = cases.iter().find(|c| c.n_spins == 8).unwrap();
        assert_eq!(eight.edges.len(), 16);
        assert_eq!(eight.order, 8);
        let model = eight.model().unwrap();
        assert_eq!(model.term(&[0, 4]), eight.natural_coupling);
        assert_eq!(model.term(&[0]), 0.0);

        let four = cases.iter().find(|c| c.n_spins == 4).unwrap();
        assert_eq!(four.edges.len(), 4);
        assert_eq!(four.order, 2);
        assert!(four.model().is_ok());
    }

    #[test]
    fn scaling_and_bounds_are_sane() {
        let reference = Reference::embedded();
        assert_eq!(reference.error_scaling.m_values.len(), 4);
        assert!(reference.error_scaling.slope < 0.0);
        assert!(reference.srt_means.bound <= 1e-12);
        assert!(reference.oracle_grid.bound <= 1e-9);
        let refit = &reference.single_qubit_reference.refit;
        assert!(refit.scan_points >= 5);
        assert!(refit.scan_low < refit.scan_high);
    }
}
