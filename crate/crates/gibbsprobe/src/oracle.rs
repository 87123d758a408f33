//! Closed-form reference values ("oracles") for noise-induced effective
//! interactions, plus the brute-force counterparts they are checked against.
//!
//! Two toy motifs admit exact formulas:
//!
//! * **Two-spin motif** — spins 0 and 1 joined by a coupling `J`; spin 0
//!   carries a fast binary field fluctuation of amplitude `h_sd1`, spin 1 a
//!   constant field `h2`. Averaging the Gibbs distribution over the noise
//!   produces an effective *field* on spin 0.
//! * **Three-spin chain** — couplings `J12` (spins 0–1) and `J23` (spins 1–2);
//!   the end spins carry binary field fluctuations `h_sd1`, `h_sd3`.
//!   Averaging produces an effective *coupling* between the end spins.
//!
//! Both responses are negative for positive inputs, odd in each coupling or
//! field factor, and even in every noise amplitude. The closed forms here are
//! pure arithmetic with no dependency on the learner, so agreement with the
//! mixture-enumeration + screening-learner pipeline is a genuine two-sided
//! check. Larger systems (the four-spin case) have no closed form and are
//! handled by [`four_spin_effective`], which composes the exact mixture with
//! order-2 learning.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{learn_model, LearnConfig, LearnError, WeightedData};
use crate::model::{GibbsModel, ModelError};
use crate::numeric::atanh_stable;
use crate::sampler::{noisy_mixture_distribution, NoiseKind, NoiseSpec, SamplerError};

/// Errors from oracle construction or the brute-force comparison pipeline.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("inverse temperature must be a positive finite number, got {value}")]
    BadBeta { value: f64 },
    #[error("noise amplitude must be a finite number >= 0, got {value}")]
    BadNoiseSd { value: f64 },
    #[error("parameter {name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("expected a model on {want} spins, got {got}")]
    WrongSpinCount { got: usize, want: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

fn check_finite(name: &'static str, value: f64) -> Result<(), OracleError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(OracleError::NonFinite { name, value })
    }
}

fn check_beta(value: f64) -> Result<(), OracleError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(OracleError::BadBeta { value })
    }
}

fn check_sd(value: f64) -> Result<(), OracleError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(OracleError::BadNoiseSd { value })
    }
}

/// Two-spin motif: coupling `j` between the spins, binary field noise of
/// amplitude `h_sd1` on spin 0, constant field `h2` on spin 1, uniform
/// inverse temperature `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToySpec2 {
    pub j: f64,
    pub h2: f64,
    pub h_sd1: f64,
    pub beta: f64,
}

impl ToySpec2 {
    pub fn new(j: f64, h2: f64, h_sd1: f64, beta: f64) -> Result<Self, OracleError> {
        check_finite("j", j)?;
        check_finite("h2", h2)?;
        check_sd(h_sd1)?;
        check_beta(beta)?;
        Ok(Self { j, h2, h_sd1, beta })
    }
}

/// Three-spin chain motif: couplings `j12` (spins 0–1) and `j23` (spins 1–2),
/// binary field noise of amplitudes `h_sd1` and `h_sd3` on the end spins,
/// zero field on the middle spin, uniform inverse temperature `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToySpec3 {
    pub j12: f64,
    pub j23: f64,
    pub h_sd1: f64,
    pub h_sd3: f64,
    pub beta: f64,
}

impl ToySpec3 {
    pub fn new(
        j12: f64,
        j23: f64,
        h_sd1: f64,
        h_sd3: f64,
        beta: f64,
    ) -> Result<Self, OracleError> {
        check_finite("j12", j12)?;
        check_finite("j23", j23)?;
        check_sd(h_sd1)?;
        check_sd(h_sd3)?;
        check_beta(beta)?;
        Ok(Self {
            j12,
            j23,
            h_sd1,
            h_sd3,
            beta,
        })
    }
}

/// Raw closed form for the two-spin motif, without input validation. The
/// noise amplitude enters only through `tanh²`, making the result even in
/// `h_sd1` by construction.
fn field_closed_form(j: f64, h2: f64, h_sd1: f64, beta: f64) -> f64 {
    let t_noise = (beta * h_sd1).tanh();
    let arg = (beta * j).tanh() * (beta * h2).tanh() * t_noise * t_noise;
    -atanh_stable(arg) / beta
}

/// Raw closed form for the three-spin chain, without input validation.
fn coupling_closed_form(j12: f64, j23: f64, h_sd1: f64, h_sd3: f64, beta: f64) -> f64 {
    let t1 = (beta * h_sd1).tanh();
    let t3 = (beta * h_sd3).tanh();
    let arg = (beta * j12).tanh() * (beta * j23).tanh() * t1 * t1 * t3 * t3;
    -atanh_stable(arg) / beta
}

/// Effective field induced on spin 0 of the two-spin motif by averaging over
/// the binary field noise:
/// `−(1/β)·artanh(tanh(βJ)·tanh(βh₂)·tanh²(βh_sd1))`.
///
/// Expressed in input units; the natural (temperature-absorbed) coefficient
/// of the averaged Gibbs distribution is `beta` times this value.
pub fn effective_field(spec: &ToySpec2) -> f64 {
    field_closed_form(spec.j, spec.h2, spec.h_sd1, spec.beta)
}

/// Effective coupling induced between the end spins of the three-spin chain:
/// `−(1/β)·artanh(tanh(βJ₁₂)·tanh(βJ₂₃)·tanh²(βh_sd1)·tanh²(βh_sd3))`.
///
/// Expressed in input units, like [`effective_field`].
pub fn effective_coupling(spec: &ToySpec3) -> f64 {
    coupling_closed_form(spec.j12, spec.j23, spec.h_sd1, spec.h_sd3, spec.beta)
}

/// Small-parameter approximation of [`effective_field`]:
/// `−β·J·h₂·tanh²(βh_sd1)`, valid as `J, h₂ → 0`.
pub fn small_param_field(spec: &ToySpec2) -> f64 {
    let t = (spec.beta * spec.h_sd1).tanh();
    -spec.beta * spec.j * spec.h2 * t * t
}

/// Small-parameter approximation of [`effective_coupling`]:
/// `−β·J₁₂·J₂₃·tanh²(βh_sd1)·tanh²(βh_sd3)`, valid as the couplings → 0.
/// With equal noise amplitudes this is a fourth-order effect in the noise.
pub fn small_param_coupling(spec: &ToySpec3) -> f64 {
    let t1 = (spec.beta * spec.h_sd1).tanh();
    let t3 = (spec.beta * spec.h_sd3).tanh();
    -spec.beta * spec.j12 * spec.j23 * t1 * t1 * t3 * t3
}

/// Learner configuration used for all brute-force comparisons: order-2
/// reconstruction pushed to a tight gradient tolerance so that learner error
/// is negligible against the 1e-9 equivalence budget.
fn tight_order2_config() -> LearnConfig {
    LearnConfig {
        order: 2,
        grad_tol: 1e-12,
        max_iter: 2000,
        l1_penalty: 0.0,
    }
}

/// Brute-force effective model of a noisy sampler: enumerate the exact
/// mixture distribution over noise realizations, then reconstruct an order-2
/// Gibbs model from the exact configuration weights.
///
/// The returned coefficients are natural (temperature-absorbed) parameters;
/// divide by the relevant `beta` to compare with input-unit closed forms.
pub fn learned_effective_model(
    input: &GibbsModel,
    noise: &NoiseSpec,
) -> Result<GibbsModel, OracleError> {
    let mixture = noisy_mixture_distribution(input, noise)?;
    let data = WeightedData::from(&mixture);
    Ok(learn_model(&data, &tight_order2_config())?)
}

/// Effective order-2 model of the four-spin system: exact mixture over the 16
/// binary noise realizations followed by order-2 learning. Covers all four
/// fields and all six pair couplings, including the spurious diagonals.
pub fn four_spin_effective(
    input: &GibbsModel,
    noise: &NoiseSpec,
) -> Result<GibbsModel, OracleError> {
    if input.n_spins() != 4 {
        return Err(OracleError::WrongSpinCount {
            got: input.n_spins(),
            want: 4,
        });
    }
    if noise.n_spins() != 4 {
        return Err(OracleError::WrongSpinCount {
            got: noise.n_spins(),
            want: 4,
        });
    }
    learned_effective_model(input, noise)
}

/// Uniform-temperature noise spec helper for the toy motifs: inverse
/// temperature `beta` everywhere, binary field noise amplitudes `h_sd`, no
/// biases.
fn toy_noise(beta: f64, h_sd: Vec<f64>) -> Result<NoiseSpec, OracleError> {
    let n = h_sd.len();
    Ok(NoiseSpec::new(
        vec![beta; n],
        vec![0.0; n],
        h_sd,
        BTreeMap::new(),
        beta,
        NoiseKind::Binary,
    )?)
}

/// One grid point of the field-oracle equivalence check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FieldEquivalenceRow {
    pub spec: ToySpec2,
    /// Closed-form effective field, input units.
    pub closed_form: f64,
    /// Field on spin 0 learned from the exact mixture, converted to input
    /// units (natural coefficient divided by `beta`).
    pub learned: f64,
}

impl FieldEquivalenceRow {
    pub fn abs_diff(&self) -> f64 {
        (self.closed_form - self.learned).abs()
    }
}

/// One grid point of the coupling-oracle equivalence check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CouplingEquivalenceRow {
    pub spec: ToySpec3,
    /// Closed-form effective end-to-end coupling, input units.
    pub closed_form: f64,
    /// Coupling (0, 2) learned from the exact mixture, input units.
    pub learned: f64,
}

impl CouplingEquivalenceRow {
    pub fn abs_diff(&self) -> f64 {
        (self.closed_form - self.learned).abs()
    }
}

/// Inverse temperatures of the standard equivalence grid.
pub const GRID_BETAS: [f64; 3] = [1.0, 5.0, 12.0];
/// Coupling / field values of the standard equivalence grid.
pub const GRID_VALUES: [f64; 5] = [-0.05, -0.02, 0.0, 0.02, 0.05];
/// Noise amplitudes of the standard equivalence grid.
pub const GRID_NOISE: [f64; 3] = [0.0, 0.02, 0.05];

/// Evaluate one field-grid point: closed form vs exact-mixture learning.
pub fn field_equivalence_row(spec: &ToySpec2) -> Result<FieldEquivalenceRow, OracleError> {
    let input = GibbsModel::from_terms(
        2,
        [(vec![1usize], spec.h2), (vec![0usize, 1usize], spec.j)],
    )?;
    let noise = toy_noise(spec.beta, vec![spec.h_sd1, 0.0])?;
    let learned_model = learned_effective_model(&input, &noise)?;
    Ok(FieldEquivalenceRow {
        spec: *spec,
        closed_form: effective_field(spec),
        learned: learned_model.term(&[0]) / spec.beta,
    })
}

/// Evaluate one coupling-grid point: closed form vs exact-mixture learning.
pub fn coupling_equivalence_row(spec: &ToySpec3) -> Result<CouplingEquivalenceRow, OracleError> {
    let input = GibbsModel::from_terms(
        3,
        [
            (vec![0usize, 1usize], spec.j12),
            (vec![1usize, 2usize], spec.j23),
        ],
    )?;
    let noise = toy_noise(spec.beta, vec![spec.h_sd1, 0.0, spec.h_sd3])?;
    let learned_model = learned_effective_model(&input, &noise)?;
    Ok(CouplingEquivalenceRow {
        spec: *spec,
        closed_form: effective_coupling(spec),
        learned: learned_model.term(&[0, 2]) / spec.beta,
    })
}

/// The 225-point field equivalence grid:
/// `beta ∈ {1, 5, 12} × J ∈ {±0.05, ±0.02, 0} × h₂ ∈ {±0.05, ±0.02, 0} ×
/// h_sd1 ∈ {0, 0.02, 0.05}`.
pub fn field_equivalence_grid() -> Result<Vec<FieldEquivalenceRow>, OracleError> {
    let mut rows = Vec::with_capacity(GRID_BETAS.len() * GRID_VALUES.len() * GRID_VALUES.len() * GRID_NOISE.len());
    for &beta in &GRID_BETAS {
        for &j in &GRID_VALUES {
            for &h2 in &GRID_VALUES {
                for &h_sd1 in &GRID_NOISE {
                    let spec = ToySpec2::new(j, h2, h_sd1, beta)?;
                    rows.push(field_equivalence_row(&spec)?);
                }
            }
        }
    }
    Ok(rows)
}

/// The 225-point coupling equivalence grid:
/// `beta ∈ {1, 5, 12} × J₁₂ ∈ {±0.05, ±0.02, 0} × J₂₃ ∈ {±0.05, ±0.02, 0} ×
/// h_sd ∈ {0, 0.02, 0.05}` with equal noise on both end spins.
pub fn coupling_equivalence_grid() -> Result<Vec<CouplingEquivalenceRow>, OracleError> {
    let mut rows = Vec::with_capacity(GRID_BETAS.len() * GRID_VALUES.len() * GRID_VALUES.len() * GRID_NOISE.len());
    for &beta in &GRID_BETAS {
        for &j12 in &GRID_VALUES {
            for &j23 in &GRID_VALUES {
                for &h_sd in &GRID_NOISE {
                    let spec = ToySpec3::new(j12, j23, h_sd, h_sd, beta)?;
                    rows.push(coupling_equivalence_row(&spec)?);
                }
            }
        }
    }
    Ok(rows)
}

/// CSV rendering of the field grid (`Display` float formatting, one header).
pub fn field_grid_csv(rows: &[FieldEquivalenceRow]) -> String {
    let mut out = String::from("beta,j,h2,h_sd1,closed_form,learned,abs_diff\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.spec.beta,
            row.spec.j,
            row.spec.h2,
            row.spec.h_sd1,
            row.closed_form,
            row.learned,
            row.abs_diff()
        ));
    }
    out
}

/// CSV rendering of the coupling grid.
pub fn coupling_grid_csv(rows: &[CouplingEquivalenceRow]) -> String {
    let mut out = String::from("beta,j12,j23,h_sd1,h_sd3,closed_form,learned,abs_diff\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.spec.beta,
            row.spec.j12,
            row.spec.j23,
            row.spec.h_sd1,
            row.spec.h_sd3,
            row.closed_form,
            row.learned,
            row.abs_diff()
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_noise_or_zero_inputs_give_exact_zero() {
        let zero_noise = ToySpec2::new(0.03, 0.03, 0.0, 12.0).unwrap();
        assert_eq!(effective_field(&zero_noise), 0.0);
        let zero_j = ToySpec2::new(0.0, 0.03, 0.05, 12.0).unwrap();
        assert_eq!(effective_field(&zero_j), 0.0);
        let zero_h2 = ToySpec2::new(0.03, 0.0, 0.05, 12.0).unwrap();
        assert_eq!(effective_field(&zero_h2), 0.0);

        let sd1_zero = ToySpec3::new(0.04, 0.04, 0.0, 0.05, 12.0).unwrap();
        assert_eq!(effective_coupling(&sd1_zero), 0.0);
        let sd3_zero = ToySpec3::new(0.04, 0.04, 0.05, 0.0, 12.0).unwrap();
        assert_eq!(effective_coupling(&sd3_zero), 0.0);

        let all_zero2 = ToySpec2::new(0.0, 0.0, 0.0, 5.0).unwrap();
        assert_eq!(small_param_field(&all_zero2), 0.0);
        let all_zero3 = ToySpec3::new(0.0, 0.0, 0.0, 0.0, 5.0).unwrap();
        assert_eq!(small_param_coupling(&all_zero3), 0.0);
    }

    #[test]
    fn responses_are_negative_for_positive_inputs() {
        let spec2 = ToySpec2::new(0.03, 0.04, 0.05, 12.0).unwrap();
        assert!(effective_field(&spec2) < 0.0);
        assert!(small_param_field(&spec2) < 0.0);

        let spec3 = ToySpec3::new(0.04, 0.03, 0.05, 0.06, 12.0).unwrap();
        assert!(effective_coupling(&spec3) < 0.0);
        assert!(small_param_coupling(&spec3) < 0.0);
    }

    #[test]
    fn field_is_odd_in_each_input_and_even_in_noise() {
        let (j, h2, sd, beta) = (0.031, -0.017, 0.042, 9.5);
        let base = field_closed_form(j, h2, sd, beta);
        assert_abs_diff_eq!(field_closed_form(-j, h2, sd, beta), -base, epsilon = 1e-15);
        assert_abs_diff_eq!(field_closed_form(j, -h2, sd, beta), -base, epsilon = 1e-15);
        assert_abs_diff_eq!(field_closed_form(-j, -h2, sd, beta), base, epsilon = 1e-15);
        assert_abs_diff_eq!(field_closed_form(j, h2, -sd, beta), base, epsilon = 1e-15);
    }

    #[test]
    fn coupling_is_odd_in_each_coupling_and_even_in_noise() {
        let (j12, j23, sd1, sd3, beta) = (0.044, 0.028, 0.05, 0.034, 11.0);
        let base = coupling_closed_form(j12, j23, sd1, sd3, beta);
        assert_abs_diff_eq!(
            coupling_closed_form(-j12, j23, sd1, sd3, beta),
            -base,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            coupling_closed_form(j12, -j23, sd1, sd3, beta),
            -base,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            coupling_closed_form(j12, j23, -sd1, sd3, beta),
            base,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            coupling_closed_form(j12, j23, sd1, -sd3, beta),
            base,
            epsilon = 1e-15
        );
        // Exchange symmetry of the chain: swapping the two couplings and the
        // two noise amplitudes leaves the response unchanged (up to rounding
        // from the reordered product).
        assert_abs_diff_eq!(
            coupling_closed_form(j23, j12, sd3, sd1, beta),
            base,
            epsilon = 1e-17
        );
    }

    #[test]
    fn coupling_magnitude_grows_with_each_noise_amplitude() {
        let beta = 12.0;
        let mut previous = 0.0;
        for step in 0..=20 {
            let sd = 0.01 * step as f64;
            let spec = ToySpec3::new(0.04, 0.04, sd, 0.05, beta).unwrap();
            let magnitude = effective_coupling(&spec).abs();
            if step == 0 {
                assert_eq!(magnitude, 0.0);
            } else {
                assert!(
                    magnitude > previous,
                    "|coupling| must grow with h_sd1: {magnitude} vs {previous} at sd={sd}"
                );
            }
            previous = magnitude;
        }
        // Same in the other amplitude, by the exchange symmetry spot check.
        let lo = ToySpec3::new(0.04, 0.04, 0.05, 0.08, beta).unwrap();
        let hi = ToySpec3::new(0.04, 0.04, 0.05, 0.12, beta).unwrap();
        assert!(effective_coupling(&hi).abs() > effective_coupling(&lo).abs());
    }

    #[test]
    fn small_parameter_ratio_approaches_one() {
        let scale = 1e-3;
        let spec2 = ToySpec2::new(0.03 * scale, 0.04 * scale, 0.05, 12.0).unwrap();
        let ratio2 = effective_field(&spec2) / small_param_field(&spec2);
        assert!((ratio2 - 1.0).abs() < 1e-4, "field ratio {ratio2}");

        let spec3 = ToySpec3::new(0.04 * scale, 0.03 * scale, 0.05, 0.06, 12.0).unwrap();
        let ratio3 = effective_coupling(&spec3) / small_param_coupling(&spec3);
        assert!((ratio3 - 1.0).abs() < 1e-4, "coupling ratio {ratio3}");
    }

    #[test]
    fn coupling_approximation_is_fourth_order_in_equal_noise() {
        // With h_sd1 = h_sd3 = sd the approximation factors as tanh⁴(β·sd):
        // halving sd rescales it by exactly (tanh(β·sd/2)/tanh(β·sd))⁴.
        let beta = 7.0;
        let (j12, j23) = (0.01, 0.02);
        let sd = 0.04;
        let full = small_param_coupling(&ToySpec3::new(j12, j23, sd, sd, beta).unwrap());
        let half = small_param_coupling(&ToySpec3::new(j12, j23, sd / 2.0, sd / 2.0, beta).unwrap());
        let expected_factor = ((beta * sd / 2.0).tanh() / (beta * sd).tanh()).powi(4);
        assert_abs_diff_eq!(half / full, expected_factor, epsilon = 1e-14);
    }

    #[test]
    fn two_spin_mixture_matches_closed_form() {
        let spec = ToySpec2::new(0.03, 0.03, 0.05, 12.0).unwrap();
        let row = field_equivalence_row(&spec).unwrap();
        assert!(row.closed_form != 0.0);
        assert!(
            row.abs_diff() <= 1e-9,
            "closed form {} vs learned {}",
            row.closed_form,
            row.learned
        );
    }

    #[test]
    fn three_spin_mixture_matches_closed_form() {
        let spec = ToySpec3::new(0.04, 0.04, 0.05, 0.05, 12.0).unwrap();
        let row = coupling_equivalence_row(&spec).unwrap();
        assert!(row.closed_form != 0.0);
        assert!(
            row.abs_diff() <= 1e-9,
            "closed form {} vs learned {}",
            row.closed_form,
            row.learned
        );
    }

    #[test]
    fn two_spin_mixture_keeps_the_other_terms_at_input_values() {
        // Averaging over noise on spin 0 perturbs the field on spin 0 only;
        // the coupling and the spin-1 field keep their input values exactly.
        let spec = ToySpec2::new(0.03, 0.02, 0.05, 12.0).unwrap();
        let input = GibbsModel::from_terms(
            2,
            [(vec![1usize], spec.h2), (vec![0usize, 1usize], spec.j)],
        )
        .unwrap();
        let noise = toy_noise(spec.beta, vec![spec.h_sd1, 0.0]).unwrap();
        let learned = learned_effective_model(&input, &noise).unwrap();
        assert_abs_diff_eq!(learned.term(&[0, 1]) / spec.beta, spec.j, epsilon = 1e-9);
        assert_abs_diff_eq!(learned.term(&[1]) / spec.beta, spec.h2, epsilon = 1e-9);
    }

    #[test]
    fn zero_noise_four_spin_is_beta_scaled_copy() {
        let beta = 7.0;
        let input = GibbsModel::from_terms(
            4,
            [
                (vec![0usize], 0.02),
                (vec![2usize], -0.03),
                (vec![0usize, 1usize], 0.04),
                (vec![1usize, 2usize], -0.02),
                (vec![2usize, 3usize], 0.03),
            ],
        )
        .unwrap();
        let noise = NoiseSpec::new(
            vec![beta; 4],
            vec![0.0; 4],
            vec![0.0; 4],
            BTreeMap::new(),
            beta,
            NoiseKind::Binary,
        )
        .unwrap();
        let learned = four_spin_effective(&input, &noise).unwrap();
        for (key, value) in learned.terms() {
            assert_abs_diff_eq!(value, beta * input.term(key), epsilon = 1e-9);
        }
        // Spurious diagonals and untouched fields stay at zero.
        assert!(learned.term(&[0, 2]).abs() <= 1e-9);
        assert!(learned.term(&[1, 3]).abs() <= 1e-9);
        assert!(learned.term(&[3]).abs() <= 1e-9);
    }

    #[test]
    fn single_edge_produces_no_spurious_coupling() {
        // One live edge cannot create new pairs: the mechanism needs two
        // adjacent edges. Spins 2 and 3 stay independent of the edge pair.
        let beta = 12.0;
        let input = GibbsModel::from_terms(4, [(vec![0usize, 1usize], 0.04)]).unwrap();
        let noise = NoiseSpec::new(
            vec![beta; 4],
            vec![0.0; 4],
            vec![0.05; 4],
            BTreeMap::new(),
            beta,
            NoiseKind::Binary,
        )
        .unwrap();
        let learned = four_spin_effective(&input, &noise).unwrap();
        for (key, value) in learned.terms() {
            if key.as_slice() == [0, 1] {
                continue;
            }
            assert!(
                value.abs() <= 1e-9,
                "term {key:?} should vanish, got {value}"
            );
        }
        assert!(learned.term(&[0, 1]).abs() > 0.1);
    }

    #[test]
    fn four_spin_effective_rejects_other_sizes() {
        let input = GibbsModel::new(3).unwrap();
        let noise = NoiseSpec::noiseless(3);
        assert!(matches!(
            four_spin_effective(&input, &noise),
            Err(OracleError::WrongSpinCount { got: 3, want: 4 })
        ));
    }

    #[test]
    fn spec_constructors_reject_bad_values() {
        assert!(matches!(
            ToySpec2::new(0.1, 0.1, -0.01, 12.0),
            Err(OracleError::BadNoiseSd { .. })
        ));
        assert!(matches!(
            ToySpec2::new(0.1, 0.1, 0.01, 0.0),
            Err(OracleError::BadBeta { .. })
        ));
        assert!(matches!(
            ToySpec2::new(f64::NAN, 0.1, 0.01, 1.0),
            Err(OracleError::NonFinite { name: "j", .. })
        ));
        assert!(matches!(
            ToySpec3::new(0.1, 0.1, 0.01, f64::INFINITY, 1.0),
            Err(OracleError::BadNoiseSd { .. })
        ));
    }

    #[test]
    fn equivalence_grids_have_expected_shape_and_sample_rows_agree() {
        // Full grids run in the acceptance suite; here check the shape and a
        // diagonal subsample so the unit suite stays fast.
        let specs: Vec<ToySpec2> = GRID_BETAS
            .iter()
            .zip(GRID_NOISE.iter())
            .map(|(&beta, &sd)| ToySpec2::new(0.05, -0.02, sd, beta).unwrap())
            .collect();
        for spec in &specs {
            let row = field_equivalence_row(spec).unwrap();
            assert!(row.abs_diff() <= 1e-9, "diff {} at {spec:?}", row.abs_diff());
        }
        assert_eq!(
            GRID_BETAS.len() * GRID_VALUES.len() * GRID_VALUES.len() * GRID_NOISE.len(),
            225
        );
    }

    #[test]
    fn grid_csv_rendering_is_deterministic_and_ordered() {
        let spec = ToySpec2::new(0.02, 0.05, 0.02, 5.0).unwrap();
        let row = field_equivalence_row(&spec).unwrap();
        let csv = field_grid_csv(&[row]);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "beta,j,h2,h_sd1,closed_form,learned,abs_diff"
        );
        let data = lines.next().unwrap();
        assert!(data.starts_with("5,0.02,0.05,0.02,"));
        assert_eq!(csv, field_grid_csv(&[row]));

        let spec3 = ToySpec3::new(0.02, -0.05, 0.05, 0.02, 12.0).unwrap();
        let row3 = coupling_equivalence_row(&spec3).unwrap();
        let csv3 = coupling_grid_csv(&[row3]);
        assert!(csv3.starts_with("beta,j12,j23,h_sd1,h_sd3,closed_form,learned,abs_diff\n12,0.02,-0.05,0.05,0.02,"));
    }
}
