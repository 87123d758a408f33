//! General quadratic input→output response functions and the end-to-end
//! simulated response pipeline.
//!
//! The object of study is the map from input parameters (fields and native
//! couplings of a fixed spin/edge roster) to the natural coefficients of the
//! reconstructed order-2 model — including "spurious" pairs absent from the
//! roster. Each output coefficient is modelled as the most general quadratic
//! function of the stacked input vector `x = [h_in ‖ J_in]`:
//!
//! ```text
//! y(x) = xᵀ χ x + linᵀ x + offset,
//! ```
//!
//! with `χ` stored in the *symmetric* convention (the cross coefficient of
//! `x_k x_l`, `k ≠ l`, is split evenly between `χ_kl` and `χ_lk`; doubling
//! the off-diagonals converts to the single-sided convention).
//!
//! The simulation pipeline draws random input vectors from an 11-point grid,
//! computes the exact noise-averaged distribution for each, reconstructs an
//! order-2 model from the exact weights, and fits the quadratic response by
//! least squares.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::{learn_model, LearnConfig, LearnError, WeightedData};
use crate::model::{GibbsModel, ModelError};
use crate::rng::stream_rng;
use crate::sampler::{noisy_mixture_distribution, sample_noisy_with_rng, NoiseSpec, SamplerError};

/// Relative eigenvalue cutoff below which a normal-equations direction is
/// reported as rank deficient.
const RANK_EPS: f64 = 1e-10;

/// Errors from response fitting and the simulation pipeline.
#[derive(Debug, Error)]
pub enum ResponseError {
    #[error("roster needs at least one spin")]
    EmptyRoster,
    #[error("duplicate spin label {label:?}")]
    DuplicateLabel { label: String },
    #[error("edge ({i}, {j}) is not valid for {n_spins} spins (need i < j < n)")]
    BadEdge { i: usize, j: usize, n_spins: usize },
    #[error("duplicate native edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("input vector has length {got}, roster dimension is {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("non-finite value in {place}")]
    NonFinite { place: String },
    #[error("no input/output pairs")]
    NoPairs,
    #[error(
        "{got} pairs cannot determine {unknowns} unknowns per output; \
         provide at least {unknowns} (recommended ≥ {recommended})"
    )]
    NotEnoughPairs {
        got: usize,
        unknowns: usize,
        recommended: usize,
    },
    #[error("design matrix is rank deficient along: {}", directions.join("; "))]
    RankDeficient { directions: Vec<String> },
    #[error("output {output:?} missing from pair {index}")]
    MissingOutput { output: String, index: usize },
    #[error("pipeline needs a non-empty input grid")]
    EmptyGrid,
    #[error("pipeline needs n_models ≥ 1")]
    ZeroModels,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

/// A fixed experiment roster: one label per spin plus the native (physical)
/// edges that can carry input couplings.
///
/// The input vector ordering is fields in roster order followed by native
/// couplings in roster edge order. Output names use the labels: `h_<label>`
/// for fields and `J_<a>_<b>` for pairs, with `a`, `b` the endpoint labels in
/// ascending label order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roster {
    labels: Vec<String>,
    native_edges: Vec<(usize, usize)>,
}

impl Roster {
    pub fn new(
        labels: Vec<String>,
        native_edges: Vec<(usize, usize)>,
    ) -> Result<Self, ResponseError> {
        if labels.is_empty() {
            return Err(ResponseError::EmptyRoster);
        }
        let n = labels.len();
        for (idx, label) in labels.iter().enumerate() {
            if labels[..idx].contains(label) {
                return Err(ResponseError::DuplicateLabel {
                    label: label.clone(),
                });
            }
        }
        for (idx, &(i, j)) in native_edges.iter().enumerate() {
            if i >= j || j >= n {
                return Err(ResponseError::BadEdge { i, j, n_spins: n });
            }
            if native_edges[..idx].contains(&(i, j)) {
                return Err(ResponseError::DuplicateEdge { i, j });
            }
        }
        Ok(Self {
            labels,
            native_edges,
        })
    }

    /// The four-spin hardware roster used throughout: labels 304, 308, 305,
    /// 309 with native couplers 304–308, 304–309, 308–305 and 305–309.
    pub fn four_spin_cell() -> Self {
        Self::new(
            vec![
                "304".to_string(),
                "308".to_string(),
                "305".to_string(),
                "309".to_string(),
            ],
            vec![(0, 1), (0, 3), (1, 2), (2, 3)],
        )
        .expect("static roster is valid")
    }

    pub fn n_spins(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn native_edges(&self) -> &[(usize, usize)] {
        &self.native_edges
    }

    /// Input dimension: one field per spin plus one coupling per native edge.
    pub fn dimension(&self) -> usize {
        self.labels.len() + self.native_edges.len()
    }

    /// Name of the pair `(i, j)`: endpoint labels in ascending label order.
    pub fn pair_name(&self, i: usize, j: usize) -> String {
        let (a, b) = (&self.labels[i], &self.labels[j]);
        if a <= b {
            format!("J_{a}_{b}")
        } else {
            format!("J_{b}_{a}")
        }
    }

    /// Input coordinate names, in input-vector order.
    pub fn input_labels(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .labels
            .iter()
            .map(|label| format!("h_{label}"))
            .collect();
        for &(i, j) in &self.native_edges {
            names.push(self.pair_name(i, j));
        }
        names
    }

    /// Output coordinate names: every field, then every pair of spins
    /// (native and spurious alike), in spin-index order.
    pub fn output_labels(&self) -> Vec<String> {
        let n = self.labels.len();
        let mut names: Vec<String> = self
            .labels
            .iter()
            .map(|label| format!("h_{label}"))
            .collect();
        for i in 0..n {
            for j in (i + 1)..n {
                names.push(self.pair_name(i, j));
            }
        }
        names
    }

    /// Build the input-unit Gibbs model encoded by an input vector.
    pub fn input_model(&self, x: &[f64]) -> Result<GibbsModel, ResponseError> {
        let d = self.dimension();
        if x.len() != d {
            return Err(ResponseError::DimensionMismatch {
                got: x.len(),
                want: d,
            });
        }
        let n = self.labels.len();
        let mut model = GibbsModel::new(n)?;
        for (i, &h) in x[..n].iter().enumerate() {
            model.set_term(&[i], h)?;
        }
        for (&(i, j), &coupling) in self.native_edges.iter().zip(&x[n..]) {
            model.set_term(&[i, j], coupling)?;
        }
        Ok(model)
    }

    /// Collect the outputs of a learned order-2 model under this roster's
    /// naming: all fields and all pairs, including spurious ones.
    pub fn collect_outputs(&self, learned: &GibbsModel) -> BTreeMap<String, f64> {
        let n = self.labels.len();
        let mut outputs = BTreeMap::new();
        for (i, label) in self.labels.iter().enumerate() {
            outputs.insert(format!("h_{label}"), learned.term(&[i]));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                outputs.insert(self.pair_name(i, j), learned.term(&[i, j]));
            }
        }
        outputs
    }
}

/// One quadratic response: `y(x) = xᵀ χ x + linᵀ x + offset` with symmetric
/// `χ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub chi: Vec<Vec<f64>>,
    pub lin: Vec<f64>,
    pub offset: f64,
}

impl Quadratic {
    /// A zero response of input dimension `d`.
    pub fn zeros(d: usize) -> Self {
        Self {
            chi: vec![vec![0.0; d]; d],
            lin: vec![0.0; d],
            offset: 0.0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.lin.len()
    }

    /// Check squareness, symmetry (within 1e-12) and finiteness.
    pub fn validate(&self) -> Result<(), ResponseError> {
        let d = self.lin.len();
        if self.chi.len() != d {
            return Err(ResponseError::DimensionMismatch {
                got: self.chi.len(),
                want: d,
            });
        }
        for (k, row) in self.chi.iter().enumerate() {
            if row.len() != d {
                return Err(ResponseError::DimensionMismatch {
                    got: row.len(),
                    want: d,
                });
            }
            for (l, &value) in row.iter().enumerate() {
                if !value.is_finite() {
                    return Err(ResponseError::NonFinite {
                        place: format!("chi[{k}][{l}]"),
                    });
                }
                if (value - self.chi[l][k]).abs() > 1e-12 {
                    return Err(ResponseError::NonFinite {
                        place: format!("chi[{k}][{l}] breaks symmetry"),
                    });
                }
            }
        }
        if self.lin.iter().any(|v| !v.is_finite()) {
            return Err(ResponseError::NonFinite {
                place: "lin".to_string(),
            });
        }
        if !self.offset.is_finite() {
            return Err(ResponseError::NonFinite {
                place: "offset".to_string(),
            });
        }
        Ok(())
    }

    /// Evaluate the quadratic at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut value = self.offset;
        for (lin, &xk) in self.lin.iter().zip(x) {
            value += lin * xk;
        }
        for (row, &xk) in self.chi.iter().zip(x) {
            let mut inner = 0.0;
            for (entry, &xl) in row.iter().zip(x) {
                inner += entry * xl;
            }
            value += xk * inner;
        }
        value
    }

    /// The χ matrix in the single-sided convention: off-diagonal entries
    /// doubled so that the upper triangle alone carries each cross
    /// coefficient. Evaluating `Σ_{k≤l} c_kl x_k x_l` with this matrix's
    /// upper triangle reproduces [`Quadratic::eval`].
    pub fn chi_single_sided(&self) -> Vec<Vec<f64>> {
        let d = self.dimension();
        let mut out = self.chi.clone();
        for k in 0..d {
            for l in 0..d {
                if k != l {
                    out[k][l] = 2.0 * self.chi[k][l];
                }
            }
        }
        out
    }
}

/// A full response function: one [`Quadratic`] per output parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseFunction {
    pub input_labels: Vec<String>,
    pub outputs: BTreeMap<String, Quadratic>,
}

impl ResponseFunction {
    /// Predict every output at the input vector `x`.
    pub fn predict(&self, x: &[f64]) -> Result<BTreeMap<String, f64>, ResponseError> {
        if x.len() != self.input_labels.len() {
            return Err(ResponseError::DimensionMismatch {
                got: x.len(),
                want: self.input_labels.len(),
            });
        }
        Ok(self
            .outputs
            .iter()
            .map(|(name, quadratic)| (name.clone(), quadratic.eval(x)))
            .collect())
    }

    pub fn output(&self, name: &str) -> Option<&Quadratic> {
        self.outputs.get(name)
    }

    /// Index of an input coordinate by name.
    pub fn input_index(&self, label: &str) -> Option<usize> {
        self.input_labels.iter().position(|l| l == label)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("response function serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// One training pair: input vector and the named output coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsePair {
    pub x: Vec<f64>,
    pub outputs: BTreeMap<String, f64>,
}

/// Fit diagnostics: problem size, warnings and per-output RMS residuals.
#[derive(Debug, Clone, Serialize)]
pub struct FitDiagnostics {
    pub n_pairs: usize,
    pub n_unknowns: usize,
    /// Recommended pair count (`p·ln p` for `p` unknowns, rounded up).
    pub recommended_pairs: usize,
    pub warnings: Vec<String>,
    /// Root-mean-square training residual per output.
    pub residuals: BTreeMap<String, f64>,
}

/// Names of the quadratic feature basis for a given set of input labels:
/// the constant, each input, then each product `x_k·x_l` (k ≤ l).
pub fn feature_names(input_labels: &[String]) -> Vec<String> {
    let d = input_labels.len();
    let mut names = Vec::with_capacity(1 + d + d * (d + 1) / 2);
    names.push("1".to_string());
    names.extend(input_labels.iter().cloned());
    for k in 0..d {
        for l in k..d {
            if k == l {
                names.push(format!("{}^2", input_labels[k]));
            } else {
                names.push(format!("{}*{}", input_labels[k], input_labels[l]));
            }
        }
    }
    names
}

fn feature_vector(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut features = Vec::with_capacity(1 + d + d * (d + 1) / 2);
    features.push(1.0);
    features.extend_from_slice(x);
    for k in 0..d {
        for l in k..d {
            features.push(x[k] * x[l]);
        }
    }
    features
}

/// Unpack a solved coefficient vector (constant, linear, upper-triangle
/// quadratic) into a symmetric-convention [`Quadratic`].
fn quadratic_from_coefficients(d: usize, coeffs: &[f64]) -> Quadratic {
    let mut quadratic = Quadratic::zeros(d);
    quadratic.offset = coeffs[0];
    quadratic.lin = coeffs[1..=d].to_vec();
    let mut pos = d + 1;
    for k in 0..d {
        for l in k..d {
            let c = coeffs[pos];
            pos += 1;
            if k == l {
                quadratic.chi[k][k] = c;
            } else {
                quadratic.chi[k][l] = c / 2.0;
                quadratic.chi[l][k] = c / 2.0;
            }
        }
    }
    quadratic
}

/// Format a rank-deficient direction as its dominant feature combination.
fn describe_direction(vector: &DVector<f64>, names: &[String]) -> String {
    let mut indexed: Vec<(usize, f64)> = vector
        .iter()
        .enumerate()
        .map(|(i, &v)| (i, v))
        .filter(|&(_, v)| v.abs() > 1e-8)
        .collect();
    indexed.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    indexed.truncate(4);
    if indexed.is_empty() {
        return "(null direction)".to_string();
    }
    indexed
        .iter()
        .map(|&(i, v)| format!("{v:+.3}·{}", names[i]))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Exact least-squares fit of one [`Quadratic`] per output over the pairs.
///
/// All pairs must provide the same output names. Fails below `n_unknowns`
/// pairs; warns (in the diagnostics) below `n_unknowns·ln(n_unknowns)`.
/// Rank deficiency of the shared design matrix is reported with the
/// deficient feature directions.
pub fn fit_quadratic(
    pairs: &[ResponsePair],
    input_labels: &[String],
) -> Result<(ResponseFunction, FitDiagnostics), ResponseError> {
    if pairs.is_empty() {
        return Err(ResponseError::NoPairs);
    }
    let d = input_labels.len();
    let p = 1 + d + d * (d + 1) / 2;
    let n = pairs.len();
    let recommended = ((p as f64) * (p as f64).ln()).ceil() as usize;
    if n < p {
        return Err(ResponseError::NotEnoughPairs {
            got: n,
            unknowns: p,
            recommended,
        });
    }
    let output_names: Vec<String> = pairs[0].outputs.keys().cloned().collect();
    let m = output_names.len();

    for (index, pair) in pairs.iter().enumerate() {
        if pair.x.len() != d {
            return Err(ResponseError::DimensionMismatch {
                got: pair.x.len(),
                want: d,
            });
        }
        if pair.x.iter().any(|v| !v.is_finite()) {
            return Err(ResponseError::NonFinite {
                place: format!("input of pair {index}"),
            });
        }
        for name in &output_names {
            match pair.outputs.get(name) {
                Some(v) if v.is_finite() => {}
                Some(_) => {
                    return Err(ResponseError::NonFinite {
                        place: format!("output {name:?} of pair {index}"),
                    })
                }
                None => {
                    return Err(ResponseError::MissingOutput {
                        output: name.clone(),
                        index,
                    })
                }
            }
        }
    }

    // Shared normal equations: one Gram matrix for every output.
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DMatrix::<f64>::zeros(p, m);
    let mut features = Vec::with_capacity(n);
    for pair in pairs {
        let f = feature_vector(&pair.x);
        for k in 0..p {
            for l in k..p {
                gram[(k, l)] += f[k] * f[l];
            }
            for (col, name) in output_names.iter().enumerate() {
                rhs[(k, col)] += f[k] * pair.outputs[name];
            }
        }
        features.push(f);
    }
    for k in 0..p {
        for l in 0..k {
            gram[(k, l)] = gram[(l, k)];
        }
    }

    let eigen = SymmetricEigen::new(gram);
    let lambda_max = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let names = feature_names(input_labels);
    let deficient: Vec<String> = eigen
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|&(_, &lambda)| lambda < lambda_max * RANK_EPS)
        .map(|(i, _)| describe_direction(&eigen.eigenvectors.column(i).into_owned(), &names))
        .collect();
    if !deficient.is_empty() {
        return Err(ResponseError::RankDeficient {
            directions: deficient,
        });
    }

    // θ = V Λ⁻¹ Vᵀ B, column by column.
    let vt_b = eigen.eigenvectors.transpose() * &rhs;
    let mut scaled = vt_b;
    for (row, &lambda) in eigen.eigenvalues.iter().enumerate() {
        for col in 0..m {
            scaled[(row, col)] /= lambda;
        }
    }
    let theta = eigen.eigenvectors * scaled;

    let mut outputs = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    for (col, name) in output_names.iter().enumerate() {
        let coeffs: Vec<f64> = (0..p).map(|row| theta[(row, col)]).collect();
        let mut sq_sum = 0.0;
        for (pair, f) in pairs.iter().zip(&features) {
            let predicted: f64 = coeffs.iter().zip(f).map(|(c, x)| c * x).sum();
            let residual = predicted - pair.outputs[name];
            sq_sum += residual * residual;
        }
        residuals.insert(name.clone(), (sq_sum / n as f64).sqrt());
        outputs.insert(name.clone(), quadratic_from_coefficients(d, &coeffs));
    }

    let mut warnings = Vec::new();
    if n < recommended {
        warnings.push(format!(
            "{n} pairs is below the recommended {recommended} for {p} unknowns; \
             coefficients may be poorly determined"
        ));
    }
    Ok((
        ResponseFunction {
            input_labels: input_labels.to_vec(),
            outputs,
        },
        FitDiagnostics {
            n_pairs: n,
            n_unknowns: p,
            recommended_pairs: recommended,
            warnings,
            residuals,
        },
    ))
}

/// Options for the simulated response pipeline.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Number of random input configurations (default 20000).
    pub n_models: usize,
    /// The value grid each input coordinate is drawn from, i.i.d. uniform.
    pub grid: Vec<f64>,
    /// Base seed; model `i` uses stream `i`.
    pub seed: u64,
    /// Gradient tolerance of the per-model order-2 reconstruction.
    pub learn_grad_tol: f64,
    /// `None` (default): learn from the exact mixture weights. `Some(m)`:
    /// draw `m` finite samples per model for end-to-end realism.
    pub samples_per_model: Option<u64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            n_models: 20_000,
            grid: standard_grid(),
            seed: 0,
            learn_grad_tol: 1e-9,
            samples_per_model: None,
        }
    }
}

/// The standard 11-point input grid `{−0.05, −0.04, …, 0.05}`.
pub fn standard_grid() -> Vec<f64> {
    (-5..=5).map(|i| f64::from(i) * 0.01).collect()
}

/// Evaluate one model of the pipeline: build the input-unit model for `x`,
/// average the conditional distributions over the noise exactly, reconstruct
/// an order-2 model from the exact weights, and collect all outputs under
/// the roster naming. Outputs are natural (temperature-absorbed)
/// coefficients.
pub fn response_pair(
    roster: &Roster,
    noise: &NoiseSpec,
    x: &[f64],
    grad_tol: f64,
) -> Result<ResponsePair, ResponseError> {
    let learned = learned_model_for(roster, noise, x, grad_tol, None)?;
    Ok(ResponsePair {
        x: x.to_vec(),
        outputs: roster.collect_outputs(&learned),
    })
}

fn learned_model_for(
    roster: &Roster,
    noise: &NoiseSpec,
    x: &[f64],
    grad_tol: f64,
    sampling: Option<(u64, u64, u64)>,
) -> Result<GibbsModel, ResponseError> {
    let input = roster.input_model(x)?;
    let config = LearnConfig {
        order: 2,
        grad_tol,
        ..LearnConfig::default()
    };
    let data = match sampling {
        None => WeightedData::from(&noisy_mixture_distribution(&input, noise)?),
        Some((m, seed, stream)) => {
            let mut rng = stream_rng(seed, stream);
            WeightedData::from(&sample_noisy_with_rng(&input, noise, m, &mut rng)?)
        }
    };
    Ok(learn_model(&data, &config)?)
}

/// Generate the pipeline training set: `n_models` i.i.d. grid draws and
/// their learned outputs. Model `i` draws its inputs from RNG stream `i`
/// (coordinates in input-vector order), so the set is reproducible and
/// order-independent under parallel evaluation.
pub fn pipeline_dataset(
    roster: &Roster,
    noise: &NoiseSpec,
    options: &PipelineOptions,
) -> Result<Vec<ResponsePair>, ResponseError> {
    if options.grid.is_empty() {
        return Err(ResponseError::EmptyGrid);
    }
    if options.n_models == 0 {
        return Err(ResponseError::ZeroModels);
    }
    let d = roster.dimension();
    (0..options.n_models)
        .into_par_iter()
        .map(|index| {
            let mut rng = stream_rng(options.seed, index as u64);
            let x: Vec<f64> = (0..d)
                .map(|_| {
                    use rand::Rng as _;
                    options.grid[rng.gen_range(0..options.grid.len())]
                })
                .collect();
            let learned = learned_model_for(
                roster,
                noise,
                &x,
                options.learn_grad_tol,
                options
                    .samples_per_model
                    .map(|m| (m, options.seed, index as u64)),
            )?;
            Ok(ResponsePair {
                x,
                outputs: roster.collect_outputs(&learned),
            })
        })
        .collect()
}

/// The end-to-end simulated response pipeline: random grid inputs → exact
/// noise-averaged distributions → order-2 reconstruction → quadratic fit.
pub fn simulate_response_pipeline(
    roster: &Roster,
    noise: &NoiseSpec,
    options: &PipelineOptions,
) -> Result<(ResponseFunction, FitDiagnostics), ResponseError> {
    let pairs = pipeline_dataset(roster, noise, options)?;
    fit_quadratic(&pairs, &roster.input_labels())
}

/// CSV rendering of a pair set: input columns then output columns.
pub fn pairs_to_csv(pairs: &[ResponsePair], input_labels: &[String]) -> String {
    let mut header: Vec<String> = input_labels.to_vec();
    let output_names: Vec<String> = pairs
        .first()
        .map(|p| p.outputs.keys().cloned().collect())
        .unwrap_or_default();
    header.extend(output_names.iter().cloned());
    let mut out = header.join(",");
    out.push('\n');
    for pair in pairs {
        let mut row: Vec<String> = pair.x.iter().map(|v| format!("{v}")).collect();
        for name in &output_names {
            row.push(format!("{}", pair.outputs[name]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parse a pair-set CSV produced by [`pairs_to_csv`]. `d` names the number
/// of leading input columns; the remaining columns are outputs.
pub fn pairs_from_csv(text: &str, d: usize) -> Result<(Vec<String>, Vec<ResponsePair>), ResponseError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(ResponseError::NoPairs)?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if columns.len() <= d {
        return Err(ResponseError::DimensionMismatch {
            got: columns.len(),
            want: d + 1,
        });
    }
    let input_labels = columns[..d].to_vec();
    let output_names = &columns[d..];
    let mut pairs = Vec::new();
    for (line_no, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(ResponseError::DimensionMismatch {
                got: fields.len(),
                want: columns.len(),
            });
        }
        let parse = |s: &str| -> Result<f64, ResponseError> {
            s.trim().parse::<f64>().map_err(|_| ResponseError::NonFinite {
                place: format!("line {} value {s:?}", line_no + 2),
            })
        };
        let x: Vec<f64> = fields[..d]
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_, _>>()?;
        let mut outputs = BTreeMap::new();
        for (name, value) in output_names.iter().zip(&fields[d..]) {
            outputs.insert(name.clone(), parse(value)?);
        }
        pairs.push(ResponsePair { x, outputs });
    }
    if pairs.is_empty() {
        return Err(ResponseError::NoPairs);
    }
    Ok((input_labels, pairs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng as _;
    use std::collections::BTreeMap;

    use crate::sampler::NoiseKind;

    fn test_labels(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("x{i}")).collect()
    }

    /// Deterministic synthetic quadratic with entries that exercise every
    /// coefficient class.
    fn synthetic_quadratic(d: usize, salt: f64) -> Quadratic {
        let mut quadratic = Quadratic::zeros(d);
        quadratic.offset = 0.3 + salt;
        for k in 0..d {
            quadratic.lin[k] = 1.5 * (k as f64 + 1.0) - salt;
            for l in k..d {
                let value = 0.7 * ((k + 2 * l) as f64 - salt);
                quadratic.chi[k][l] = value;
                quadratic.chi[l][k] = value;
            }
        }
        quadratic
    }

    fn grid_inputs(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let grid = standard_grid();
        let mut rng = stream_rng(seed, 7);
        (0..n)
            .map(|_| (0..d).map(|_| grid[rng.gen_range(0..grid.len())]).collect())
            .collect()
    }

    fn pairs_from_function(rf: &ResponseFunction, inputs: &[Vec<f64>]) -> Vec<ResponsePair> {
        inputs
            .iter()
            .map(|x| ResponsePair {
                x: x.clone(),
                outputs: rf.predict(x).unwrap(),
            })
            .collect()
    }

    #[test]
    fn roster_validation_and_naming() {
        let roster = Roster::four_spin_cell();
        assert_eq!(roster.n_spins(), 4);
        assert_eq!(roster.dimension(), 8);
        assert_eq!(
            roster.input_labels(),
            vec![
                "h_304", "h_308", "h_305", "h_309", "J_304_308", "J_304_309", "J_305_308",
                "J_305_309"
            ]
        );
        // Outputs include the two spurious diagonals of the cell.
        let outputs = roster.output_labels();
        assert!(outputs.contains(&"J_304_305".to_string()));
        assert!(outputs.contains(&"J_308_309".to_string()));
        assert_eq!(outputs.len(), 4 + 6);

        assert!(matches!(
            Roster::new(vec![], vec![]),
            Err(ResponseError::EmptyRoster)
        ));
        assert!(matches!(
            Roster::new(vec!["a".into(), "a".into()], vec![]),
            Err(ResponseError::DuplicateLabel { .. })
        ));
        assert!(matches!(
            Roster::new(vec!["a".into(), "b".into()], vec![(1, 1)]),
            Err(ResponseError::BadEdge { .. })
        ));
        assert!(matches!(
            Roster::new(vec!["a".into(), "b".into()], vec![(0, 1), (0, 1)]),
            Err(ResponseError::DuplicateEdge { .. })
        ));
    }

    #[test]
    fn input_model_places_fields_and_native_couplings() {
        let roster = Roster::four_spin_cell();
        let x = [0.01, -0.02, 0.03, 0.04, 0.05, -0.01, 0.02, -0.03];
        let model = roster.input_model(&x).unwrap();
        assert_eq!(model.term(&[0]), 0.01);
        assert_eq!(model.term(&[3]), 0.04);
        assert_eq!(model.term(&[0, 1]), 0.05);
        assert_eq!(model.term(&[0, 3]), -0.01);
        assert_eq!(model.term(&[1, 2]), 0.02);
        assert_eq!(model.term(&[2, 3]), -0.03);
        // Spurious pairs carry no input.
        assert_eq!(model.term(&[0, 2]), 0.0);
        assert_eq!(model.term(&[1, 3]), 0.0);
        assert!(roster.input_model(&x[..7]).is_err());
    }

    #[test]
    fn quadratic_eval_matches_conventions() {
        let quadratic = synthetic_quadratic(3, 0.1);
        // x = 0 → offset.
        assert_eq!(quadratic.eval(&[0.0; 3]), quadratic.offset);
        // chi = 0, offset = 0 → pure linear map.
        let linear = Quadratic {
            chi: vec![vec![0.0; 3]; 3],
            lin: vec![2.0, -1.0, 0.5],
            offset: 0.0,
        };
        assert_abs_diff_eq!(linear.eval(&[1.0, 2.0, 4.0]), 2.0, epsilon = 1e-15);
        // Symmetric storage agrees with the single-sided convention:
        // Σ_{k≤l} c_kl x_k x_l over the doubled matrix's upper triangle.
        let x = [0.03, -0.05, 0.02];
        let single = quadratic.chi_single_sided();
        let mut expected = quadratic.offset;
        for (k, &xk) in x.iter().enumerate() {
            expected += quadratic.lin[k] * xk;
            for (l, &xl) in x.iter().enumerate().skip(k) {
                expected += single[k][l] * xk * xl;
            }
        }
        assert_abs_diff_eq!(quadratic.eval(&x), expected, epsilon = 1e-15);
        quadratic.validate().unwrap();
    }

    #[test]
    fn fit_recovers_synthetic_quadratic() {
        let d = 4;
        let labels = test_labels(d);
        let truth = ResponseFunction {
            input_labels: labels.clone(),
            outputs: BTreeMap::from([
                ("a".to_string(), synthetic_quadratic(d, 0.0)),
                ("b".to_string(), synthetic_quadratic(d, 2.5)),
            ]),
        };
        let inputs = grid_inputs(d, 250, 99);
        let pairs = pairs_from_function(&truth, &inputs);
        let (fitted, diagnostics) = fit_quadratic(&pairs, &labels).unwrap();
        assert!(diagnostics.warnings.is_empty());
        for name in ["a", "b"] {
            let fit = &fitted.outputs[name];
            let want = &truth.outputs[name];
            assert_abs_diff_eq!(fit.offset, want.offset, epsilon = 1e-8);
            for k in 0..d {
                assert_abs_diff_eq!(fit.lin[k], want.lin[k], epsilon = 1e-8);
                for l in 0..d {
                    assert_abs_diff_eq!(fit.chi[k][l], want.chi[k][l], epsilon = 1e-8);
                }
            }
            assert!(diagnostics.residuals[name] <= 1e-9);
        }
    }

    #[test]
    fn constant_outputs_fit_to_offset_only() {
        let d = 2;
        let labels = test_labels(d);
        let inputs = grid_inputs(d, 40, 3);
        let pairs: Vec<ResponsePair> = inputs
            .iter()
            .map(|x| ResponsePair {
                x: x.clone(),
                outputs: BTreeMap::from([("c".to_string(), 4.25)]),
            })
            .collect();
        let (fitted, _) = fit_quadratic(&pairs, &labels).unwrap();
        let quadratic = &fitted.outputs["c"];
        assert_abs_diff_eq!(quadratic.offset, 4.25, epsilon = 1e-10);
        for k in 0..d {
            assert_abs_diff_eq!(quadratic.lin[k], 0.0, epsilon = 1e-9);
            for l in 0..d {
                assert_abs_diff_eq!(quadratic.chi[k][l], 0.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn duplicating_every_row_leaves_the_fit_unchanged() {
        let d = 2;
        let labels = test_labels(d);
        let truth = ResponseFunction {
            input_labels: labels.clone(),
            outputs: BTreeMap::from([("y".to_string(), synthetic_quadratic(d, 1.0))]),
        };
        let inputs = grid_inputs(d, 30, 11);
        let pairs = pairs_from_function(&truth, &inputs);
        let mut tripled = pairs.clone();
        tripled.extend(pairs.iter().cloned());
        tripled.extend(pairs.iter().cloned());
        let (fit_once, _) = fit_quadratic(&pairs, &labels).unwrap();
        let (fit_tripled, _) = fit_quadratic(&tripled, &labels).unwrap();
        let a = &fit_once.outputs["y"];
        let b = &fit_tripled.outputs["y"];
        assert_abs_diff_eq!(a.offset, b.offset, epsilon = 1e-9);
        for k in 0..d {
            assert_abs_diff_eq!(a.lin[k], b.lin[k], epsilon = 1e-9);
            for l in 0..d {
                assert_abs_diff_eq!(a.chi[k][l], b.chi[k][l], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficiency_reports_feature_directions() {
        let labels = test_labels(1);
        // Every input identical: only the mixed moments of one point exist,
        // so the quadratic basis {1, x, x²} is degenerate.
        let pairs: Vec<ResponsePair> = (0..50)
            .map(|_| ResponsePair {
                x: vec![0.02],
                outputs: BTreeMap::from([("y".to_string(), 1.0)]),
            })
            .collect();
        match fit_quadratic(&pairs, &labels) {
            Err(ResponseError::RankDeficient { directions }) => {
                assert!(!directions.is_empty());
                let joined = directions.join(" ");
                assert!(
                    joined.contains("x0") || joined.contains('1'),
                    "directions should name features: {joined}"
                );
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn pair_count_gates_error_then_warning_then_clean() {
        let d = 2; // p = 6 unknowns, recommended = ceil(6·ln6) = 11.
        let labels = test_labels(d);
        let truth = ResponseFunction {
            input_labels: labels.clone(),
            outputs: BTreeMap::from([("y".to_string(), synthetic_quadratic(d, 0.5))]),
        };
        let inputs = grid_inputs(d, 40, 21);

        let few = pairs_from_function(&truth, &inputs[..5]);
        match fit_quadratic(&few, &labels) {
            Err(ResponseError::NotEnoughPairs {
                got: 5,
                unknowns: 6,
                recommended,
            }) => assert_eq!(recommended, 11),
            other => panic!("expected NotEnoughPairs, got {other:?}"),
        }

        let marginal = pairs_from_function(&truth, &inputs[..8]);
        let (_, diagnostics) = fit_quadratic(&marginal, &labels).unwrap();
        assert_eq!(diagnostics.warnings.len(), 1);
        assert!(diagnostics.warnings[0].contains("below the recommended 11"));

        let plenty = pairs_from_function(&truth, &inputs[..12]);
        let (_, diagnostics) = fit_quadratic(&plenty, &labels).unwrap();
        assert!(diagnostics.warnings.is_empty());
    }

    #[test]
    fn refitting_on_predictions_is_idempotent() {
        let d = 3;
        let labels = test_labels(d);
        let truth = ResponseFunction {
            input_labels: labels.clone(),
            outputs: BTreeMap::from([("y".to_string(), synthetic_quadratic(d, 0.2))]),
        };
        let inputs = grid_inputs(d, 60, 5);
        // Perturb the outputs so the first fit has genuine residuals.
        let mut rng = stream_rng(17, 0);
        let pairs: Vec<ResponsePair> = inputs
            .iter()
            .map(|x| {
                let mut outputs = truth.predict(x).unwrap();
                for value in outputs.values_mut() {
                    *value += 0.01 * (rng.gen::<f64>() - 0.5);
                }
                ResponsePair {
                    x: x.clone(),
                    outputs,
                }
            })
            .collect();
        let (first, _) = fit_quadratic(&pairs, &labels).unwrap();
        let refit_pairs = pairs_from_function(&first, &inputs);
        let (second, diagnostics) = fit_quadratic(&refit_pairs, &labels).unwrap();
        assert!(diagnostics.residuals["y"] <= 1e-10);
        let a = &first.outputs["y"];
        let b = &second.outputs["y"];
        assert_abs_diff_eq!(a.offset, b.offset, epsilon = 1e-10);
        for k in 0..d {
            assert_abs_diff_eq!(a.lin[k], b.lin[k], epsilon = 1e-10);
            for l in 0..d {
                assert_abs_diff_eq!(a.chi[k][l], b.chi[k][l], epsilon = 1e-10);
            }
        }
    }

    /// A moderately noisy bias-free spec on the four-spin cell.
    fn bias_free_noise(beta: f64, sd: f64) -> NoiseSpec {
        NoiseSpec::new(
            vec![beta; 4],
            vec![0.0; 4],
            vec![sd; 4],
            BTreeMap::new(),
            beta,
            NoiseKind::Binary,
        )
        .unwrap()
    }

    #[test]
    fn flipping_all_input_fields_flips_field_outputs_only() {
        let roster = Roster::four_spin_cell();
        let noise = bias_free_noise(12.0, 0.04);
        let x = [0.03, -0.02, 0.05, 0.01, 0.04, -0.03, 0.02, 0.05];
        let mut flipped = x;
        for value in flipped.iter_mut().take(4) {
            *value = -*value;
        }
        let base = response_pair(&roster, &noise, &x, 1e-10).unwrap();
        let mirrored = response_pair(&roster, &noise, &flipped, 1e-10).unwrap();
        for (name, &value) in &base.outputs {
            let other = mirrored.outputs[name];
            if name.starts_with("h_") {
                assert_abs_diff_eq!(other, -value, epsilon = 1e-8);
            } else {
                assert_abs_diff_eq!(other, value, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn zero_noise_pipeline_is_linear_with_no_spurious_outputs() {
        let roster = Roster::four_spin_cell();
        let beta = 7.0;
        let noise = bias_free_noise(beta, 0.0);
        let options = PipelineOptions {
            n_models: 150,
            seed: 42,
            learn_grad_tol: 1e-11,
            ..PipelineOptions::default()
        };
        let (rf, _) = simulate_response_pipeline(&roster, &noise, &options).unwrap();
        for spurious in ["J_304_305", "J_308_309"] {
            let quadratic = &rf.outputs[spurious];
            assert!(quadratic.offset.abs() <= 1e-8);
            for k in 0..8 {
                assert!(quadratic.lin[k].abs() <= 1e-8);
                for l in 0..8 {
                    assert!(quadratic.chi[k][l].abs() <= 1e-8);
                }
            }
        }
        // Native outputs: pure β-scaled linear self-response.
        let field = &rf.outputs["h_304"];
        assert_abs_diff_eq!(field.lin[0], beta, epsilon = 1e-6);
        for k in 0..8 {
            for l in 0..8 {
                assert!(field.chi[k][l].abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn spurious_susceptibilities_are_negative_under_noise() {
        let roster = Roster::four_spin_cell();
        let noise = bias_free_noise(12.0, 0.04);
        let options = PipelineOptions {
            n_models: 400,
            seed: 7,
            ..PipelineOptions::default()
        };
        let (rf, _) = simulate_response_pipeline(&roster, &noise, &options).unwrap();
        // Spurious pair (304, 305): driven by the adjacent-coupling products
        // through the shared neighbours 308 and 309.
        let j_304_305 = &rf.outputs["J_304_305"];
        let idx = |label: &str| rf.input_index(label).unwrap();
        let via_308 = j_304_305.chi[idx("J_304_308")][idx("J_305_308")];
        let via_309 = j_304_305.chi[idx("J_304_309")][idx("J_305_309")];
        assert!(via_308 < 0.0, "via 308: {via_308}");
        assert!(via_309 < 0.0, "via 309: {via_309}");
        let j_308_309 = &rf.outputs["J_308_309"];
        let via_304 = j_308_309.chi[idx("J_304_308")][idx("J_304_309")];
        let via_305 = j_308_309.chi[idx("J_305_308")][idx("J_305_309")];
        assert!(via_304 < 0.0, "via 304: {via_304}");
        assert!(via_305 < 0.0, "via 305: {via_305}");
    }

    #[test]
    fn pipeline_dataset_is_deterministic_in_the_seed() {
        let roster = Roster::four_spin_cell();
        let noise = bias_free_noise(10.0, 0.03);
        let options = PipelineOptions {
            n_models: 12,
            seed: 31,
            ..PipelineOptions::default()
        };
        let a = pipeline_dataset(&roster, &noise, &options).unwrap();
        let b = pipeline_dataset(&roster, &noise, &options).unwrap();
        assert_eq!(a.len(), 12);
        for (pa, pb) in a.iter().zip(&b) {
            assert_eq!(pa.x, pb.x);
            assert_eq!(pa.outputs, pb.outputs);
        }
        let other = PipelineOptions {
            seed: 32,
            ..options
        };
        let c = pipeline_dataset(&roster, &noise, &other).unwrap();
        assert!(a.iter().zip(&c).any(|(pa, pc)| pa.x != pc.x));
    }

    #[test]
    fn finite_sample_mode_approaches_the_exact_outputs() {
        let roster = Roster::four_spin_cell();
        let noise = bias_free_noise(12.0, 0.04);
        let exact_options = PipelineOptions {
            n_models: 3,
            seed: 5,
            ..PipelineOptions::default()
        };
        let sampled_options = PipelineOptions {
            samples_per_model: Some(200_000),
            ..exact_options.clone()
        };
        let exact = pipeline_dataset(&roster, &noise, &exact_options).unwrap();
        let sampled = pipeline_dataset(&roster, &noise, &sampled_options).unwrap();
        for (pe, ps) in exact.iter().zip(&sampled) {
            assert_eq!(pe.x, ps.x);
            for (name, &value) in &pe.outputs {
                // 1/√M statistical error on natural coefficients ~ 1e-2.
                assert!(
                    (ps.outputs[name] - value).abs() < 0.15,
                    "{name}: sampled {} vs exact {value}",
                    ps.outputs[name]
                );
            }
        }
    }

    #[test]
    fn pairs_csv_roundtrip() {
        let roster = Roster::four_spin_cell();
        let noise = bias_free_noise(9.0, 0.02);
        let options = PipelineOptions {
            n_models: 4,
            seed: 13,
            ..PipelineOptions::default()
        };
        let pairs = pipeline_dataset(&roster, &noise, &options).unwrap();
        let labels = roster.input_labels();
        let csv = pairs_to_csv(&pairs, &labels);
        let (parsed_labels, parsed) = pairs_from_csv(&csv, labels.len()).unwrap();
        assert_eq!(parsed_labels, labels);
        assert_eq!(parsed.len(), pairs.len());
        for (a, b) in pairs.iter().zip(&parsed) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.outputs, b.outputs);
        }
        assert!(csv.lines().next().unwrap().starts_with("h_304,h_308,"));
    }

    #[test]
    fn response_function_json_roundtrip() {
        let labels = test_labels(2);
        let rf = ResponseFunction {
            input_labels: labels,
            outputs: BTreeMap::from([("y".to_string(), synthetic_quadratic(2, 0.4))]),
        };
        let json = rf.to_json_pretty();
        let parsed = ResponseFunction::from_json(&json).unwrap();
        assert_eq!(parsed, rf);
        assert!(json.contains("\"chi\""));
        assert!(json.contains("\"outputs\""));
    }
}
