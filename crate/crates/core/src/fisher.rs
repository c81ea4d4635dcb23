//! Information matrices for the classical and shadow estimators.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::PreparedOutcomes;
use crate::linalg::{herm_eig, CMat, DensityMatrix, HermMatrix};
use crate::pauli::{pauli_coefficients, product_trace};
use crate::povm::{outcome_count, MeasurementOutcome, OutcomeCounts, Sampler, ENUMERATION_MAX_QUBITS};
use crate::qhbm::{ModelEval, Order, StateFamily};
use crate::rng::rng_from_seed;
use crate::shadow::SNAPSHOT_WEIGHTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InfoKind {
    #[serde(rename = "I_C_emp")]
    ClassicalIEmp,
    #[serde(rename = "J_C_emp")]
    ClassicalJEmp,
    #[serde(rename = "I_C_model")]
    ClassicalIModel,
    #[serde(rename = "J_Q_bkm")]
    QuantumJBkm,
    #[serde(rename = "I_Q_emp")]
    ShadowIEmp,
    #[serde(rename = "J_Q_emp")]
    ShadowJEmp,
    #[serde(rename = "I_Q_model")]
    ShadowIModel,
}

impl InfoKind {
    /// Kinds built as expectations of outer products, hence PSD.
    pub fn is_gram(self) -> bool {
        matches!(
            self,
            InfoKind::ClassicalIEmp | InfoKind::ClassicalIModel | InfoKind::ShadowIEmp | InfoKind::ShadowIModel
        )
    }
}

/// A real symmetric p×p information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    pub entries: DMatrix<f64>,
}

impl InfoMatrix {
    pub fn new(kind: InfoKind, mut entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let asym = (&entries - entries.transpose()).amax();
        if asym > 1e-10 * entries.amax().max(1.0) {
            return Err(Error::NotHermitian { deviation: asym });
        }
        let t = entries.transpose();
        entries = (entries + t) * 0.5;
        Ok(Self { kind, entries })
    }

    fn from_upper(kind: InfoKind, p: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self { kind, entries: m }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Ascending eigenvalues.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum().first().copied().unwrap_or(0.0)
    }

    /// `|λ|_max / |λ|_min`; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        let abs: Vec<f64> = self.spectrum().iter().map(|v| v.abs()).collect();
        let hi = abs.iter().copied().fold(0.0, f64::max);
        let lo = abs.iter().copied().fold(f64::INFINITY, f64::min);
        if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }

    pub fn record(&self, theta: &[f64]) -> InfoMatrixRecord {
        let cond = self.condition_number();
        InfoMatrixRecord {
            kind: self.kind,
            theta: theta.to_vec(),
            entries: (0..self.dim())
                .map(|i| (0..self.dim()).map(|j| self.entries[(i, j)]).collect())
                .collect(),
            spectrum: self.spectrum(),
            condition_number: cond.is_finite().then_some(cond),
        }
    }
}

/// JSON form of an [`InfoMatrix`] with its evaluation point and spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoMatrixRecord {
    pub kind: InfoKind,
    pub theta: Vec<f64>,
    pub entries: Vec<Vec<f64>>,
    pub spectrum: Vec<f64>,
    /// `None` for singular matrices.
    pub condition_number: Option<f64>,
}

impl InfoMatrixRecord {
    pub fn to_matrix(&self) -> Result<InfoMatrix> {
        let p = self.entries.len();
        if self.entries.iter().any(|r| r.len() != p) {
            return Err(Error::Parse("information matrix rows have unequal lengths".into()));
        }
        InfoMatrix::new(self.kind, DMatrix::from_fn(p, p, |i, j| self.entries[i][j]))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(f)?)
    }
}

/// An expectation estimated by sampling, with entrywise standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledInfo {
    pub matrix: InfoMatrix,
    pub std_errors: DMatrix<f64>,
    pub samples: usize,
}

fn check_enumerable(qubits: usize) -> Result<()> {
    if qubits > ENUMERATION_MAX_QUBITS {
        return Err(Error::TooManyQubits {
            qubits,
            cap: ENUMERATION_MAX_QUBITS,
            what: "information-matrix enumeration",
        });
    }
    Ok(())
}

fn check_state(model: &dyn StateFamily, state: &HermMatrix) -> Result<()> {
    if state.qubits() != model.qubits() {
        return Err(Error::DimensionMismatch {
            expected: model.qubits(),
            found: state.qubits(),
        });
    }
    Ok(())
}

/// Per-outcome score vectors `∂_i log f(x)` and the matching Hessians.
struct ClassicalScores {
    weights: Vec<f64>,
    scores: Vec<Vec<f64>>,
    hessians: Vec<Vec<f64>>,
}

fn classical_scores(ev: &ModelEval, data: &PreparedOutcomes, with_hessian: bool) -> Result<ClassicalScores> {
    let p = ev.num_params;
    let probs = data.probabilities(ev)?;
    let d1: Vec<Vec<f64>> = ev.grad_state.iter().map(|m| data.traces(m)).collect();
    let m = probs.len();
    let scores: Vec<Vec<f64>> = (0..m).map(|x| (0..p).map(|i| d1[i][x] / probs[x]).collect()).collect();
    let mut hessians = Vec::new();
    if with_hessian {
        let mut packed = Vec::with_capacity(p * (p + 1) / 2);
        for i in 0..p {
            for j in i..p {
                packed.push(data.traces(ev.hess_state(i, j)));
            }
        }
        hessians = (0..m)
            .map(|x| {
                let mut h = vec![0.0; p * p];
                let mut k = 0;
                for i in 0..p {
                    for j in i..p {
                        let v = packed[k][x] / probs[x] - scores[x][i] * scores[x][j];
                        h[i * p + j] = v;
                        h[j * p + i] = v;
                        k += 1;
                    }
                }
                h
            })
            .collect();
    }
    Ok(ClassicalScores {
        weights: data.counts().map(|(_, c)| c / data.total()).collect(),
        scores,
        hessians,
    })
}

fn gram(kind: InfoKind, p: usize, weights: &[f64], vectors: &[Vec<f64>]) -> InfoMatrix {
    InfoMatrix::from_upper(kind, p, |i, j| {
        weights.iter().zip(vectors).map(|(w, v)| w * v[i] * v[j]).sum()
    })
}

fn prepare(model: &dyn StateFamily, counts: &OutcomeCounts) -> Result<PreparedOutcomes> {
    let data = PreparedOutcomes::new(counts)?;
    if data.qubits() != model.qubits() {
        return Err(Error::DimensionMismatch {
            expected: model.qubits(),
            found: data.qubits(),
        });
    }
    Ok(data)
}

/// `I = (1/n) Σ_α ∂ log f(x_α) ∂ log f(x_α)ᵀ` with `f(x) = Tr(Π_x σ(θ))`.
pub fn classical_i_emp(model: &dyn StateFamily, theta: &[f64], counts: &OutcomeCounts) -> Result<InfoMatrix> {
    let data = prepare(model, counts)?;
    let ev = model.evaluate(theta, Order::Gradient)?;
    let s = classical_scores(&ev, &data, false)?;
    Ok(gram(InfoKind::ClassicalIEmp, ev.num_params, &s.weights, &s.scores))
}

/// `J = −(1/n) Σ_α ∂² log f(x_α)`
pub fn classical_j_emp(model: &dyn StateFamily, theta: &[f64], counts: &OutcomeCounts) -> Result<InfoMatrix> {
    let data = prepare(model, counts)?;
    let ev = model.evaluate(theta, Order::Hessian)?;
    let s = classical_scores(&ev, &data, true)?;
    let p = ev.num_params;
    Ok(InfoMatrix::from_upper(InfoKind::ClassicalJEmp, p, |i, j| {
        -s.weights.iter().zip(&s.hessians).map(|(w, h)| w * h[i * p + j]).sum::<f64>()
    }))
}

/// Probabilities and `Tr(Π_x ∂_i σ)` over every outcome.
fn enumerated_classical(ev: &ModelEval, qubits: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let all = OutcomeCounts {
        qubits,
        total: outcome_count(qubits),
        entries: (0..outcome_count(qubits)).map(|i| (i, 1)).collect(),
    };
    let data = PreparedOutcomes::new(&all).expect("non-empty enumeration");
    let probs = data.traces(&ev.state);
    let d1 = ev.grad_state.iter().map(|m| data.traces(m)).collect();
    (probs, d1)
}

/// `Î_C = E_{h}[∂ log h ∂ log hᵀ]` with `h(x) = Tr(Π_x σ(θ))`, by exact enumeration.
pub fn classical_i_model(model: &dyn StateFamily, theta: &[f64]) -> Result<InfoMatrix> {
    let q = model.qubits();
    check_enumerable(q)?;
    let ev = model.evaluate(theta, Order::Gradient)?;
    let (probs, d1) = enumerated_classical(&ev, q);
    Ok(InfoMatrix::from_upper(InfoKind::ClassicalIModel, ev.num_params, |i, j| {
        probs
            .iter()
            .enumerate()
            .filter(|(_, &h)| h > 0.0)
            .map(|(x, &h)| d1[i][x] * d1[j][x] / h)
            .sum()
    }))
}

/// Sampled estimate of `Î_C` for systems beyond the enumeration cap.
pub fn classical_i_model_sampled(model: &dyn StateFamily, theta: &[f64], samples: usize, seed: u64) -> Result<SampledInfo> {
    let ev = model.evaluate(theta, Order::Gradient)?;
    let counts = draw(&ev, samples, seed)?;
    let data = PreparedOutcomes::new(&counts)?;
    let s = classical_scores(&ev, &data, false)?;
    Ok(sampled(InfoKind::ClassicalIModel, ev.num_params, &s.weights, &s.scores, samples))
}

fn draw(ev: &ModelEval, samples: usize, seed: u64) -> Result<OutcomeCounts> {
    if samples < 2 {
        return Err(Error::Empty("sample count"));
    }
    let sigma = DensityMatrix::from_trusted(ev.state.clone());
    Ok(Sampler::new(&sigma).sample_counts(samples, &mut rng_from_seed(seed)))
}

fn sampled(kind: InfoKind, p: usize, weights: &[f64], vectors: &[Vec<f64>], n: usize) -> SampledInfo {
    let matrix = gram(kind, p, weights, vectors);
    let nf = n as f64;
    let se = DMatrix::from_fn(p, p, |i, j| {
        let mean = matrix.entries[(i, j)];
        let second: f64 = weights.iter().zip(vectors).map(|(w, v)| w * (v[i] * v[j]).powi(2)).sum();
        ((second - mean * mean).max(0.0) * nf / (nf - 1.0) / nf).sqrt()
    });
    SampledInfo {
        matrix,
        std_errors: se,
        samples: n,
    }
}

/// BKM Fisher information `−Tr(state · ∂_i∂_j log σ(θ))`.
///
/// With `state = σ(θ)` this is Ĵ_Q; with a mean snapshot it is Ĵ_Q^emp.
pub fn bkm_j(model: &dyn StateFamily, theta: &[f64], state: &HermMatrix) -> Result<InfoMatrix> {
    check_state(model, state)?;
    let ev = model.evaluate(theta, Order::Hessian)?;
    Ok(bkm_from_eval(&ev, state, InfoKind::QuantumJBkm))
}

fn bkm_from_eval(ev: &ModelEval, state: &HermMatrix, kind: InfoKind) -> InfoMatrix {
    InfoMatrix::from_upper(kind, ev.num_params, |i, j| -state.trace_with(ev.hess_log(i, j)))
}

/// Ĵ_Q at the model's own state σ(θ).
pub fn bkm_j_model(model: &dyn StateFamily, theta: &[f64]) -> Result<InfoMatrix> {
    let ev = model.evaluate(theta, Order::Hessian)?;
    Ok(bkm_from_eval(&ev, &ev.state, InfoKind::QuantumJBkm))
}

/// Logarithmic mean `(λ − μ)/(log λ − log μ)`, with `c(λ, λ) = λ`.
pub fn log_mean(lambda: f64, mu: f64) -> f64 {
    let x = mu.ln() - lambda.ln();
    if x.abs() < 1e-300 {
        lambda
    } else {
        lambda * x.exp_m1() / x
    }
}

/// Derivatives of log σ in the eigenbasis of σ, with the spectrum.
fn eigen_logderivs(model: &dyn StateFamily, theta: &[f64]) -> Result<(Vec<f64>, Vec<CMat>)> {
    let ev = model.evaluate(theta, Order::Gradient)?;
    let eig = herm_eig(&ev.state);
    if eig.values[0] <= 0.0 {
        return Err(Error::NotPsd {
            min_eigenvalue: eig.values[0],
        });
    }
    let v = &eig.vectors;
    let rotated = ev.grad_log.iter().map(|a| v.adjoint() * a.as_mat() * v).collect();
    Ok((eig.values, rotated))
}

/// Integral form `∫₀¹ Tr(σ^t L_i σ^{1−t} L_j) dt` evaluated in closed form.
pub fn bkm_integral_oracle(model: &dyn StateFamily, theta: &[f64]) -> Result<InfoMatrix> {
    let (lam, a) = eigen_logderivs(model, theta)?;
    let d = lam.len();
    let c: Vec<f64> = (0..d * d).map(|kl| log_mean(lam[kl / d], lam[kl % d])).collect();
    Ok(InfoMatrix::from_upper(InfoKind::QuantumJBkm, a.len(), |i, j| {
        let mut s = 0.0;
        for k in 0..d {
            for l in 0..d {
                s += c[k * d + l] * (a[i][(k, l)] * a[j][(l, k)]).re;
            }
        }
        s
    }))
}

/// The same integral by the midpoint rule with `nodes` points.
pub fn bkm_quadrature(model: &dyn StateFamily, theta: &[f64], nodes: usize) -> Result<InfoMatrix> {
    let (lam, a) = eigen_logderivs(model, theta)?;
    let d = lam.len();
    let mut c = vec![0.0; d * d];
    for n in 0..nodes {
        let t = (n as f64 + 0.5) / nodes as f64;
        for k in 0..d {
            for l in 0..d {
                c[k * d + l] += lam[k].powf(t) * lam[l].powf(1.0 - t) / nodes as f64;
            }
        }
    }
    Ok(InfoMatrix::from_upper(InfoKind::QuantumJBkm, a.len(), |i, j| {
        let mut s = 0.0;
        for k in 0..d {
            for l in 0..d {
                s += c[k * d + l] * (a[i][(k, l)] * a[j][(l, k)]).re;
            }
        }
        s
    }))
}

/// Shadow scores `Tr(ρ̂_x ∂_i log σ)` for every prepared outcome.
fn shadow_scores(ev: &ModelEval, indices: &[usize], qubits: usize) -> Vec<Vec<f64>> {
    let coeffs: Vec<Vec<f64>> = ev.grad_log.iter().map(|m| pauli_coefficients(m.as_mat())).collect();
    indices
        .iter()
        .map(|&idx| {
            let o = MeasurementOutcome::from_index(idx, qubits);
            let (letters, mask) = (o.letters(), o.bit_mask());
            coeffs.iter().map(|c| product_trace(c, &letters, mask, SNAPSHOT_WEIGHTS)).collect()
        })
        .collect()
}

/// `Î_Q^emp = (1/n) Σ_α v_α v_αᵀ` with `v_α,i = Tr(ρ̂_α ∂_i log σ(θ))`.
pub fn shadow_i_emp(model: &dyn StateFamily, theta: &[f64], counts: &OutcomeCounts) -> Result<InfoMatrix> {
    let data = prepare(model, counts)?;
    let ev = model.evaluate(theta, Order::Gradient)?;
    let (indices, weights): (Vec<usize>, Vec<f64>) = data.counts().map(|(i, c)| (i, c / data.total())).unzip();
    let v = shadow_scores(&ev, &indices, data.qubits());
    Ok(gram(InfoKind::ShadowIEmp, ev.num_params, &weights, &v))
}

/// `Ĵ_Q^emp = −Tr(ρ̄ ∂_i∂_j log σ(θ))` from the mean snapshot.
pub fn shadow_j_emp(model: &dyn StateFamily, theta: &[f64], rho_bar: &HermMatrix) -> Result<InfoMatrix> {
    check_state(model, rho_bar)?;
    let ev = model.evaluate(theta, Order::Hessian)?;
    Ok(bkm_from_eval(&ev, rho_bar, InfoKind::ShadowJEmp))
}

/// `Î_Q = E_h[v vᵀ]` over all 6^q snapshots, `h(ρ̂_x) = Tr(Π_x σ(θ))`.
pub fn shadow_i_model(model: &dyn StateFamily, theta: &[f64]) -> Result<InfoMatrix> {
    let q = model.qubits();
    check_enumerable(q)?;
    let ev = model.evaluate(theta, Order::Gradient)?;
    let (probs, _) = enumerated_classical(&ev, q);
    let indices: Vec<usize> = (0..outcome_count(q)).collect();
    let v = shadow_scores(&ev, &indices, q);
    Ok(gram(InfoKind::ShadowIModel, ev.num_params, &probs, &v))
}

/// Sampled estimate of `Î_Q` for systems beyond the enumeration cap.
pub fn shadow_i_model_sampled(model: &dyn StateFamily, theta: &[f64], samples: usize, seed: u64) -> Result<SampledInfo> {
    let ev = model.evaluate(theta, Order::Gradient)?;
    let counts = draw(&ev, samples, seed)?;
    let (indices, weights): (Vec<usize>, Vec<f64>) = counts
        .entries
        .iter()
        .map(|&(i, c)| (i, c as f64 / samples as f64))
        .unzip();
    let v = shadow_scores(&ev, &indices, counts.qubits);
    Ok(sampled(InfoKind::ShadowIModel, ev.num_params, &weights, &v, samples))
}

/// `Tr(σ(θ) ∂_i log σ(θ))` for every parameter.
pub fn score_identity(model: &dyn StateFamily, theta: &[f64]) -> Result<Vec<f64>> {
    let ev = model.evaluate(theta, Order::Gradient)?;
    Ok(ev.grad_log.iter().map(|g| ev.state.trace_with(g)).collect())
}
