use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::circuit::{packed_index, CircuitDerivatives, CircuitSpec};
use super::ebm::{Boltzmann, EbmSpec};
use crate::error::{Error, Result};
use crate::linalg::{CMat, DensityMatrix, HermMatrix};

/// How many derivatives [`StateFamily::evaluate`] must produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    Gradient,
    Hessian,
}

/// σ(θ), log σ(θ) and their parameter derivatives at one point.
///
/// Hessians are stored as packed upper triangles; use [`ModelEval::hess_log`]
/// and [`ModelEval::hess_state`] for symmetric access.
#[derive(Debug, Clone)]
pub struct ModelEval {
    pub num_params: usize,
    pub state: HermMatrix,
    pub log_state: HermMatrix,
    pub grad_log: Vec<HermMatrix>,
    pub grad_state: Vec<HermMatrix>,
    hess_log: Vec<HermMatrix>,
    hess_state: Vec<HermMatrix>,
}

impl ModelEval {
    pub fn has_hessian(&self) -> bool {
        !self.hess_log.is_empty()
    }

    pub fn hess_log(&self, i: usize, j: usize) -> &HermMatrix {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        &self.hess_log[packed_index(self.num_params, a, b)]
    }

    pub fn hess_state(&self, i: usize, j: usize) -> &HermMatrix {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        &self.hess_state[packed_index(self.num_params, a, b)]
    }

    /// Restricts every derivative to the parameters listed in `free`.
    fn select(self, free: &[usize]) -> ModelEval {
        let full_p = self.num_params;
        let pick = |v: &[HermMatrix]| free.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        let grad_log = if self.grad_log.is_empty() { vec![] } else { pick(&self.grad_log) };
        let grad_state = if self.grad_state.is_empty() { vec![] } else { pick(&self.grad_state) };
        let mut hess_log = Vec::new();
        let mut hess_state = Vec::new();
        if !self.hess_log.is_empty() {
            for (a, &i) in free.iter().enumerate() {
                for &j in &free[a..] {
                    let (x, y) = if i <= j { (i, j) } else { (j, i) };
                    hess_log.push(self.hess_log[packed_index(full_p, x, y)].clone());
                    hess_state.push(self.hess_state[packed_index(full_p, x, y)].clone());
                }
            }
        }
        ModelEval {
            num_params: free.len(),
            state: self.state,
            log_state: self.log_state,
            grad_log,
            grad_state,
            hess_log,
            hess_state,
        }
    }
}

/// A differentiable family of full-rank states σ(θ).
pub trait StateFamily: Send + Sync {
    fn name(&self) -> &str;
    fn qubits(&self) -> usize;
    fn num_params(&self) -> usize;
    fn evaluate(&self, theta: &[f64], order: Order) -> Result<ModelEval>;

    fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::ParamLength {
                expected: self.num_params(),
                found: theta.len(),
            });
        }
        Ok(())
    }
}

/// `σ(θ) = U(θ'') e^{−K(θ')} U(θ'')^H / Z(θ')`.
///
/// The parameter vector holds the EBM block θ' first, then the circuit block θ''.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QhbmModel {
    name: String,
    ebm: EbmSpec,
    circuit: CircuitSpec,
}

impl QhbmModel {
    pub fn new(name: impl Into<String>, ebm: EbmSpec, circuit: CircuitSpec) -> Result<Self> {
        if ebm.nodes() != circuit.qubits() {
            return Err(Error::InvalidModel(format!(
                "EBM has {} nodes but circuit acts on {} qubits",
                ebm.nodes(),
                circuit.qubits()
            )));
        }
        Ok(Self {
            name: name.into(),
            ebm,
            circuit,
        })
    }

    /// Boltzmann machine on three nodes with a single R_y layer (9 parameters).
    pub fn m1() -> Self {
        Self::new("M1", EbmSpec::new(3).expect("3 nodes"), CircuitSpec::pqc1(3)).expect("consistent")
    }

    /// Boltzmann machine on three nodes with the layered CNOT circuit (15 parameters).
    pub fn m2() -> Self {
        Self::new("M2", EbmSpec::new(3).expect("3 nodes"), CircuitSpec::pqc2()).expect("consistent")
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "M1" => Ok(Self::m1()),
            "M2" => Ok(Self::m2()),
            other => Err(Error::InvalidModel(format!("unknown model name `{other}`"))),
        }
    }

    pub fn ebm(&self) -> &EbmSpec {
        &self.ebm
    }

    pub fn circuit(&self) -> &CircuitSpec {
        &self.circuit
    }

    pub fn ebm_params(&self) -> usize {
        self.ebm.num_params()
    }

    /// (θ', θ'')
    pub fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        theta.split_at(self.ebm.num_params())
    }

    pub fn model_state(&self, theta: &[f64]) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_trusted(self.evaluate(theta, Order::Value)?.state))
    }

    /// Analytic `log σ = −U K U^H − log Z · I`.
    pub fn log_model(&self, theta: &[f64]) -> Result<HermMatrix> {
        Ok(self.evaluate(theta, Order::Value)?.log_state)
    }

    pub fn grad_log_model(&self, theta: &[f64]) -> Result<Vec<HermMatrix>> {
        Ok(self.evaluate(theta, Order::Gradient)?.grad_log)
    }

    /// Full symmetric p×p array of `∂_i∂_j log σ`.
    pub fn hess_log_model(&self, theta: &[f64]) -> Result<Vec<Vec<HermMatrix>>> {
        let ev = self.evaluate(theta, Order::Hessian)?;
        let p = ev.num_params;
        Ok((0..p)
            .map(|i| (0..p).map(|j| ev.hess_log(i, j).clone()).collect())
            .collect())
    }
}

/// `A diag(d) B^H`
fn sandwich(a: &CMat, d: &[f64], b: &CMat) -> CMat {
    let n = a.nrows();
    let mut ad = a.clone();
    for (k, &dk) in d.iter().enumerate() {
        for r in 0..n {
            ad[(r, k)] *= dk;
        }
    }
    ad * b.adjoint()
}

/// `X + X^H` for `X = A diag(d) B^H`
fn sym_sandwich(a: &CMat, d: &[f64], b: &CMat) -> CMat {
    let x = sandwich(a, d, b);
    let xh = x.adjoint();
    x + xh
}

fn herm(m: CMat) -> HermMatrix {
    HermMatrix::from_product(m)
}

impl StateFamily for QhbmModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn qubits(&self) -> usize {
        self.ebm.nodes()
    }

    fn num_params(&self) -> usize {
        self.ebm.num_params() + self.circuit.param_count()
    }

    fn evaluate(&self, theta: &[f64], order: Order) -> Result<ModelEval> {
        self.check_params(theta)?;
        let (tp, tc) = self.split(theta);
        let b = Boltzmann::new(&self.ebm, tp)?;
        let cd = CircuitDerivatives::new(&self.circuit, tc, order >= Order::Gradient, order >= Order::Hessian)?;
        let u = &cd.u;
        let dim = u.nrows();
        let ke = self.ebm.num_params();
        let kc = self.circuit.param_count();
        let p = ke + kc;

        let log_p = b.log_probs();
        let state = herm(sandwich(u, &b.probs, u));
        let log_state = herm(sandwich(u, &log_p, u));

        let mut grad_log = Vec::new();
        let mut grad_state = Vec::new();
        let mut hess_log = Vec::new();
        let mut hess_state = Vec::new();
        if order >= Order::Gradient {
            let centered: Vec<Vec<f64>> = (0..ke).map(|k| b.centered(k)).collect();
            let dprob: Vec<Vec<f64>> = centered
                .iter()
                .map(|c| c.iter().zip(&b.probs).map(|(c, p)| c * p).collect())
                .collect();
            let neg_e: Vec<f64> = b.energies.iter().map(|e| -e).collect();
            let phi: Vec<Vec<f64>> = (0..ke)
                .map(|k| b.features.iter().map(|f| f[k]).collect())
                .collect();

            for k in 0..ke {
                grad_log.push(herm(sandwich(u, &centered[k], u)));
                grad_state.push(herm(sandwich(u, &dprob[k], u)));
            }
            for j in 0..kc {
                grad_log.push(herm(sym_sandwich(&cd.du[j], &neg_e, u)));
                grad_state.push(herm(sym_sandwich(&cd.du[j], &b.probs, u)));
            }

            if order >= Order::Hessian {
                let id = CMat::identity(dim, dim);
                for i in 0..p {
                    for j in i..p {
                        let (hl, hs) = match (i < ke, j < ke) {
                            (true, true) => {
                                let cov = b.cov[i * ke + j];
                                let d2p: Vec<f64> = (0..dim)
                                    .map(|x| b.probs[x] * (centered[i][x] * centered[j][x] - cov))
                                    .collect();
                                (&id * Complex64::new(-cov, 0.0), sandwich(u, &d2p, u))
                            }
                            (true, false) => {
                                let du = &cd.du[j - ke];
                                (sym_sandwich(du, &phi[i], u), sym_sandwich(du, &dprob[i], u))
                            }
                            _ => {
                                let (a, c) = (i - ke, j - ke);
                                let d2u = cd.d2(a, c);
                                let (da, dc) = (&cd.du[a], &cd.du[c]);
                                let hl = sym_sandwich(d2u, &neg_e, u) + sym_sandwich(da, &neg_e, dc);
                                let hs = sym_sandwich(d2u, &b.probs, u) + sym_sandwich(da, &b.probs, dc);
                                (hl, hs)
                            }
                        };
                        hess_log.push(herm(hl));
                        hess_state.push(herm(hs));
                    }
                }
            }
        }
        Ok(ModelEval {
            num_params: p,
            state,
            log_state,
            grad_log,
            grad_state,
            hess_log,
            hess_state,
        })
    }
}

/// A sub-family of a QHBM with all but the `free` parameters pinned to `anchor`.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    name: String,
    base: QhbmModel,
    anchor: Vec<f64>,
    free: Vec<usize>,
}

impl FrozenModel {
    pub fn new(base: QhbmModel, anchor: Vec<f64>, free: Vec<usize>) -> Result<Self> {
        base.check_params(&anchor)?;
        if free.is_empty() {
            return Err(Error::Empty("free parameter list"));
        }
        let mut sorted = free.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != free.len() || *sorted.last().unwrap() >= anchor.len() {
            return Err(Error::InvalidModel(format!("bad free parameter set {free:?}")));
        }
        let name = format!("{}[{}]", base.name(), free.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","));
        Ok(Self {
            name,
            base,
            anchor,
            free,
        })
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Free-parameter values at the anchor.
    pub fn anchor_free(&self) -> Vec<f64> {
        self.free.iter().map(|&i| self.anchor[i]).collect()
    }

    pub fn expand(&self, theta: &[f64]) -> Vec<f64> {
        let mut full = self.anchor.clone();
        for (&i, &t) in self.free.iter().zip(theta) {
            full[i] = t;
        }
        full
    }
}

impl StateFamily for FrozenModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn qubits(&self) -> usize {
        self.base.qubits()
    }

    fn num_params(&self) -> usize {
        self.free.len()
    }

    fn evaluate(&self, theta: &[f64], order: Order) -> Result<ModelEval> {
        self.check_params(theta)?;
        Ok(self.base.evaluate(&self.expand(theta), order)?.select(&self.free))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{herm_exp, herm_log, DEFAULT_LOG_FLOOR};
    use crate::qhbm::ebm::latent_hamiltonian;
    use crate::qhbm::circuit::circuit_unitary;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_theta(p: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..p).map(|_| rng.gen_range(-2.0..2.0)).collect()
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(QhbmModel::m1().num_params(), 9);
        assert_eq!(QhbmModel::m2().num_params(), 15);
        assert!(QhbmModel::by_name("M3").is_err());
        assert!(QhbmModel::new("x", EbmSpec::new(2).unwrap(), CircuitSpec::pqc1(3)).is_err());
    }

    #[test]
    fn zero_parameters_give_maximally_mixed() {
        for m in [QhbmModel::m1(), QhbmModel::m2()] {
            let p = m.num_params();
            let s = m.model_state(&vec![0.0; p]).unwrap();
            assert!(s.matrix().sub(&HermMatrix::identity(8).scale(0.125)).frobenius() < 1e-14);
            let l = m.log_model(&vec![0.0; p]).unwrap();
            assert!(l.sub(&HermMatrix::identity(8).scale(-3.0 * 2f64.ln())).frobenius() < 1e-13);
        }
    }

    #[test]
    fn circuit_free_state_is_boltzmann_diagonal() {
        let m = QhbmModel::m1();
        let theta = [0.4, -0.3, 0.9, 0.2, -0.7, 0.5, 0.0, 0.0, 0.0];
        let b = Boltzmann::new(m.ebm(), &theta[..6]).unwrap();
        let s = m.model_state(&theta).unwrap();
        let l = m.log_model(&theta).unwrap();
        for x in 0..8 {
            assert!((s.matrix().as_mat()[(x, x)].re - b.probs[x]).abs() < 1e-15);
            assert!((l.as_mat()[(x, x)].re - (-b.energies[x] - b.log_z)).abs() < 1e-13);
        }
    }

    #[test]
    fn state_matches_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for m in [QhbmModel::m1(), QhbmModel::m2()] {
            for _ in 0..5 {
                let theta = random_theta(m.num_params(), &mut rng);
                let (tp, tc) = m.split(&theta);
                let k = latent_hamiltonian(m.ebm(), tp).unwrap();
                let u = circuit_unitary(m.circuit(), tc).unwrap();
                let h = HermMatrix::from_product(&u * k.as_mat() * u.adjoint()).scale(-1.0);
                let e = herm_exp(&h).unwrap();
                let oracle = e.scale(1.0 / e.trace());
                let s = m.model_state(&theta).unwrap();
                assert!(s.matrix().sub(&oracle).frobenius() < 1e-10);
                assert!((s.matrix().trace() - 1.0).abs() < 1e-10);

                let log_oracle = herm_log(s.matrix(), DEFAULT_LOG_FLOOR).unwrap();
                assert!(m.log_model(&theta).unwrap().sub(&log_oracle).frobenius() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_point_derivative_structure() {
        let m = QhbmModel::m2();
        let ev = m.evaluate(&[0.0; 15], Order::Hessian).unwrap();
        // circuit gradients vanish when K = 0
        for j in 6..15 {
            assert!(ev.grad_log[j].frobenius() < 1e-14);
        }
        // EBM block of the Hessian is −δ_kl·I
        for k in 0..6 {
            for l in 0..6 {
                let expect = if k == l { -1.0 } else { 0.0 };
                let h = ev.hess_log(k, l);
                assert!(h.sub(&HermMatrix::identity(8).scale(expect)).frobenius() < 1e-13);
            }
        }
    }

    #[test]
    fn hessian_symmetric_access() {
        let m = QhbmModel::m1();
        let theta: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        let h = m.hess_log_model(&theta).unwrap();
        for (i, row) in h.iter().enumerate() {
            for (j, hij) in row.iter().enumerate() {
                assert_eq!(*hij, h[j][i]);
            }
        }
    }

    #[test]
    fn frozen_model_selects_parameters() {
        let base = QhbmModel::m1();
        let anchor: Vec<f64> = (0..9).map(|i| 0.05 * i as f64 - 0.2).collect();
        let fm = FrozenModel::new(base.clone(), anchor.clone(), vec![7, 2]).unwrap();
        assert_eq!(fm.num_params(), 2);
        let ev = fm.evaluate(&[0.3, -0.1], Order::Hessian).unwrap();
        let full = base.evaluate(&fm.expand(&[0.3, -0.1]), Order::Hessian).unwrap();
        assert_eq!(ev.grad_log[0], full.grad_log[7]);
        assert_eq!(ev.grad_state[1], full.grad_state[2]);
        assert_eq!(ev.hess_log(0, 1), full.hess_log(7, 2));
        assert_eq!(ev.hess_state(1, 1), full.hess_state(2, 2));
        assert!(FrozenModel::new(base.clone(), anchor.clone(), vec![]).is_err());
        assert!(FrozenModel::new(base.clone(), anchor.clone(), vec![9]).is_err());
        assert!(FrozenModel::new(base, anchor, vec![1, 1]).is_err());
    }
}
