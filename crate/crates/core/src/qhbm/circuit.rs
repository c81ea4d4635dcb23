//! Parameterized circuits of `R_y(θ) = exp(−iθY)` rotations and CNOTs.
//!
//! Gates are applied in list order, so `U = G_m ⋯ G_2 G_1`. Derivatives insert
//! the generator `−iY` on the rotated qubit right after the differentiated
//! gate, since `dR_y(θ)/dθ = −iY R_y(θ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "lowercase", deny_unknown_fields)]
pub enum Gate {
    Ry { qubit: usize, param: usize },
    Cnot { control: usize, target: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    qubits: usize,
    gates: Vec<Gate>,
    param_count: usize,
}

impl CircuitSpec {
    pub fn new(qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut seen = Vec::new();
        for g in &gates {
            match *g {
                Gate::Ry { qubit, param } => {
                    if qubit >= qubits {
                        return Err(Error::InvalidModel(format!("R_y on qubit {qubit} of {qubits}")));
                    }
                    if seen.len() <= param {
                        seen.resize(param + 1, false);
                    }
                    if seen[param] {
                        return Err(Error::InvalidModel(format!("parameter {param} used twice")));
                    }
                    seen[param] = true;
                }
                Gate::Cnot { control, target } => {
                    if control >= qubits || target >= qubits || control == target {
                        return Err(Error::InvalidModel(format!("bad CNOT({control}, {target})")));
                    }
                }
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::InvalidModel(format!("parameter {missing} unused")));
        }
        Ok(Self {
            qubits,
            gates,
            param_count: seen.len(),
        })
    }

    /// A single R_y layer, one parameter per qubit.
    pub fn pqc1(qubits: usize) -> Self {
        let gates = (0..qubits).map(|q| Gate::Ry { qubit: q, param: q }).collect();
        Self::new(qubits, gates).expect("valid layer")
    }

    /// Three R_y layers on three qubits interleaved with CNOT pairs.
    pub fn pqc2() -> Self {
        let layer = |offset: usize| (0..3).map(move |q| Gate::Ry { qubit: q, param: offset + q });
        let mut gates: Vec<Gate> = layer(0).collect();
        gates.push(Gate::Cnot { control: 0, target: 1 });
        gates.extend(layer(3));
        gates.push(Gate::Cnot { control: 0, target: 1 });
        gates.push(Gate::Cnot { control: 1, target: 2 });
        gates.extend(layer(6));
        gates.push(Gate::Cnot { control: 1, target: 2 });
        Self::new(3, gates).expect("valid circuit")
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_count {
            return Err(Error::ParamLength {
                expected: self.param_count,
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// `G_m ⋯ G_1` with `−iY` inserted after every gate whose parameter is in `marks`
    /// (a parameter listed twice gets `(−iY)²`).
    fn product(&self, theta: &[f64], marks: &[usize]) -> CMat {
        let dim = 1usize << self.qubits;
        let mut m = CMat::identity(dim, dim);
        for g in &self.gates {
            match *g {
                Gate::Ry { qubit, param } => {
                    let (s, c) = theta[param].sin_cos();
                    apply_real_2x2(&mut m, qubit, [[c, -s], [s, c]]);
                    for _ in marks.iter().filter(|&&k| k == param) {
                        apply_real_2x2(&mut m, qubit, [[0.0, -1.0], [1.0, 0.0]]);
                    }
                }
                Gate::Cnot { control, target } => apply_cnot(&mut m, control, target),
            }
        }
        m
    }
}

/// Left-multiplies `m` by a real single-qubit operator on `qubit`.
fn apply_real_2x2(m: &mut CMat, qubit: usize, g: [[f64; 2]; 2]) {
    let dim = m.nrows();
    let bit = 1usize << qubit;
    for col in 0..m.ncols() {
        for r0 in (0..dim).filter(|r| r & bit == 0) {
            let r1 = r0 | bit;
            let (a, b) = (m[(r0, col)], m[(r1, col)]);
            m[(r0, col)] = a * g[0][0] + b * g[0][1];
            m[(r1, col)] = a * g[1][0] + b * g[1][1];
        }
    }
}

fn apply_cnot(m: &mut CMat, control: usize, target: usize) {
    let dim = m.nrows();
    let (cb, tb) = (1usize << control, 1usize << target);
    for r in (0..dim).filter(|r| r & cb != 0 && r & tb == 0) {
        m.swap_rows(r, r | tb);
    }
}

pub fn circuit_unitary(c: &CircuitSpec, theta: &[f64]) -> Result<CMat> {
    c.check(theta)?;
    Ok(c.product(theta, &[]))
}

pub fn circuit_unitary_deriv(c: &CircuitSpec, theta: &[f64], j: usize) -> Result<CMat> {
    c.check(theta)?;
    check_index(c, j)?;
    Ok(c.product(theta, &[j]))
}

pub fn circuit_unitary_deriv2(c: &CircuitSpec, theta: &[f64], j: usize, k: usize) -> Result<CMat> {
    c.check(theta)?;
    check_index(c, j)?;
    check_index(c, k)?;
    Ok(c.product(theta, &[j, k]))
}

fn check_index(c: &CircuitSpec, j: usize) -> Result<()> {
    if j >= c.param_count {
        return Err(Error::ParamLength {
            expected: c.param_count,
            found: j + 1,
        });
    }
    Ok(())
}

/// `U`, all `∂_j U`, and optionally all `∂_j∂_k U` (packed upper triangle).
#[derive(Debug, Clone)]
pub(crate) struct CircuitDerivatives {
    pub u: CMat,
    pub du: Vec<CMat>,
    pub d2u: Vec<CMat>,
}

impl CircuitDerivatives {
    pub fn new(c: &CircuitSpec, theta: &[f64], first: bool, second: bool) -> Result<Self> {
        c.check(theta)?;
        let p = c.param_count;
        let u = c.product(theta, &[]);
        let du = if first || second {
            (0..p).map(|j| c.product(theta, &[j])).collect()
        } else {
            Vec::new()
        };
        let mut d2u = Vec::new();
        if second {
            for j in 0..p {
                for k in j..p {
                    d2u.push(if j == k { -&u } else { c.product(theta, &[j, k]) });
                }
            }
        }
        Ok(Self { u, du, d2u })
    }

    pub fn d2(&self, j: usize, k: usize) -> &CMat {
        let p = self.du.len();
        let (a, b) = if j <= k { (j, k) } else { (k, j) };
        &self.d2u[packed_index(p, a, b)]
    }
}

/// Index of `(i, j)`, `i <= j`, in a row-major packed upper triangle of size p.
pub(crate) fn packed_index(p: usize, i: usize, j: usize) -> usize {
    i * (2 * p - i - 1) / 2 + j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn packed_layout() {
        let p = 4;
        let mut expect = 0;
        for i in 0..p {
            for j in i..p {
                assert_eq!(packed_index(p, i, j), expect);
                expect += 1;
            }
        }
    }

    #[test]
    fn structure_validation() {
        assert_eq!(CircuitSpec::pqc1(3).param_count(), 3);
        assert_eq!(CircuitSpec::pqc2().param_count(), 9);
        assert!(CircuitSpec::new(2, vec![Gate::Ry { qubit: 2, param: 0 }]).is_err());
        assert!(CircuitSpec::new(2, vec![Gate::Ry { qubit: 0, param: 1 }]).is_err());
        assert!(CircuitSpec::new(
            2,
            vec![Gate::Ry { qubit: 0, param: 0 }, Gate::Ry { qubit: 1, param: 0 }]
        )
        .is_err());
        assert!(CircuitSpec::new(2, vec![Gate::Cnot { control: 1, target: 1 }]).is_err());
    }

    #[test]
    fn zero_angles_without_cnots_is_identity() {
        let u = circuit_unitary(&CircuitSpec::pqc1(3), &[0.0; 3]).unwrap();
        assert!(frobenius(&(u - CMat::identity(8, 8))) < 1e-15);
    }

    #[test]
    fn full_angle_convention() {
        // qubit-0 factor is [[cos t, -sin t], [sin t, cos t]] with no half angle
        let t = std::f64::consts::FRAC_PI_2;
        let u = circuit_unitary(&CircuitSpec::pqc1(3), &[t, 0.0, 0.0]).unwrap();
        assert!((u[(0, 0)].re - t.cos()).abs() < 1e-15);
        assert!((u[(0, 1)].re + t.sin()).abs() < 1e-15);
        assert!((u[(1, 0)].re - t.sin()).abs() < 1e-15);
        assert!((u[(1, 1)].re - t.cos()).abs() < 1e-15);
    }

    #[test]
    fn cnot_action() {
        let c = CircuitSpec::new(2, vec![Gate::Cnot { control: 0, target: 1 }]).unwrap();
        let u = circuit_unitary(&c, &[]).unwrap();
        // |01> (index 1: qubit0 = 1) -> |11> (index 3)
        assert_eq!(u[(3, 1)].re, 1.0);
        assert_eq!(u[(0, 0)].re, 1.0);
        assert_eq!(u[(2, 2)].re, 1.0);
        assert_eq!(u[(1, 3)].re, 1.0);
    }

    #[test]
    fn unitarity_and_finite_differences() {
        let c = CircuitSpec::pqc2();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let eps = 1e-4;
        for _ in 0..5 {
            let theta: Vec<f64> = (0..9).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let u = circuit_unitary(&c, &theta).unwrap();
            assert!(frobenius(&(u.adjoint() * &u - CMat::identity(8, 8))) < 1e-10);
            for j in 0..9 {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += eps;
                tm[j] -= eps;
                let fd = (circuit_unitary(&c, &tp).unwrap() - circuit_unitary(&c, &tm).unwrap())
                    / Complex64::new(2.0 * eps, 0.0);
                let an = circuit_unitary_deriv(&c, &theta, j).unwrap();
                assert!(frobenius(&(fd - an)) < 1e-6);
                for k in 0..9 {
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[k] += eps;
                    tm[k] -= eps;
                    let fd = (circuit_unitary_deriv(&c, &tp, j).unwrap()
                        - circuit_unitary_deriv(&c, &tm, j).unwrap())
                        / Complex64::new(2.0 * eps, 0.0);
                    let an = circuit_unitary_deriv2(&c, &theta, j, k).unwrap();
                    assert!(frobenius(&(fd - an)) < 1e-6, "({j},{k})");
                }
            }
        }
    }

    #[test]
    fn derivative_bundle_matches_direct() {
        let c = CircuitSpec::pqc2();
        let theta: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 - 0.3).collect();
        let d = CircuitDerivatives::new(&c, &theta, true, true).unwrap();
        for j in 0..9 {
            for k in 0..9 {
                let direct = circuit_unitary_deriv2(&c, &theta, j, k).unwrap();
                assert!(frobenius(&(direct - d.d2(j, k))) < 1e-14);
            }
        }
    }
}
