//! Fully-connected visible-unit Boltzmann machine over bit strings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::HermMatrix;

/// Energy `E(x) = −Σ_i a_i s_i − Σ_{i<j} w_ij s_i s_j` with spins `s_i = 1 − 2 x_i`.
///
/// Parameters are laid out as the biases `a_0..a_{n-1}` followed by the pair
/// weights in lexicographic `(i, j)` order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EbmSpec {
    nodes: usize,
}

impl EbmSpec {
    pub fn new(nodes: usize) -> Result<Self> {
        if nodes == 0 || nodes > crate::linalg::MAX_QUBITS {
            return Err(Error::InvalidModel(format!("EBM node count {nodes} out of range")));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn num_params(&self) -> usize {
        self.nodes + self.nodes * (self.nodes - 1) / 2
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let n = self.nodes;
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect()
    }

    /// Sufficient statistics `φ(x)`, so that `E(x) = −θ'·φ(x)`.
    pub fn features(&self, x: usize) -> Vec<f64> {
        let spin = |i: usize| if (x >> i) & 1 == 0 { 1.0 } else { -1.0 };
        let mut f: Vec<f64> = (0..self.nodes).map(spin).collect();
        f.extend(self.pairs().into_iter().map(|(i, j)| spin(i) * spin(j)));
        f
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.num_params() {
            return Err(Error::ParamLength {
                expected: self.num_params(),
                found: theta.len(),
            });
        }
        Ok(())
    }
}

pub fn ebm_energy(ebm: &EbmSpec, theta: &[f64], x: usize) -> Result<f64> {
    ebm.check(theta)?;
    Ok(-ebm.features(x).iter().zip(theta).map(|(f, t)| f * t).sum::<f64>())
}

/// Diagonal `K = Σ_x E(x)|x><x|`.
pub fn latent_hamiltonian(ebm: &EbmSpec, theta: &[f64]) -> Result<HermMatrix> {
    let energies = (0..1usize << ebm.nodes)
        .map(|x| ebm_energy(ebm, theta, x))
        .collect::<Result<Vec<_>>>()?;
    Ok(HermMatrix::from_real_diagonal(&energies))
}

pub fn log_partition(ebm: &EbmSpec, theta: &[f64]) -> Result<f64> {
    Ok(Boltzmann::new(ebm, theta)?.log_z)
}

/// Boltzmann distribution of the EBM and its feature moments.
#[derive(Debug, Clone)]
pub struct Boltzmann {
    pub energies: Vec<f64>,
    pub probs: Vec<f64>,
    pub log_z: f64,
    /// φ(x) per basis state
    pub features: Vec<Vec<f64>>,
    /// ⟨φ_k⟩
    pub mean: Vec<f64>,
    /// Cov(φ_k, φ_l), row-major
    pub cov: Vec<f64>,
}

impl Boltzmann {
    pub fn new(ebm: &EbmSpec, theta: &[f64]) -> Result<Self> {
        ebm.check(theta)?;
        let dim = 1usize << ebm.nodes;
        let features: Vec<Vec<f64>> = (0..dim).map(|x| ebm.features(x)).collect();
        let energies: Vec<f64> = features
            .iter()
            .map(|f| -f.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        // max-shifted log-sum-exp of −E
        let shift = energies.iter().map(|e| -e).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = energies.iter().map(|e| (-e - shift).exp()).sum();
        let log_z = shift + sum.ln();
        let probs: Vec<f64> = energies.iter().map(|e| (-e - log_z).exp()).collect();

        let k = theta.len();
        let mut mean = vec![0.0; k];
        for (p, f) in probs.iter().zip(&features) {
            for (m, fv) in mean.iter_mut().zip(f) {
                *m += p * fv;
            }
        }
        let mut cov = vec![0.0; k * k];
        for (p, f) in probs.iter().zip(&features) {
            for a in 0..k {
                let da = f[a] - mean[a];
                for b in a..k {
                    cov[a * k + b] += p * da * (f[b] - mean[b]);
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                cov[a * k + b] = cov[b * k + a];
            }
        }
        Ok(Self {
            energies,
            probs,
            log_z,
            features,
            mean,
            cov,
        })
    }

    pub fn num_params(&self) -> usize {
        self.mean.len()
    }

    /// log p(x) = −E(x) − log Z
    pub fn log_probs(&self) -> Vec<f64> {
        self.energies.iter().map(|e| -e - self.log_z).collect()
    }

    /// ∂_k log p(x) = φ_k(x) − ⟨φ_k⟩
    pub fn centered(&self, k: usize) -> Vec<f64> {
        self.features.iter().map(|f| f[k] - self.mean[k]).collect()
    }
}
