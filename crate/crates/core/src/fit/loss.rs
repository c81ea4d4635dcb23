//! Per-shot losses: negative log-likelihood of Pauli-6 outcomes and the
//! negative shadow cross entropy `−Tr(ρ̄ log σ(θ))`.

use crate::error::{Error, Result};
use crate::linalg::HermMatrix;
use crate::pauli::{pauli_coefficients, product_trace};
use crate::povm::{MeasurementOutcome, OutcomeCounts, POVM_WEIGHTS};
use crate::qhbm::{ModelEval, Order, StateFamily};

/// Probabilities below this are treated as outside the model's support.
pub const SUPPORT_FLOOR: f64 = 1e-300;

fn check_qubits(model: &dyn StateFamily, qubits: usize) -> Result<()> {
    if model.qubits() != qubits {
        return Err(Error::DimensionMismatch {
            expected: model.qubits(),
            found: qubits,
        });
    }
    Ok(())
}

/// Outcome multiplicities prepared for repeated evaluation of `Tr(Π_x A)`.
#[derive(Debug, Clone)]
pub struct PreparedOutcomes {
    qubits: usize,
    total: f64,
    items: Vec<PreparedOutcome>,
}

#[derive(Debug, Clone)]
struct PreparedOutcome {
    index: usize,
    letters: Vec<u8>,
    mask: usize,
    count: f64,
}

impl PreparedOutcomes {
    pub fn new(counts: &OutcomeCounts) -> Result<Self> {
        if counts.total == 0 {
            return Err(Error::Empty("outcome list"));
        }
        let items = counts
            .entries
            .iter()
            .map(|&(index, c)| {
                let o = MeasurementOutcome::from_index(index, counts.qubits);
                PreparedOutcome {
                    index,
                    letters: o.letters(),
                    mask: o.bit_mask(),
                    count: c as f64,
                }
            })
            .collect();
        Ok(Self {
            qubits: counts.qubits,
            total: counts.total as f64,
            items,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// `Tr(Π_x A)` for every distinct outcome.
    pub fn traces(&self, a: &HermMatrix) -> Vec<f64> {
        let coeffs = pauli_coefficients(a.as_mat());
        self.items
            .iter()
            .map(|o| product_trace(&coeffs, &o.letters, o.mask, POVM_WEIGHTS))
            .collect()
    }

    /// `(canonical index, multiplicity)` pairs in the same order as [`Self::traces`].
    pub fn counts(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.items.iter().map(|o| (o.index, o.count))
    }

    /// Model probabilities of the observed outcomes, rejecting support violations.
    pub fn probabilities(&self, ev: &ModelEval) -> Result<Vec<f64>> {
        let probs = self.traces(&ev.state);
        for (o, &p) in self.items.iter().zip(&probs) {
            if p.is_nan() || p < SUPPORT_FLOOR {
                return Err(Error::SupportViolation {
                    outcome: MeasurementOutcome::from_index(o.index, self.qubits).to_string(),
                    probability: p,
                });
            }
        }
        Ok(probs)
    }
}

/// `−ℓ_LL(θ)/n` with gradient, over prepared outcomes.
pub fn loss_ll_prepared(model: &dyn StateFamily, theta: &[f64], data: &PreparedOutcomes) -> Result<(f64, Vec<f64>)> {
    check_qubits(model, data.qubits)?;
    let ev = model.evaluate(theta, Order::Gradient)?;
    let probs = data.probabilities(&ev)?;
    let loss = -data
        .counts()
        .zip(&probs)
        .map(|((_, c), p)| c * p.ln())
        .sum::<f64>()
        / data.total;
    let grad = ev
        .grad_state
        .iter()
        .map(|ds| {
            -data
                .traces(ds)
                .iter()
                .zip(data.counts())
                .zip(&probs)
                .map(|((d, (_, c)), p)| c * d / p)
                .sum::<f64>()
                / data.total
        })
        .collect();
    Ok((loss, grad))
}

/// `−ℓ_LL(θ)/n = −(1/n) Σ_α log Tr(Π_{x_α} σ(θ))` and its gradient.
pub fn loss_ll(model: &dyn StateFamily, theta: &[f64], counts: &OutcomeCounts) -> Result<(f64, Vec<f64>)> {
    loss_ll_prepared(model, theta, &PreparedOutcomes::new(counts)?)
}

/// `ℓ_LL(θ) = Σ_α log Tr(Π_{x_α} σ(θ))`
pub fn log_likelihood(model: &dyn StateFamily, theta: &[f64], counts: &OutcomeCounts) -> Result<f64> {
    let data = PreparedOutcomes::new(counts)?;
    check_qubits(model, data.qubits)?;
    let ev = model.evaluate(theta, Order::Value)?;
    let probs = data.probabilities(&ev)?;
    Ok(data.counts().zip(&probs).map(|((_, c), p)| c * p.ln()).sum())
}

/// `−Tr(ρ̄ log σ(θ))` and its gradient `−Tr(ρ̄ ∂_i log σ(θ))`.
///
/// Summing per-snapshot traces equals `n` times this by linearity, so the
/// mean snapshot is all that is needed.
pub fn loss_shadow(model: &dyn StateFamily, theta: &[f64], rho_bar: &HermMatrix) -> Result<(f64, Vec<f64>)> {
    check_qubits(model, rho_bar.qubits())?;
    let ev = model.evaluate(theta, Order::Gradient)?;
    let loss = -rho_bar.trace_with(&ev.log_state);
    let grad = ev.grad_log.iter().map(|d| -rho_bar.trace_with(d)).collect();
    Ok((loss, grad))
}
