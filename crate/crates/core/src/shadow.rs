//! Classical-shadow snapshots `ρ̂ = ⊗_j (3 U_j^H|b_j><b_j|U_j − I)`.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{kron_qubits, CMat, HermMatrix};
use crate::pauli::{pauli_coefficients, product_trace, ProductWeights};
use crate::povm::{MeasurementOutcome, OutcomeCounts};

/// `3|s><s| − I = I/2 + (3/2)(±B)`
pub(crate) const SNAPSHOT_WEIGHTS: ProductWeights = ProductWeights { id: 0.5, basis: 1.5 };

/// A compact snapshot; the dense matrix is built on first use and cached.
#[derive(Debug, Clone)]
pub struct Snapshot {
    outcome: MeasurementOutcome,
    cache: OnceLock<HermMatrix>,
}

impl Snapshot {
    pub fn new(outcome: MeasurementOutcome) -> Self {
        Self {
            outcome,
            cache: OnceLock::new(),
        }
    }

    pub fn outcome(&self) -> &MeasurementOutcome {
        &self.outcome
    }

    pub fn qubits(&self) -> usize {
        self.outcome.qubits()
    }

    pub fn materialized(&self) -> &HermMatrix {
        self.cache.get_or_init(|| dense_snapshot(&self.outcome))
    }
}

impl From<MeasurementOutcome> for Snapshot {
    fn from(o: MeasurementOutcome) -> Self {
        Snapshot::new(o)
    }
}

fn dense_snapshot(outcome: &MeasurementOutcome) -> HermMatrix {
    let factors: Vec<CMat> = outcome
        .bases()
        .iter()
        .zip(outcome.bits())
        .map(|(b, &bit)| b.projector(bit) * Complex64::new(3.0, 0.0) - CMat::identity(2, 2))
        .collect();
    HermMatrix::from_product(kron_qubits(&factors))
}

pub fn snapshot_materialize(s: &Snapshot) -> HermMatrix {
    s.materialized().clone()
}

pub fn mean_snapshot(snapshots: &[Snapshot]) -> Result<HermMatrix> {
    let first = snapshots.first().ok_or(Error::Empty("snapshot list"))?;
    let q = first.qubits();
    let dim = 1usize << q;
    let mut acc = CMat::zeros(dim, dim);
    for s in snapshots {
        if s.qubits() != q {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: s.qubits(),
            });
        }
        acc += s.materialized().as_mat();
    }
    acc /= Complex64::new(snapshots.len() as f64, 0.0);
    Ok(HermMatrix::from_product(acc))
}

/// Mean snapshot of a shot record given as multiplicities.
pub fn mean_snapshot_from_counts(counts: &OutcomeCounts) -> Result<HermMatrix> {
    if counts.total == 0 {
        return Err(Error::Empty("snapshot list"));
    }
    let dim = 1usize << counts.qubits;
    let mut acc = CMat::zeros(dim, dim);
    for &(idx, c) in &counts.entries {
        let s = dense_snapshot(&MeasurementOutcome::from_index(idx, counts.qubits));
        acc += s.as_mat() * Complex64::new(c as f64, 0.0);
    }
    acc /= Complex64::new(counts.total as f64, 0.0);
    Ok(HermMatrix::from_product(acc))
}

/// Tr(ρ̂ A)
pub fn snapshot_trace_with(s: &Snapshot, a: &HermMatrix) -> Result<f64> {
    if a.dim() != 1usize << s.qubits() {
        return Err(Error::DimensionMismatch {
            expected: 1usize << s.qubits(),
            found: a.dim(),
        });
    }
    Ok(s.materialized().trace_with(a))
}

/// Evaluates `Tr(ρ̂_x A)` for many outcomes against one fixed operator.
#[derive(Debug, Clone)]
pub struct SnapshotTracer {
    coeffs: Vec<f64>,
}

impl SnapshotTracer {
    pub fn new(a: &CMat) -> Self {
        Self {
            coeffs: pauli_coefficients(a),
        }
    }

    pub fn trace(&self, outcome: &MeasurementOutcome) -> f64 {
        product_trace(&self.coeffs, &outcome.letters(), outcome.bit_mask(), SNAPSHOT_WEIGHTS)
    }
}
