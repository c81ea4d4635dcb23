//! Pauli-6 POVM: elements, random-Pauli sampling and exact outcome enumeration.
//!
//! Outcome conventions:
//! - bit 0 selects the +1 eigenstate of the measured Pauli (|+>, |+i>, |0>),
//!   bit 1 the -1 eigenstate;
//! - the per-qubit local index is `2·basis + bit` with X = 0, Y = 1, Z = 2;
//! - the canonical outcome index is `Σ_j local_j · 6^j` (qubit 0 least significant).

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron_qubits, CMat, DensityMatrix, HermMatrix, ONE, ZERO};
use crate::pauli::{pauli_coefficients, product_trace, ProductWeights};
use crate::rng::{rng_from_seed, uniform01, uniform_index};

/// Largest register for which all 6^q outcomes are enumerated.
pub const ENUMERATION_MAX_QUBITS: usize = 6;

pub(crate) const POVM_WEIGHTS: ProductWeights = ProductWeights {
    id: 1.0 / 6.0,
    basis: 1.0 / 6.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Basis {
        Self::ALL[code]
    }

    pub(crate) fn pauli_letter(self) -> u8 {
        self as u8 + 1
    }

    pub fn as_char(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }

    pub fn from_char(c: char) -> Result<Basis> {
        match c {
            'X' | 'x' => Ok(Basis::X),
            'Y' | 'y' => Ok(Basis::Y),
            'Z' | 'z' => Ok(Basis::Z),
            other => Err(Error::Parse(format!("unknown basis `{other}`"))),
        }
    }

    /// Eigenvector with eigenvalue +1 (bit 0) or -1 (bit 1).
    pub fn eigenstate(self, bit: u8) -> [Complex64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = if bit == 0 { 1.0 } else { -1.0 };
        match self {
            Basis::Z if bit == 0 => [ONE, ZERO],
            Basis::Z => [ZERO, ONE],
            Basis::X => [Complex64::new(h, 0.0), Complex64::new(s * h, 0.0)],
            Basis::Y => [Complex64::new(h, 0.0), Complex64::new(0.0, s * h)],
        }
    }

    /// Rotation `U` with `U B U^H = Z`: U_Z = I, U_X = H, U_Y = H·S^H.
    pub fn rotation(self) -> CMat {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = |x: f64| Complex64::new(x, 0.0);
        match self {
            Basis::Z => CMat::identity(2, 2),
            Basis::X => CMat::from_row_slice(2, 2, &[r(h), r(h), r(h), r(-h)]),
            Basis::Y => CMat::from_row_slice(
                2,
                2,
                &[r(h), Complex64::new(0.0, -h), r(h), Complex64::new(0.0, h)],
            ),
        }
    }

    /// |s><s| for the eigenstate selected by `bit`.
    pub fn projector(self, bit: u8) -> CMat {
        let v = self.eigenstate(bit);
        CMat::from_fn(2, 2, |i, j| v[i] * v[j].conj())
    }
}

/// One random-Pauli shot: a basis and an outcome bit per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MeasurementOutcome {
    bases: Vec<Basis>,
    bits: Vec<u8>,
}

impl MeasurementOutcome {
    pub fn new(bases: Vec<Basis>, bits: Vec<u8>) -> Result<Self> {
        if bases.is_empty() {
            return Err(Error::Empty("measurement outcome"));
        }
        if bases.len() != bits.len() {
            return Err(Error::DimensionMismatch {
                expected: bases.len(),
                found: bits.len(),
            });
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Parse(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self { bases, bits })
    }

    /// Parses strings such as `("XYZ", "010")`; character j belongs to qubit j.
    pub fn parse(bases: &str, bits: &str) -> Result<Self> {
        let bases = bases.chars().map(Basis::from_char).collect::<Result<Vec<_>>>()?;
        let bits = bits
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::Parse(format!("bad bit `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bases, bits)
    }

    pub fn from_index(index: usize, qubits: usize) -> Self {
        let mut bases = Vec::with_capacity(qubits);
        let mut bits = Vec::with_capacity(qubits);
        let mut rest = index;
        for _ in 0..qubits {
            let local = rest % 6;
            rest /= 6;
            bases.push(Basis::from_code(local / 2));
            bits.push((local % 2) as u8);
        }
        Self { bases, bits }
    }

    pub fn qubits(&self) -> usize {
        self.bases.len()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn index(&self) -> usize {
        self.bases
            .iter()
            .zip(&self.bits)
            .rev()
            .fold(0, |acc, (b, &bit)| acc * 6 + 2 * b.code() + bit as usize)
    }

    pub fn bases_string(&self) -> String {
        self.bases.iter().map(|b| b.as_char()).collect()
    }

    pub fn bits_string(&self) -> String {
        self.bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
    }

    pub(crate) fn letters(&self) -> Vec<u8> {
        self.bases.iter().map(|b| b.pauli_letter()).collect()
    }

    pub(crate) fn bit_mask(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |m, (j, &b)| m | ((b as usize) << j))
    }
}

impl std::fmt::Display for MeasurementOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.bases_string(), self.bits_string())
    }
}

pub fn outcome_count(qubits: usize) -> usize {
    6usize.pow(qubits as u32)
}

fn check_enumerable(qubits: usize) -> Result<()> {
    if qubits > ENUMERATION_MAX_QUBITS {
        return Err(Error::TooManyQubits {
            qubits,
            cap: ENUMERATION_MAX_QUBITS,
            what: "outcome enumeration",
        });
    }
    Ok(())
}

/// Π_x = ⊗_j (1/3)|s_j><s_j|
pub fn povm_element(outcome: &MeasurementOutcome) -> HermMatrix {
    let factors: Vec<CMat> = outcome
        .bases
        .iter()
        .zip(&outcome.bits)
        .map(|(b, &bit)| b.projector(bit) * Complex64::new(1.0 / 3.0, 0.0))
        .collect();
    HermMatrix::from_product(kron_qubits(&factors))
}

/// Probabilities over all 6^q outcomes in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomePmf {
    pub qubits: usize,
    pub probabilities: Vec<f64>,
}

impl OutcomePmf {
    pub fn total_variation(&self, other: &OutcomePmf) -> f64 {
        0.5 * self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn from_counts(counts: &OutcomeCounts) -> Result<Self> {
        check_enumerable(counts.qubits)?;
        let mut probabilities = vec![0.0; outcome_count(counts.qubits)];
        for &(idx, c) in &counts.entries {
            probabilities[idx] = c as f64 / counts.total as f64;
        }
        Ok(Self {
            qubits: counts.qubits,
            probabilities,
        })
    }
}

/// `Tr(Π_x A)` for every outcome, from a Hermitian operator.
pub(crate) fn povm_traces(a: &CMat, qubits: usize) -> Vec<f64> {
    let coeffs = pauli_coefficients(a);
    (0..outcome_count(qubits))
        .map(|idx| {
            let o = MeasurementOutcome::from_index(idx, qubits);
            product_trace(&coeffs, &o.letters(), o.bit_mask(), POVM_WEIGHTS)
        })
        .collect()
}

pub fn enumerate_pmf(sigma: &DensityMatrix) -> Result<OutcomePmf> {
    let q = sigma.qubits();
    check_enumerable(q)?;
    Ok(OutcomePmf {
        qubits: q,
        probabilities: povm_traces(sigma.matrix().as_mat(), q),
    })
}

/// Precomputed conditional bit distributions for every basis setting.
#[derive(Debug, Clone)]
pub struct Sampler {
    qubits: usize,
    // cumulative[setting][b] = P(bits <= b | setting)
    cumulative: Vec<Vec<f64>>,
}

impl Sampler {
    pub fn new(rho: &DensityMatrix) -> Self {
        let q = rho.qubits();
        let dim = rho.dim();
        let settings = 3usize.pow(q as u32);
        let mut cumulative = Vec::with_capacity(settings);
        for s in 0..settings {
            let mut rest = s;
            let rotations: Vec<CMat> = (0..q)
                .map(|_| {
                    let b = Basis::from_code(rest % 3);
                    rest /= 3;
                    b.rotation()
                })
                .collect();
            let u = kron_qubits(&rotations);
            let rotated = &u * rho.matrix().as_mat() * u.adjoint();
            let mut acc = 0.0;
            let mut cdf = Vec::with_capacity(dim);
            for b in 0..dim {
                acc += rotated[(b, b)].re.max(0.0);
                cdf.push(acc);
            }
            for c in cdf.iter_mut() {
                *c /= acc;
            }
            cumulative.push(cdf);
        }
        Self { qubits: q, cumulative }
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    /// Draws one shot and returns its canonical index.
    pub fn sample_index<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let mut setting = 0usize;
        let mut codes = [0usize; crate::linalg::MAX_QUBITS];
        let mut pow = 1usize;
        for code in codes.iter_mut().take(self.qubits) {
            *code = uniform_index(rng, 3);
            setting += *code * pow;
            pow *= 3;
        }
        let u = uniform01(rng);
        let cdf = &self.cumulative[setting];
        let bits = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let mut index = 0usize;
        for j in (0..self.qubits).rev() {
            index = index * 6 + 2 * codes[j] + ((bits >> j) & 1);
        }
        index
    }

    pub fn sample<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<MeasurementOutcome> {
        (0..n)
            .map(|_| MeasurementOutcome::from_index(self.sample_index(rng), self.qubits))
            .collect()
    }

    pub fn sample_counts<R: RngCore + ?Sized>(&self, n: usize, rng: &mut R) -> OutcomeCounts {
        let idx: Vec<usize> = (0..n).map(|_| self.sample_index(rng)).collect();
        OutcomeCounts::from_indices(self.qubits, &idx)
    }
}

/// i.i.d. random-Pauli shots from `rho`, deterministic in `seed`.
pub fn sample_outcomes(rho: &DensityMatrix, n: usize, seed: u64) -> Result<Vec<MeasurementOutcome>> {
    if n == 0 {
        return Err(Error::Empty("shot count"));
    }
    let mut rng = rng_from_seed(seed);
    Ok(Sampler::new(rho).sample(n, &mut rng))
}

/// Outcome multiplicities, sorted by canonical index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub qubits: usize,
    pub total: usize,
    pub entries: Vec<(usize, u64)>,
}

impl OutcomeCounts {
    pub fn from_indices(qubits: usize, indices: &[usize]) -> Self {
        let mut sorted = indices.to_vec();
        sorted.sort_unstable();
        let mut entries: Vec<(usize, u64)> = Vec::new();
        for idx in sorted {
            match entries.last_mut() {
                Some((last, c)) if *last == idx => *c += 1,
                _ => entries.push((idx, 1)),
            }
        }
        Self {
            qubits,
            total: indices.len(),
            entries,
        }
    }

    pub fn from_outcomes(outcomes: &[MeasurementOutcome]) -> Result<Self> {
        let first = outcomes.first().ok_or(Error::Empty("outcome list"))?;
        let q = first.qubits();
        if let Some(bad) = outcomes.iter().find(|o| o.qubits() != q) {
            return Err(Error::DimensionMismatch {
                expected: q,
                found: bad.qubits(),
            });
        }
        let idx: Vec<usize> = outcomes.iter().map(|o| o.index()).collect();
        Ok(Self::from_indices(q, &idx))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OutcomeRow {
    pub trial: usize,
    pub shot: usize,
    pub bases: String,
    pub bits: String,
}

pub fn write_outcomes_csv<W: Write>(writer: W, trial: usize, outcomes: &[MeasurementOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    append_outcome_rows(&mut w, trial, outcomes)?;
    w.flush()?;
    Ok(())
}

/// Appends one trial's shots to an open writer; the header is written once per writer.
pub fn append_outcome_rows<W: Write>(
    w: &mut csv::Writer<W>,
    trial: usize,
    outcomes: &[MeasurementOutcome],
) -> Result<()> {
    for (shot, o) in outcomes.iter().enumerate() {
        w.serialize(OutcomeRow {
            trial,
            shot,
            bases: o.bases_string(),
            bits: o.bits_string(),
        })?;
    }
    Ok(())
}

/// Reads rows back as `(trial, outcome)` pairs in file order.
pub fn read_outcomes_csv<R: Read>(reader: R) -> Result<Vec<(usize, MeasurementOutcome)>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: OutcomeRow = row?;
        out.push((row.trial, MeasurementOutcome::parse(&row.bases, &row.bits)?));
    }
    Ok(out)
}
