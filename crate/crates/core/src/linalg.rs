//! Dense complex linear algebra for few-qubit Hermitian matrices.
//!
//! Basis states are indexed little-endian: qubit `j` is bit `j` of the
//! computational-basis index, so a product operator is
//! `A_{q-1} ⊗ ... ⊗ A_1 ⊗ A_0`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Largest supported register.
pub const MAX_QUBITS: usize = 10;
/// Default eigenvalue floor used by [`herm_log`].
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;
/// Hermiticity tolerance accepted on construction (absolute, scaled by max(1, |A|_max)).
pub const HERMITIAN_TOL: f64 = 1e-10;

const EXP_OVERFLOW: f64 = 700.0;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Number of qubits for a register of dimension `dim`.
pub fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::BadDimension(dim));
    }
    let q = dim.trailing_zeros() as usize;
    if q > MAX_QUBITS {
        return Err(Error::TooManyQubits {
            qubits: q,
            cap: MAX_QUBITS,
            what: "dense matrices",
        });
    }
    Ok(q)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

/// max_ij |A_ij - conj(A_ji)|
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (A + A^H) / 2 in place.
pub fn symmetrize(m: &mut CMat) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Re Tr(AB); exact for Hermitian A and B, where the trace is real.
pub fn trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in 0..n {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Tensor product of per-qubit factors, `factors[j]` acting on qubit `j`.
pub fn kron_qubits(factors: &[CMat]) -> CMat {
    let mut out = CMat::from_element(1, 1, ONE);
    for f in factors {
        // qubit j is more significant than qubits < j
        out = kron(f, &out);
    }
    out
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> CMat {
    let i = Complex64::new(0.0, 1.0);
    CMat::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// A complex Hermitian matrix on a register of 2^q dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct HermMatrix {
    data: CMat,
}

impl HermMatrix {
    /// Validates Hermiticity and squareness, then re-symmetrizes to remove residual drift.
    pub fn new(mut data: CMat) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::DimensionMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        qubits_for_dim(data.nrows())?;
        let scale = data.iter().fold(1.0f64, |m, z| m.max(z.norm()));
        let dev = hermitian_deviation(&data);
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation: dev });
        }
        symmetrize(&mut data);
        Ok(Self { data })
    }

    /// For composite products known to be Hermitian up to round-off.
    pub(crate) fn from_product(mut data: CMat) -> Self {
        symmetrize(&mut data);
        Self { data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            data: CMat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: CMat::identity(dim, dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = CMat::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            data[(i, i)] = Complex64::new(d, 0.0);
        }
        Self { data }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    pub fn as_mat(&self) -> &CMat {
        &self.data
    }

    pub fn into_mat(self) -> CMat {
        self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.data[(i, i)].re).sum()
    }

    /// Tr(self · other)
    pub fn trace_with(&self, other: &HermMatrix) -> f64 {
        trace_product(&self.data, &other.data)
    }

    pub fn scale(&self, s: f64) -> HermMatrix {
        Self {
            data: &self.data * Complex64::new(s, 0.0),
        }
    }

    pub fn add(&self, other: &HermMatrix) -> HermMatrix {
        Self {
            data: &self.data + &other.data,
        }
    }

    pub fn sub(&self, other: &HermMatrix) -> HermMatrix {
        Self {
            data: &self.data - &other.data,
        }
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.data)
    }

    /// Random Hermitian matrix with entries of unit scale.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let mut data = CMat::zeros(dim, dim);
        for i in 0..dim {
            data[(i, i)] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..dim {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                data[(i, j)] = z;
                data[(j, i)] = z.conj();
            }
        }
        Self { data }
    }
}

/// Spectral decomposition `H = V diag(values) V^H` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigen {
    /// `V diag(f(λ)) V^H`
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (k, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            for r in 0..n {
                scaled[(r, k)] *= s;
            }
        }
        HermMatrix::from_product(scaled * self.vectors.adjoint())
    }
}

pub fn herm_eig(h: &HermMatrix) -> Eigen {
    let se = h.data.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let n = h.dim();
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(se.eigenvalues[src]);
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Eigen { values, vectors }
}

/// Checked variant of [`herm_eig`] for raw matrices.
pub fn herm_eig_checked(m: &CMat) -> Result<Eigen> {
    Ok(herm_eig(&HermMatrix::new(m.clone())?))
}

pub fn herm_exp(h: &HermMatrix) -> Result<HermMatrix> {
    let eig = herm_eig(h);
    let max = eig.values.last().copied().unwrap_or(0.0);
    if max > EXP_OVERFLOW {
        return Err(Error::ExpOverflow { max_eigenvalue: max });
    }
    Ok(eig.map(f64::exp))
}

/// Matrix logarithm of a PSD matrix, clamping eigenvalues below `floor`.
pub fn herm_log(rho: &HermMatrix, floor: f64) -> Result<HermMatrix> {
    let eig = herm_eig(rho);
    let min = eig.values.first().copied().unwrap_or(0.0);
    if min < -1e-8 {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    if min < floor {
        log::warn!("herm_log: clamping eigenvalue {min:e} to floor {floor:e}");
    }
    Ok(eig.map(|l| l.max(floor).ln()))
}

/// A unit-trace positive semi-definite Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: HermMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: HermMatrix) -> Result<Self> {
        let tr = matrix.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidTrace { trace: tr });
        }
        let min = herm_eig(&matrix).values[0];
        if min < -1e-10 {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self { matrix })
    }

    /// Callers guarantee unit trace and positivity by construction.
    pub(crate) fn from_trusted(matrix: HermMatrix) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        Self {
            matrix: HermMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    /// |psi><psi| for a normalized state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let n = psi.len();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidTrace { trace: norm });
        }
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        Self::new(HermMatrix::new(m)?)
    }

    /// Full-rank random state `G G^H / Tr(G G^H)` from a Ginibre matrix.
    pub fn random<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> Self {
        let dim = 1usize << qubits;
        let g = CMat::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let mut m = &g * g.adjoint();
        let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
        m /= Complex64::new(tr, 0.0);
        Self {
            matrix: HermMatrix::from_product(m),
        }
    }

    pub fn matrix(&self) -> &HermMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn qubits(&self) -> usize {
        self.matrix.qubits()
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        herm_eig(&self.matrix)
            .values
            .iter()
            .filter(|&&l| l > 0.0)
            .map(|&l| -l * l.ln())
            .sum()
    }

    /// D(ρ‖σ) = Tr ρ log ρ − Tr ρ log σ, given log σ.
    pub fn relative_entropy_to(&self, log_sigma: &HermMatrix) -> f64 {
        -self.von_neumann_entropy() - self.matrix.trace_with(log_sigma)
    }
}

/// Serializable copy of a complex matrix as (re, im) row-major pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl From<&CMat> for MatrixRecord {
    fn from(m: &CMat) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        Self {
            dim: m.nrows(),
            entries,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn reconstruct(e: &Eigen) -> CMat {
        e.map(|l| l).into_mat()
    }

    #[test]
    fn identity_and_pauli_z_spectra() {
        let e = herm_eig(&HermMatrix::identity(2));
        assert_eq!(e.values.len(), 2);
        assert!((e.values[0] - 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        let z = HermMatrix::new(pauli_z()).unwrap();
        let e = herm_eig(&z);
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let h = HermMatrix::random(8, &mut rng);
            let e = herm_eig(&h);
            assert!(frobenius(&(reconstruct(&e) - h.as_mat())) < 1e-10);
            let vv = e.vectors.adjoint() * &e.vectors;
            assert!(frobenius(&(vv - CMat::identity(8, 8))) < 1e-10);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = CMat::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        assert!(matches!(HermMatrix::new(m), Err(Error::NotHermitian { .. })));
        let bad_dim = CMat::identity(3, 3);
        assert!(matches!(HermMatrix::new(bad_dim), Err(Error::BadDimension(3))));
    }

    #[test]
    fn exp_cases() {
        let e = herm_exp(&HermMatrix::zeros(4)).unwrap();
        assert!(frobenius(&(e.as_mat() - CMat::identity(4, 4))) < 1e-14);
        let d = herm_exp(&HermMatrix::from_real_diagonal(&[2f64.ln(), 3f64.ln()])).unwrap();
        assert!((d.as_mat()[(0, 0)].re - 2.0).abs() < 1e-13);
        assert!((d.as_mat()[(1, 1)].re - 3.0).abs() < 1e-13);
        assert!(matches!(
            herm_exp(&HermMatrix::from_real_diagonal(&[800.0, 0.0])),
            Err(Error::ExpOverflow { .. })
        ));
    }

    #[test]
    fn log_cases() {
        let l = herm_log(&HermMatrix::identity(2).scale(0.5), DEFAULT_LOG_FLOOR).unwrap();
        let expect = HermMatrix::identity(2).scale(-(2f64.ln()));
        assert!(l.sub(&expect).frobenius() < 1e-14);

        let l = herm_log(&HermMatrix::from_real_diagonal(&[1.0, 0.0]), 1e-12).unwrap();
        assert!(l.as_mat()[(0, 0)].re.abs() < 1e-14);
        assert!((l.as_mat()[(1, 1)].re - 1e-12f64.ln()).abs() < 1e-10);

        assert!(matches!(
            herm_log(&HermMatrix::from_real_diagonal(&[1.0, -0.1]), 1e-12),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn exp_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let h = HermMatrix::random(8, &mut rng);
            let back = herm_log(&herm_exp(&h).unwrap(), DEFAULT_LOG_FLOOR).unwrap();
            assert!(back.sub(&h).frobenius() < 1e-9);
        }
    }

    #[test]
    fn exp_trace_spectral_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let h = HermMatrix::random(4, &mut rng).scale(3.0);
            let e = herm_eig(&h);
            let tr = herm_exp(&h).unwrap().trace();
            let (lo, hi) = (e.values[0], e.values[3]);
            assert!(tr >= 4.0 * lo.exp() * (1.0 - 1e-12));
            assert!(tr <= 4.0 * hi.exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn density_checks() {
        assert!(DensityMatrix::new(HermMatrix::identity(2)).is_err());
        let mixed = DensityMatrix::maximally_mixed(3);
        assert!((mixed.von_neumann_entropy() - 3.0 * 2f64.ln()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = DensityMatrix::random(2, &mut rng);
        assert!(DensityMatrix::new(r.matrix().clone()).is_ok());
    }

    #[test]
    fn kron_ordering_is_little_endian() {
        // Z on qubit 0, identity on qubit 1: diag(1,-1,1,-1)
        let m = kron_qubits(&[pauli_z(), CMat::identity(2, 2)]);
        let d: Vec<f64> = (0..4).map(|i| m[(i, i)].re).collect();
        assert_eq!(d, vec![1.0, -1.0, 1.0, -1.0]);
    }
}
