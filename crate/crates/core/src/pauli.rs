//! Pauli-basis expansion of Hermitian operators.
//!
//! Any Hermitian `A` on q qubits satisfies `A = 2^-q Σ_P Tr(PA) P`. Product
//! operators built from per-qubit factors `w_id·I + w_b·(±B_j)` (Pauli-6 POVM
//! elements, shadow snapshots) then have traces against `A` that only touch
//! the 2^q Pauli strings supported on the measured bases, which is much
//! cheaper than a dense trace against every one of the 6^q outcomes.

use crate::linalg::CMat;

/// Pauli letter codes: I = 0, X = 1, Y = 2, Z = 3.
pub const LETTER_I: u8 = 0;

/// `Tr(P A)` for all 4^q Pauli strings; index `Σ_j letter_j · 4^j`.
pub fn pauli_coefficients(a: &CMat) -> Vec<f64> {
    let dim = a.nrows();
    let q = dim.trailing_zeros() as usize;
    let count = 1usize << (2 * q);
    let mut out = vec![0.0; count];
    for (p, slot) in out.iter_mut().enumerate() {
        let (mut xmask, mut zmask, mut ny) = (0usize, 0usize, 0u32);
        for j in 0..q {
            match (p >> (2 * j)) & 3 {
                1 => xmask |= 1 << j,
                2 => {
                    xmask |= 1 << j;
                    zmask |= 1 << j;
                    ny += 1;
                }
                3 => zmask |= 1 << j,
                _ => {}
            }
        }
        // Tr(PA) = Σ_m i^ny (-1)^{|m & z|} A[m, m^x]
        let mut re = 0.0;
        let mut im = 0.0;
        for m in 0..dim {
            let v = a[(m, m ^ xmask)];
            if (m & zmask).count_ones() % 2 == 0 {
                re += v.re;
                im += v.im;
            } else {
                re -= v.re;
                im -= v.im;
            }
        }
        // multiply (re + i im) by i^ny and keep the real part
        *slot = match ny % 4 {
            0 => re,
            1 => -im,
            2 => -re,
            _ => im,
        };
    }
    out
}

/// Weights of a per-qubit factor `w_id·I + w_basis·(-1)^b·B`.
#[derive(Debug, Clone, Copy)]
pub struct ProductWeights {
    pub id: f64,
    pub basis: f64,
}

/// `Tr(⊗_j (w.id I + w.basis (-1)^{b_j} B_j) · A)` from the Pauli coefficients of A.
///
/// `letters[j]` is the Pauli letter of the measured basis on qubit j, `bits`
/// holds the outcome bits little-endian.
pub fn product_trace(coeffs: &[f64], letters: &[u8], bits: usize, w: ProductWeights) -> f64 {
    let q = letters.len();
    let mut acc = 0.0;
    for subset in 0..(1usize << q) {
        let mut idx = 0usize;
        let mut weight = 1.0;
        for (j, &letter) in letters.iter().enumerate() {
            if (subset >> j) & 1 == 1 {
                idx |= (letter as usize) << (2 * j);
                weight *= if (bits >> j) & 1 == 1 { -w.basis } else { w.basis };
            } else {
                weight *= w.id;
            }
        }
        acc += weight * coeffs[idx];
    }
    acc
}
