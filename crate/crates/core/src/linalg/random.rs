//! Random operators for property tests and sampling studies.

use rand::Rng;
use rand_distr::StandardNormal;

use super::matrix::{ComplexMatrix, C64};
use super::types::{DensityOperator, Effect, UnitaryOperator};

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

/// Haar-distributed unitary: Gram-Schmidt on the columns of a complex
/// Gaussian matrix. Normalizing each column leaves the implied triangular
/// factor with a positive diagonal, which fixes the phases.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> UnitaryOperator {
    let g = ginibre(rng, d, d);
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = g.col_vec(j);
        // two passes of modified Gram-Schmidt for orthogonality at 1e-15
        for _ in 0..2 {
            for q in &cols {
                let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= norm);
        cols.push(v);
    }
    UnitaryOperator::new(ComplexMatrix::from_fn(d, d, |i, j| cols[j][i]))
        .expect("Gram-Schmidt output is unitary")
}

/// Random Hermitian matrix (GUE-like).
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    ginibre(rng, d, d).hermitian_part()
}

/// Random mixed state G G^dag / Tr.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityOperator {
    let g = ginibre(rng, d, d);
    let m = &g * &g.adjoint();
    let tr = m.trace().re;
    DensityOperator::new(m.scale_real(1.0 / tr)).expect("Ginibre state is valid")
}

pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DensityOperator {
    let v: Vec<C64> = (0..d).map(|_| gaussian_complex(rng)).collect();
    DensityOperator::pure(&v).expect("nonzero Gaussian vector")
}

/// U diag(u_k) U^dag with u_k uniform in [0, 1].
pub fn random_effect<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Effect {
    let u = haar_unitary(rng, d);
    let spectrum: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let m = u
        .matrix()
        .sandwich(&ComplexMatrix::diag_real(&spectrum))
        .unwrap();
    Effect::new(m.hermitian_part()).expect("spectrum in [0, 1]")
}

/// Kraus operators of a random channel C^d_in -> C^d_out with `n_kraus`
/// terms, cut from a Haar isometry C^d_in -> C^{d_out n_kraus}.
pub fn random_kraus<R: Rng + ?Sized>(
    rng: &mut R,
    d_in: usize,
    d_out: usize,
    n_kraus: usize,
) -> Vec<ComplexMatrix> {
    let big = d_out * n_kraus;
    assert!(big >= d_in, "isometry needs d_out * n_kraus >= d_in");
    let u = haar_unitary(rng, big);
    (0..n_kraus)
        .map(|k| ComplexMatrix::from_fn(d_out, d_in, |a, i| u.matrix()[(k * d_out + a, i)]))
        .collect()
}
