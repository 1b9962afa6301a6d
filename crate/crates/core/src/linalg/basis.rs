//! Orthonormal operator bases and the small real least-squares solver used
//! by the linear-inversion reconstructions.

use super::eig::eig_hermitian;
use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Orthonormal basis of Hermitian d x d matrices under Tr(AB): element 0 is
/// I/√d, the rest are the generalized Gell-Mann matrices (all traceless).
pub fn hermitian_basis(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    out.push(ComplexMatrix::identity(d).scale_real(1.0 / (d as f64).sqrt()));
    for l in 1..d {
        let norm = ((l * (l + 1)) as f64).sqrt();
        let diag: Vec<f64> = (0..d)
            .map(|k| match k.cmp(&l) {
                std::cmp::Ordering::Less => 1.0 / norm,
                std::cmp::Ordering::Equal => -(l as f64) / norm,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect();
        out.push(ComplexMatrix::diag_real(&diag));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for r in 0..d {
        for c in (r + 1)..d {
            let mut sym = ComplexMatrix::zeros(d, d);
            sym[(r, c)] = C64::new(s, 0.0);
            sym[(c, r)] = C64::new(s, 0.0);
            out.push(sym);
            let mut anti = ComplexMatrix::zeros(d, d);
            anti[(r, c)] = C64::new(0.0, -s);
            anti[(c, r)] = C64::new(0.0, s);
            out.push(anti);
        }
    }
    out
}

/// Real coordinates of a Hermitian matrix in [`hermitian_basis`].
pub fn coordinates(m: &ComplexMatrix, basis: &[ComplexMatrix]) -> Vec<f64> {
    basis.iter().map(|b| b.trace_product(m).re).collect()
}

pub fn from_coordinates(coords: &[f64], basis: &[ComplexMatrix]) -> ComplexMatrix {
    let d = basis[0].rows();
    let mut out = ComplexMatrix::zeros(d, d);
    for (c, b) in coords.iter().zip(basis) {
        out += &b.scale_real(*c);
    }
    out
}

#[derive(Clone, Debug)]
pub struct LeastSquares {
    /// One solution vector per right-hand side.
    pub solutions: Vec<Vec<f64>>,
    pub rank: usize,
    /// Ratio of extreme singular values of the design matrix.
    pub condition: f64,
}

/// Solves min ||A x - b|| for each column b of `rhs` through the spectral
/// pseudo-inverse of AᵀA. Fails when A does not have full column rank.
pub fn least_squares(design: &[Vec<f64>], rhs: &[Vec<f64>]) -> Result<LeastSquares> {
    let n = design.first().map_or(0, |r| r.len());
    if n == 0 || design.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("ragged or empty design matrix".into()));
    }
    if rhs.iter().any(|b| b.len() != design.len()) {
        return Err(Error::Dimension(
            "right-hand side length differs from design rows".into(),
        ));
    }
    let gram = ComplexMatrix::from_fn(n, n, |i, j| {
        C64::new(design.iter().map(|r| r[i] * r[j]).sum(), 0.0)
    });
    let eig = eig_hermitian(&gram)?;
    let top = eig.max().max(0.0);
    let cutoff = top * 1e-12;
    let rank = eig.values.iter().filter(|&&l| l > cutoff).count();
    if rank < n {
        return Err(Error::InformationallyIncomplete { rank, needed: n });
    }
    let condition = (top / eig.min()).sqrt();
    let v = &eig.vectors;
    let solutions = rhs
        .iter()
        .map(|b| {
            let atb: Vec<f64> = (0..n)
                .map(|i| design.iter().zip(b).map(|(r, bk)| r[i] * bk).sum())
                .collect();
            // x = V Λ^{-1} Vᵀ Aᵀb (V is real up to phases; take the real part)
            let mut x = vec![0.0; n];
            for (k, &l) in eig.values.iter().enumerate() {
                let proj: C64 = (0..n).map(|i| v[(i, k)].conj() * atb[i]).sum();
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi += (v[(i, k)] * proj).re / l;
                }
            }
            x
        })
        .collect();
    Ok(LeastSquares {
        solutions,
        rank,
        condition,
    })
}

/// Numerical rank of the Gram matrix Tr(A_i A_j) of a Hermitian family.
pub fn span_rank(ops: &[ComplexMatrix]) -> Result<usize> {
    let n = ops.len();
    if n == 0 {
        return Ok(0);
    }
    let gram = ComplexMatrix::from_fn(n, n, |i, j| C64::new(ops[i].trace_product(&ops[j]).re, 0.0));
    let eig = eig_hermitian(&gram)?;
    let cutoff = eig.max().max(0.0) * 1e-10;
    Ok(eig.values.iter().filter(|&&l| l > cutoff).count())
}
