//! Dense complex linear algebra and the validated operator types.

pub mod basis;
pub mod eig;
pub mod matrix;
pub mod random;
pub mod types;

pub use eig::{eig_hermitian, project_effect, project_psd, sqrt_psd, HermitianEigen};
pub use matrix::{bloch_operator, pauli_x, pauli_y, pauli_z, ComplexMatrix, Keep, C64};
pub use types::{DensityOperator, Effect, Povm, Tolerances, UnitaryOperator, MAX_DIM};

/// Kronecker product under the index convention (i_a, i_b) -> i_a * d_b + i_b.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

pub fn partial_trace(
    m: &ComplexMatrix,
    dims: (usize, usize),
    keep: Keep,
) -> crate::Result<ComplexMatrix> {
    m.partial_trace(dims, keep)
}

/// Trace distance ½ ||a - b||_1 between Hermitian operators.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> crate::Result<f64> {
    let diff = a - b;
    Ok(0.5
        * eig_hermitian(&diff)?
            .values
            .iter()
            .map(|l| l.abs())
            .sum::<f64>())
}
