//! Validated quantum objects: states, effects, POVMs, unitaries.
//!
//! Only `B(H)` for finite-dimensional `H` is represented, with dimension at
//! most [`MAX_DIM`].

use serde::{Deserialize, Serialize};

use super::eig::eig_hermitian;
use super::matrix::{ComplexMatrix, C64};
use crate::error::{Error, Result};

pub const MAX_DIM: usize = 64;

/// The single tolerance policy threaded through every validating constructor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// max |A - A^dag| entrywise.
    pub herm: f64,
    /// Lowest admissible eigenvalue is `-psd`; also the unit-trace slack.
    pub psd: f64,
    /// Entrywise slack for identity resolutions and trace preservation.
    pub complete: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm: 1e-10,
            psd: 1e-10,
            complete: 1e-9,
        }
    }
}

fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() > MAX_DIM {
        return Err(Error::Dimension(format!(
            "dimension {} exceeds the cap of {MAX_DIM}",
            m.rows()
        )));
    }
    Ok(m.rows())
}

fn check_hermitian(m: &ComplexMatrix, tol: &Tolerances) -> Result<()> {
    let defect = m.hermiticity_defect();
    if defect > tol.herm {
        return Err(Error::NotHermitian { deviation: defect });
    }
    Ok(())
}

/// A positive unit-trace operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityOperator(ComplexMatrix);

impl DensityOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tol(m, &Tolerances::default())
    }

    pub fn with_tol(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&m)?;
        check_hermitian(&m, tol)?;
        let tr = m.trace().re;
        if (tr - 1.0).abs() > tol.psd {
            return Err(Error::NotUnitTrace { trace: tr });
        }
        let e = eig_hermitian(&m)?;
        if e.min() < -tol.psd {
            return Err(Error::NotPositive {
                eigenvalue: e.min(),
            });
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Normalizes `|psi><psi|`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 || !norm2.is_finite() {
            return Err(Error::InvalidParameter(
                "zero or non-finite state vector".into(),
            ));
        }
        Self::new(ComplexMatrix::outer(psi).scale_real(1.0 / norm2))
    }

    /// |k><k| in dimension d.
    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::InvalidParameter(format!("basis index {k} >= {d}")));
        }
        Self::new(ComplexMatrix::unit(d, k, k))
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        Self::new(ComplexMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// Bloch vector (qubits only).
    pub fn bloch(&self) -> Option<[f64; 3]> {
        (self.dim() == 2).then(|| {
            let m = &self.0;
            [
                2.0 * m[(0, 1)].re,
                -2.0 * m[(0, 1)].im,
                (m[(0, 0)] - m[(1, 1)]).re,
            ]
        })
    }
}

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        DensityOperator::new(ComplexMatrix::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// A Hermitian operator with spectrum in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Effect(ComplexMatrix);

impl Effect {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tol(m, &Tolerances::default())
    }

    pub fn with_tol(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        check_square(&m)?;
        check_hermitian(&m, tol)?;
        let e = eig_hermitian(&m)?;
        if e.min() < -tol.psd {
            return Err(Error::EffectBound {
                eigenvalue: e.min(),
            });
        }
        if e.max() > 1.0 + tol.psd {
            return Err(Error::EffectBound {
                eigenvalue: e.max(),
            });
        }
        Ok(Self(m.hermitian_part()))
    }

    pub fn identity(d: usize) -> Self {
        Self(ComplexMatrix::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

impl<'de> Deserialize<'de> for Effect {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Effect::new(ComplexMatrix::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

/// A labelled finite family of effects resolving the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    labels: Vec<String>,
    effects: Vec<Effect>,
}

impl Povm {
    pub fn new(labels: Vec<String>, effects: Vec<Effect>) -> Result<Self> {
        Self::with_tol(labels, effects, &Tolerances::default())
    }

    pub fn with_tol(labels: Vec<String>, effects: Vec<Effect>, tol: &Tolerances) -> Result<Self> {
        if effects.is_empty() {
            return Err(Error::Labels("a POVM needs at least one effect".into()));
        }
        check_labels(&labels, effects.len())?;
        let d = effects[0].dim();
        if let Some(e) = effects.iter().find(|e| e.dim() != d) {
            return Err(Error::Dimension(format!(
                "POVM mixes dimensions {d} and {}",
                e.dim()
            )));
        }
        let mut total = ComplexMatrix::zeros(d, d);
        for e in &effects {
            total += e.matrix();
        }
        let deviation = total.max_abs_diff(&ComplexMatrix::identity(d));
        if deviation > tol.complete {
            return Err(Error::Incomplete { deviation });
        }
        Ok(Self { labels, effects })
    }

    /// Builds effects from raw matrices, validating each.
    pub fn from_matrices(labels: Vec<String>, mats: Vec<ComplexMatrix>) -> Result<Self> {
        let effects = mats
            .into_iter()
            .map(Effect::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels, effects)
    }

    /// ½(I ± η n·σ), labelled "+" and "-".
    pub fn unsharp_qubit(eta: f64, axis: [f64; 3]) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "sharpness {eta} outside [0, 1]"
            )));
        }
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "axis has norm {norm}, expected 1"
            )));
        }
        let n = super::matrix::bloch_operator(axis).scale_real(eta);
        let id = ComplexMatrix::identity(2);
        Self::from_matrices(
            vec!["+".into(), "-".into()],
            vec![(&id + &n).scale_real(0.5), (&id - &n).scale_real(0.5)],
        )
    }

    /// Rank-one projectors onto the computational basis, labelled "0", "1", ...
    pub fn computational(d: usize) -> Result<Self> {
        Self::from_matrices(
            (0..d).map(|k| k.to_string()).collect(),
            (0..d).map(|k| ComplexMatrix::unit(d, k, k)).collect(),
        )
    }

    /// The single-outcome POVM {I}.
    pub fn trivial(d: usize) -> Self {
        Self {
            labels: vec!["1".into()],
            effects: vec![Effect::identity(d)],
        }
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn effect(&self, label: &str) -> Option<&Effect> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|k| &self.effects[k])
    }

    /// Reorders outcomes by `perm` (new position k holds old outcome perm[k]).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if perm.len() != self.len()
            || perm
                .iter()
                .any(|&k| k >= self.len() || std::mem::replace(&mut seen[k], true))
        {
            return Err(Error::InvalidParameter(
                "not a permutation of the outcomes".into(),
            ));
        }
        Ok(Self {
            labels: perm.iter().map(|&k| self.labels[k].clone()).collect(),
            effects: perm.iter().map(|&k| self.effects[k].clone()).collect(),
        })
    }
}

pub(crate) fn check_labels(labels: &[String], expected: usize) -> Result<()> {
    if labels.len() != expected {
        return Err(Error::Labels(format!(
            "{} labels for {expected} outcomes",
            labels.len()
        )));
    }
    let mut sorted: Vec<&String> = labels.iter().collect();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Labels(format!("duplicate label {:?}", w[0])));
    }
    Ok(())
}

/// Wire form: `{"labels": [...], "effects": [matrix, ...]}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PovmJson {
    labels: Vec<String>,
    effects: Vec<ComplexMatrix>,
}

impl Serialize for Povm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PovmJson {
            labels: self.labels.clone(),
            effects: self.effects.iter().map(|e| e.matrix().clone()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PovmJson::deserialize(d)?;
        Povm::from_matrices(raw.labels, raw.effects).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitaryOperator(ComplexMatrix);

impl UnitaryOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_square(&m)?;
        let d = m.rows();
        let deviation = (&m.adjoint() * &m).max_abs_diff(&ComplexMatrix::identity(d));
        if deviation > 1e-10 {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(ComplexMatrix::identity(d))
    }

    /// CNOT with the first qubit as control.
    pub fn cnot() -> Self {
        let mut m = ComplexMatrix::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
            m[(i, j)] = super::matrix::ONE;
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }
}

impl<'de> Deserialize<'de> for UnitaryOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        UnitaryOperator::new(ComplexMatrix::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}
