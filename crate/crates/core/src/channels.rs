//! Completely positive maps in Kraus and Choi form, instruments, and the
//! Heisenberg-picture pullback that turns an apparatus readout into a POVM
//! on the measured system.
//!
//! Choi convention, used everywhere in the crate:
//! `C = Σ_ij |i><j| ⊗ Λ(|i><j|)`, so the input index is the slow one and
//! `vec(K)[i * d_out + a] = K[a][i]`.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::types::check_labels;
use crate::linalg::{
    eig_hermitian, sqrt_psd, ComplexMatrix, DensityOperator, Effect, Povm, Tolerances,
    UnitaryOperator, C64,
};

/// A trace-preserving CP map C^d_in -> C^d_out.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<ComplexMatrix>,
    dims: (usize, usize),
}

fn kraus_dims(ops: &[ComplexMatrix]) -> Result<(usize, usize)> {
    let first = ops
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty Kraus list".into()))?;
    let (d_out, d_in) = (first.rows(), first.cols());
    if ops.iter().any(|k| k.rows() != d_out || k.cols() != d_in) {
        return Err(Error::Dimension(
            "Kraus operators of differing shapes".into(),
        ));
    }
    Ok((d_in, d_out))
}

/// Σ K^dag K.
fn kraus_effect(ops: &[ComplexMatrix], d_in: usize) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(d_in, d_in);
    for k in ops {
        acc += &(&k.adjoint() * k);
    }
    acc
}

fn trace_preservation_defect(ops: &[ComplexMatrix], d_in: usize) -> f64 {
    kraus_effect(ops, d_in).max_abs_diff(&ComplexMatrix::identity(d_in))
}

impl KrausChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tol(kraus, &Tolerances::default())
    }

    pub fn with_tol(kraus: Vec<ComplexMatrix>, tol: &Tolerances) -> Result<Self> {
        let dims = kraus_dims(&kraus)?;
        let deviation = trace_preservation_defect(&kraus, dims.0);
        if deviation > tol.complete {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self { kraus, dims })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            kraus: vec![ComplexMatrix::identity(d)],
            dims: (d, d),
        }
    }

    pub fn unitary(u: &UnitaryOperator) -> Self {
        Self {
            kraus: vec![u.matrix().clone()],
            dims: (u.dim(), u.dim()),
        }
    }

    /// (d_in, d_out).
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    /// ρ ↦ Σ K ρ K^dag.
    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.dims.0 {
            return Err(Error::Dimension(format!(
                "state of dimension {} into channel with input {}",
                rho.dim(),
                self.dims.0
            )));
        }
        DensityOperator::new(apply_kraus(&self.kraus, rho.matrix()))
    }

    /// F ↦ Σ K^dag F K, the Heisenberg-picture adjoint.
    pub fn pullback_effect(&self, f: &Effect) -> Result<Effect> {
        if f.dim() != self.dims.1 {
            return Err(Error::Dimension(format!(
                "effect of dimension {} pulled back through channel with output {}",
                f.dim(),
                self.dims.1
            )));
        }
        Effect::new(pullback_kraus(&self.kraus, f.matrix()).hermitian_part())
    }

    /// The Choi matrix of the whole channel.
    pub fn choi(&self) -> ChoiMatrix {
        choi_of_branch(&self.kraus).expect("channel has at least one Kraus operator")
    }
}

fn apply_kraus(ops: &[ComplexMatrix], m: &ComplexMatrix) -> ComplexMatrix {
    let d_out = ops[0].rows();
    let mut out = ComplexMatrix::zeros(d_out, d_out);
    for k in ops {
        out += &(&(k * m) * &k.adjoint());
    }
    out
}

fn pullback_kraus(ops: &[ComplexMatrix], f: &ComplexMatrix) -> ComplexMatrix {
    let d_in = ops[0].cols();
    let mut out = ComplexMatrix::zeros(d_in, d_in);
    for k in ops {
        out += &(&(&k.adjoint() * f) * k);
    }
    out
}

/// Free-function form of [`KrausChannel::apply`].
pub fn apply(ch: &KrausChannel, rho: &DensityOperator) -> Result<DensityOperator> {
    ch.apply(rho)
}

/// Free-function form of [`KrausChannel::pullback_effect`].
pub fn pullback_effect(ch: &KrausChannel, f: &Effect) -> Result<Effect> {
    ch.pullback_effect(f)
}

/// The detector channel ρ_S ↦ Tr_S[U (ρ_S ⊗ σ_A) U^dag], landing on the
/// apparatus. Kraus operators are √p_k (<s| ⊗ I) U (I ⊗ |φ_k>) for the
/// spectral decomposition σ_A = Σ p_k |φ_k><φ_k|.
pub fn detector_channel(u: &UnitaryOperator, sigma_a: &DensityOperator) -> Result<KrausChannel> {
    let d_a = sigma_a.dim();
    if !u.dim().is_multiple_of(d_a) {
        return Err(Error::Dimension(format!(
            "coupling of dimension {} does not factor over apparatus dimension {d_a}",
            u.dim()
        )));
    }
    let d_s = u.dim() / d_a;
    let spec = eig_hermitian(sigma_a.matrix())?;
    let mut kraus = Vec::new();
    for (k, &p) in spec.values.iter().enumerate() {
        if p <= 1e-15 {
            continue;
        }
        let phi = spec.vectors.col_vec(k);
        // U (I ⊗ |φ>) : d_s*d_a x d_s
        let attach = ComplexMatrix::from_fn(d_s * d_a, d_s, |row, col| {
            if row / d_a == col {
                phi[row % d_a]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let coupled = u.matrix() * &attach;
        for s in 0..d_s {
            kraus.push(ComplexMatrix::from_fn(d_a, d_s, |a, i| {
                coupled[(s * d_a + a, i)] * p.sqrt()
            }));
        }
    }
    KrausChannel::new(kraus)
}

/// System POVM induced by coupling to an apparatus in state σ_A through U
/// and reading the apparatus out with `readout`. Defined by
/// `Tr(ρ E_i) = Tr[U (ρ ⊗ σ_A) U^dag (I ⊗ F_i)]` for all ρ, evaluated on the
/// matrix units |b><a| of the system, which covers mixed σ_A.
pub fn induced_povm(
    u: &UnitaryOperator,
    sigma_a: &DensityOperator,
    readout: &Povm,
) -> Result<Povm> {
    let d_a = sigma_a.dim();
    if readout.dim() != d_a {
        return Err(Error::Dimension(format!(
            "readout acts on dimension {}, apparatus state on {d_a}",
            readout.dim()
        )));
    }
    if !u.dim().is_multiple_of(d_a) {
        return Err(Error::Dimension(format!(
            "coupling of dimension {} does not factor over apparatus dimension {d_a}",
            u.dim()
        )));
    }
    let d_s = u.dim() / d_a;
    let id_s = ComplexMatrix::identity(d_s);
    let lifted: Vec<ComplexMatrix> = readout
        .effects()
        .iter()
        .map(|f| u.matrix().sandwich_adjoint(&id_s.kron(f.matrix())))
        .collect::<Result<_>>()?;
    let mut effects = vec![ComplexMatrix::zeros(d_s, d_s); readout.len()];
    for a in 0..d_s {
        for b in 0..d_s {
            let probe = ComplexMatrix::unit(d_s, b, a).kron(sigma_a.matrix());
            for (e, heis) in effects.iter_mut().zip(&lifted) {
                e[(a, b)] = probe.trace_product(heis);
            }
        }
    }
    let effects = effects
        .into_iter()
        .map(|m| Effect::new(m.hermitian_part()))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(readout.labels().to_vec(), effects)
}

/// Full or partial dephasing in the orthonormal basis given by the columns of
/// `basis`: off-diagonal elements in that basis are scaled by 1 - λ.
pub fn dephasing_channel(d: usize, basis: &UnitaryOperator, strength: f64) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::InvalidParameter(format!(
            "dephasing strength {strength} outside [0, 1]"
        )));
    }
    if basis.dim() != d {
        return Err(Error::Dimension(format!(
            "basis of dimension {} for d = {d}",
            basis.dim()
        )));
    }
    let mut kraus = Vec::new();
    if strength < 1.0 {
        kraus.push(ComplexMatrix::identity(d).scale_real((1.0 - strength).sqrt()));
    }
    if strength > 0.0 {
        for k in 0..d {
            let v = basis.matrix().col_vec(k);
            kraus.push(ComplexMatrix::outer(&v).scale_real(strength.sqrt()));
        }
    }
    KrausChannel::new(kraus)
}

/// One outcome of an instrument: a label and the Kraus operators of its CP
/// branch.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub label: String,
    pub kraus: Vec<ComplexMatrix>,
}

/// Outcome-labelled CP branches whose sum is trace preserving.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    branches: Vec<Branch>,
    dims: (usize, usize),
}

impl Instrument {
    pub fn new(branches: Vec<Branch>) -> Result<Self> {
        Self::with_tol(branches, &Tolerances::default())
    }

    pub fn with_tol(branches: Vec<Branch>, tol: &Tolerances) -> Result<Self> {
        let labels: Vec<String> = branches.iter().map(|b| b.label.clone()).collect();
        if branches.is_empty() {
            return Err(Error::Labels(
                "an instrument needs at least one outcome".into(),
            ));
        }
        check_labels(&labels, branches.len())?;
        let all: Vec<ComplexMatrix> = branches
            .iter()
            .flat_map(|b| b.kraus.iter().cloned())
            .collect();
        let dims = kraus_dims(&all)?;
        if let Some(b) = branches.iter().find(|b| b.kraus.is_empty()) {
            return Err(Error::InvalidParameter(format!(
                "branch {:?} has no Kraus operators (use a zero matrix for a null branch)",
                b.label
            )));
        }
        let deviation = trace_preservation_defect(&all, dims.0);
        if deviation > tol.complete {
            return Err(Error::NotTracePreserving { deviation });
        }
        Ok(Self { branches, dims })
    }

    /// Single-outcome instrument carrying the identity channel.
    pub fn identity(d: usize) -> Self {
        Self {
            branches: vec![Branch {
                label: "1".into(),
                kraus: vec![ComplexMatrix::identity(d)],
            }],
            dims: (d, d),
        }
    }

    /// Single-outcome instrument with this instrument's total channel as its
    /// only branch: the coarse-graining that forgets the outcome.
    pub fn coarse_grained(&self, label: &str) -> Self {
        Self {
            branches: vec![Branch {
                label: label.to_string(),
                kraus: self
                    .branches
                    .iter()
                    .flat_map(|b| b.kraus.iter().cloned())
                    .collect(),
            }],
            dims: self.dims,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.branches.iter().map(|b| b.label.clone()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.label == label)
    }

    pub fn total_channel(&self) -> KrausChannel {
        KrausChannel {
            kraus: self
                .branches
                .iter()
                .flat_map(|b| b.kraus.iter().cloned())
                .collect(),
            dims: self.dims,
        }
    }

    /// The POVM {Σ_k K_{f,k}^dag K_{f,k}}_f of outcome statistics.
    pub fn induced_povm(&self) -> Result<Povm> {
        let effects = self
            .branches
            .iter()
            .map(|b| Effect::new(kraus_effect(&b.kraus, self.dims.0).hermitian_part()))
            .collect::<Result<Vec<_>>>()?;
        Povm::new(self.labels(), effects)
    }

    /// Outcome distribution p_f = Tr(Σ_k K ρ K^dag), in label order.
    pub fn probabilities(&self, rho: &DensityOperator) -> Result<Vec<f64>> {
        self.check_input(rho)?;
        Ok(self
            .branches
            .iter()
            .map(|b| {
                let e = kraus_effect(&b.kraus, self.dims.0);
                rho.matrix().trace_product(&e).re.max(0.0)
            })
            .collect())
    }

    /// Unnormalized branch output Σ_k K ρ K^dag.
    pub fn branch_output(&self, index: usize, rho: &DensityOperator) -> Result<ComplexMatrix> {
        self.check_input(rho)?;
        let b = self
            .branches
            .get(index)
            .ok_or_else(|| Error::Labels(format!("no outcome with index {index}")))?;
        Ok(apply_kraus(&b.kraus, rho.matrix()))
    }

    /// Conditional post-measurement state given `label`.
    pub fn update(&self, rho: &DensityOperator, label: &str) -> Result<DensityOperator> {
        let index = self
            .index_of(label)
            .ok_or_else(|| Error::Labels(format!("unknown outcome {label:?}")))?;
        self.update_index(rho, index)
    }

    pub fn update_index(&self, rho: &DensityOperator, index: usize) -> Result<DensityOperator> {
        let out = self.branch_output(index, rho)?;
        let p = out.trace().re;
        if p <= 1e-12 {
            return Err(Error::ZeroProbability {
                label: self.branches[index].label.clone(),
                probability: p,
            });
        }
        DensityOperator::new(out.scale_real(1.0 / p).hermitian_part())
    }

    /// Reorders outcomes (new position k holds old outcome perm[k]).
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
            branches: perm.iter().map(|&k| self.branches[k].clone()).collect(),
            dims: self.dims,
        })
    }

    /// Renames every outcome through `f`.
    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> Result<Self> {
        Self::new(
            self.branches
                .iter()
                .map(|b| Branch {
                    label: f(&b.label),
                    kraus: b.kraus.clone(),
                })
                .collect(),
        )
    }

    fn check_input(&self, rho: &DensityOperator) -> Result<()> {
        if rho.dim() != self.dims.0 {
            return Err(Error::Dimension(format!(
                "state of dimension {} into instrument with input {}",
                rho.dim(),
                self.dims.0
            )));
        }
        Ok(())
    }
}

/// Lüders instrument: branch i has the single Kraus operator √E_i.
pub fn luders_instrument(p: &Povm) -> Result<Instrument> {
    let branches = p
        .labels()
        .iter()
        .zip(p.effects())
        .map(|(label, e)| {
            Ok(Branch {
                label: label.clone(),
                kraus: vec![sqrt_psd(e.matrix())?],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Instrument::new(branches)
}

pub fn instrument_probabilities(ins: &Instrument, rho: &DensityOperator) -> Result<Vec<f64>> {
    ins.probabilities(rho)
}

pub fn instrument_update(
    ins: &Instrument,
    rho: &DensityOperator,
    label: &str,
) -> Result<DensityOperator> {
    ins.update(rho, label)
}

/// Choi matrix of a CP map (d_in d_out square, PSD).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChoiMatrix {
    matrix: ComplexMatrix,
    dims: (usize, usize),
}

impl ChoiMatrix {
    pub fn new(matrix: ComplexMatrix, dims: (usize, usize)) -> Result<Self> {
        let n = dims.0 * dims.1;
        if !matrix.is_square() || matrix.rows() != n {
            return Err(Error::Dimension(format!(
                "Choi matrix {}x{} for dims {:?}",
                matrix.rows(),
                matrix.cols(),
                dims
            )));
        }
        let e = eig_hermitian(&matrix)?;
        if e.min() < -1e-9 {
            return Err(Error::CpViolation {
                eigenvalue: e.min(),
            });
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
            dims,
        })
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix, dims: (usize, usize)) -> Self {
        Self { matrix, dims }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// (d_in, d_out).
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    /// Λ(X) = Σ_ij X_ij (block ij of C).
    pub fn apply_to(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let (d_in, d_out) = self.dims;
        ComplexMatrix::from_fn(d_out, d_out, |a, b| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..d_in {
                for j in 0..d_in {
                    acc += x[(i, j)] * self.matrix[(i * d_out + a, j * d_out + b)];
                }
            }
            acc
        })
    }
}

/// C = Σ_k vec(K) vec(K)^dag with column-stacking vec.
pub fn choi_of_branch(ops: &[ComplexMatrix]) -> Result<ChoiMatrix> {
    let (d_in, d_out) = kraus_dims(ops)?;
    let n = d_in * d_out;
    let mut c = ComplexMatrix::zeros(n, n);
    for k in ops {
        let v: Vec<C64> = (0..n).map(|r| k[(r % d_out, r / d_out)]).collect();
        c += &ComplexMatrix::outer(&v);
    }
    Ok(ChoiMatrix::new_unchecked(c, (d_in, d_out)))
}

/// Kraus operators from the spectral decomposition of a Choi matrix. Zero
/// eigenvalues are dropped; a zero map yields one zero operator.
pub fn branch_of_choi(c: &ChoiMatrix) -> Result<Vec<ComplexMatrix>> {
    let (d_in, d_out) = c.dims;
    let e = eig_hermitian(c.matrix())?;
    if e.min() < -1e-9 {
        return Err(Error::CpViolation {
            eigenvalue: e.min(),
        });
    }
    let cutoff = 1e-14 * e.max().max(1.0);
    let mut ops: Vec<ComplexMatrix> = e
        .values
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, &l)| l > cutoff)
        .map(|(k, &l)| {
            let v = e.vectors.col_vec(k);
            ComplexMatrix::from_fn(d_out, d_in, |a, i| v[i * d_out + a] * l.sqrt())
        })
        .collect();
    if ops.is_empty() {
        ops.push(ComplexMatrix::zeros(d_out, d_in));
    }
    Ok(ops)
}

/// Wire form: `{"dims": [d_in, d_out], "branches": {"label": [matrix, ...]}}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstrumentJson {
    dims: [usize; 2],
    branches: IndexMap<String, Vec<ComplexMatrix>>,
}

fn check_declared_dims(declared: [usize; 2], actual: (usize, usize)) -> Result<()> {
    if (declared[0], declared[1]) != actual {
        return Err(Error::Dimension(format!(
            "declared dims {declared:?} but operators map {} -> {}",
            actual.0, actual.1
        )));
    }
    Ok(())
}

impl Serialize for Instrument {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InstrumentJson {
            dims: [self.dims.0, self.dims.1],
            branches: self
                .branches
                .iter()
                .map(|b| (b.label.clone(), b.kraus.clone()))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instrument {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = InstrumentJson::deserialize(d)?;
        let ins = Instrument::new(
            raw.branches
                .into_iter()
                .map(|(label, kraus)| Branch { label, kraus })
                .collect(),
        )
        .map_err(serde::de::Error::custom)?;
        check_declared_dims(raw.dims, ins.dims).map_err(serde::de::Error::custom)?;
        Ok(ins)
    }
}

/// Channels use the instrument schema with a single branch named "channel".
impl Serialize for KrausChannel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut branches = IndexMap::new();
        branches.insert("channel".to_string(), self.kraus.clone());
        InstrumentJson {
            dims: [self.dims.0, self.dims.1],
            branches,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KrausChannel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = InstrumentJson::deserialize(d)?;
        if raw.branches.len() != 1 {
            return Err(serde::de::Error::custom("a channel has exactly one branch"));
        }
        let kraus = raw.branches.into_iter().next().unwrap().1;
        let ch = KrausChannel::new(kraus).map_err(serde::de::Error::custom)?;
        check_declared_dims(raw.dims, ch.dims).map_err(serde::de::Error::custom)?;
        Ok(ch)
    }
}
