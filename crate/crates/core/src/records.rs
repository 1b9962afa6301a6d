//! Monte-Carlo outcome records: i.i.d. sampling from instruments,
//! sequential measurement chains, frequency-vs-Born comparison and the
//! Wigner-friend instrument pair.

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{Branch, Instrument};
use crate::compat::{
    joint_instrument_feasibility, joint_povm_feasibility, CompatReport, SolverOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, DensityOperator, UnitaryOperator, C64};

/// Probabilities below this are sampled as exactly zero.
pub const DEGENERATE: f64 = 1e-15;

/// Runs sharing one PRNG stream. Stream k covers runs [k·BLOCK, (k+1)·BLOCK),
/// so results do not depend on how blocks are scheduled.
const BLOCK: u64 = 1024;

/// PRNG for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A child seed, for callers that run several independent samplings.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    stream_rng(seed, u64::MAX - tag).random()
}

/// Probabilities with dust zeroed, as a cumulative table.
fn cdf(probs: &[f64]) -> Result<Vec<f64>> {
    if probs.iter().any(|p| !p.is_finite() || *p < -1e-12) {
        return Err(Error::InvalidParameter(format!(
            "bad probability vector {probs:?}"
        )));
    }
    let mut acc = 0.0;
    let out: Vec<f64> = probs
        .iter()
        .map(|&p| {
            if p >= DEGENERATE {
                acc += p;
            }
            acc
        })
        .collect();
    if acc <= 0.0 {
        return Err(Error::InvalidParameter(
            "all outcome probabilities vanish".into(),
        ));
    }
    Ok(out)
}

/// Inverse-CDF draw. The last outcome with nonzero weight absorbs rounding.
fn draw(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("nonempty");
    let target = u * total;
    let mut prev = 0.0;
    let mut last_nonzero = 0;
    for (k, &c) in cdf.iter().enumerate() {
        if c > prev {
            if target < c {
                return k;
            }
            last_nonzero = k;
        }
        prev = c;
    }
    last_nonzero
}

/// Outcome counts from `shots` i.i.d. runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub labels: Vec<String>,
    pub counts: IndexMap<String, u64>,
    pub shots: u64,
    pub seed: u64,
}

impl EventLog {
    pub fn count(&self, label: &str) -> u64 {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn frequency(&self, label: &str) -> f64 {
        self.count(label) as f64 / self.shots as f64
    }

    /// Adds counts of two logs over the same alphabet. The seed of `self`
    /// is kept.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.labels != other.labels {
            return Err(Error::Labels(
                "cannot merge logs over different alphabets".into(),
            ));
        }
        let counts = self
            .labels
            .iter()
            .map(|l| (l.clone(), self.count(l) + other.count(l)))
            .collect();
        Ok(Self {
            labels: self.labels.clone(),
            counts,
            shots: self.shots + other.shots,
            seed: self.seed,
        })
    }
}

/// Samples labelled outcomes from a fixed distribution.
pub fn sample_distribution(
    labels: &[String],
    probs: &[f64],
    shots: u64,
    seed: u64,
) -> Result<EventLog> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    if labels.len() != probs.len() {
        return Err(Error::Dimension(
            "labels and probabilities differ in length".into(),
        ));
    }
    let table = cdf(probs)?;
    let n_blocks = shots.div_ceil(BLOCK);
    let counts = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let runs = BLOCK.min(shots - b * BLOCK);
            let mut c = vec![0u64; labels.len()];
            for _ in 0..runs {
                c[draw(&table, rng.random::<f64>())] += 1;
            }
            c
        })
        .reduce(
            || vec![0u64; labels.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(EventLog {
        labels: labels.to_vec(),
        counts: labels.iter().cloned().zip(counts).collect(),
        shots,
        seed,
    })
}

/// i.i.d. outcomes of `ins` on `rho`.
pub fn sample(ins: &Instrument, rho: &DensityOperator, shots: u64, seed: u64) -> Result<EventLog> {
    let probs = ins.probabilities(rho)?;
    sample_distribution(&ins.labels(), &probs, shots, seed)
}

/// Outcome tuples of a chain of instruments applied in order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecordSequence {
    /// Outcome alphabet of each step.
    pub labels: Vec<Vec<String>>,
    /// Per run, the outcome index at each step.
    pub runs: Vec<Vec<usize>>,
    pub seed: u64,
}

impl RecordSequence {
    /// Counts of each outcome tuple, keyed by label tuples in first-seen order.
    pub fn tuple_counts(&self) -> IndexMap<Vec<String>, u64> {
        let mut out = IndexMap::new();
        for run in &self.runs {
            let key: Vec<String> = run
                .iter()
                .enumerate()
                .map(|(s, &k)| self.labels[s][k].clone())
                .collect();
            *out.entry(key).or_insert(0) += 1;
        }
        out
    }

    pub fn shots(&self) -> usize {
        self.runs.len()
    }
}

/// Conditional branching structure of a chain, computed once.
struct Node {
    cdf: Vec<f64>,
    children: Vec<Option<Node>>,
}

const MAX_TREE: usize = 1 << 16;

fn build_tree(chain: &[Instrument], rho: &DensityOperator) -> Result<Option<Node>> {
    let Some((ins, rest)) = chain.split_first() else {
        return Ok(None);
    };
    let probs = ins.probabilities(rho)?;
    let table = cdf(&probs)?;
    let mut children = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if p < DEGENERATE || rest.is_empty() {
            children.push(None);
            continue;
        }
        match ins.update_index(rho, k) {
            Ok(next) => children.push(build_tree(rest, &next)?),
            // reachable only through rounding dust; reported if drawn
            Err(Error::ZeroProbability { .. }) => children.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(Some(Node {
        cdf: table,
        children,
    }))
}

/// Per run: draw an outcome, update the state, continue down the chain.
pub fn sample_sequential(
    chain: &[Instrument],
    rho: &DensityOperator,
    shots: u64,
    seed: u64,
) -> Result<RecordSequence> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    if chain.is_empty() {
        return Err(Error::InvalidParameter("empty instrument chain".into()));
    }
    let mut d = rho.dim();
    for (s, ins) in chain.iter().enumerate() {
        if ins.dims().0 != d {
            return Err(Error::Dimension(format!(
                "step {s} expects dimension {} but receives {d}",
                ins.dims().0
            )));
        }
        d = ins.dims().1;
    }
    let leaves: usize = chain.iter().map(Instrument::len).product();
    if leaves > MAX_TREE {
        return Err(Error::InvalidParameter(format!(
            "chain has {leaves} outcome tuples; limit is {MAX_TREE}"
        )));
    }
    let root = build_tree(chain, rho)?.expect("nonempty chain");
    let depth = chain.len();
    let n_blocks = shots.div_ceil(BLOCK);
    let blocks: Vec<Result<Vec<Vec<usize>>>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            let runs = BLOCK.min(shots - b * BLOCK);
            let mut out = Vec::with_capacity(runs as usize);
            for _ in 0..runs {
                let mut node = &root;
                let mut tuple = Vec::with_capacity(depth);
                for (step, ins) in chain.iter().enumerate() {
                    let k = draw(&node.cdf, rng.random::<f64>());
                    tuple.push(k);
                    if step + 1 < depth {
                        node = node.children[k]
                            .as_ref()
                            .ok_or_else(|| Error::ZeroProbability {
                                label: ins.labels()[k].clone(),
                                probability: 0.0,
                            })?;
                    }
                }
                out.push(tuple);
            }
            Ok(out)
        })
        .collect();
    let mut runs = Vec::with_capacity(shots as usize);
    for b in blocks {
        runs.extend(b?);
    }
    Ok(RecordSequence {
        labels: chain.iter().map(Instrument::labels).collect(),
        runs,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZScore {
    pub label: String,
    pub count: u64,
    pub frequency: f64,
    pub probability: f64,
    /// (count - shots·p)/√(shots·p(1-p)). For p of 0 or 1 the count must
    /// match exactly: z is 0 on a match and infinite otherwise.
    pub z: f64,
}

/// Per-label z-scores of a log against the Born probabilities of `ins` on `rho`.
pub fn compare_to_born(
    log: &EventLog,
    ins: &Instrument,
    rho: &DensityOperator,
) -> Result<Vec<ZScore>> {
    if log.shots < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 shots, got {}",
            log.shots
        )));
    }
    if log.labels != ins.labels() {
        return Err(Error::Labels(
            "log and instrument have different outcome labels".into(),
        ));
    }
    let probs = ins.probabilities(rho)?;
    let n = log.shots as f64;
    Ok(log
        .labels
        .iter()
        .zip(probs)
        .map(|(label, p)| {
            let count = log.count(label);
            let z = if !(DEGENERATE..=1.0 - DEGENERATE).contains(&p) {
                let expected = if p < DEGENERATE { 0 } else { log.shots };
                if count == expected {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (count as f64 - n * p) / (n * p * (1.0 - p)).sqrt()
            };
            ZScore {
                label: label.clone(),
                count,
                frequency: count as f64 / n,
                probability: p,
                z,
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WignerBasis {
    /// Φ⁺, Φ⁻, Ψ⁺, Ψ⁻ on S⊗M.
    Bell,
    /// |00⟩, |01⟩, |10⟩, |11⟩: the friend's own record basis refined.
    Record,
}

/// System qubit S measured by a friend who stores the z outcome in a memory
/// qubit M, and by a Wigner who measures S⊗M in a chosen basis afterwards.
/// Both instruments take the state of S to S⊗M: the coupling with M
/// prepared in |0⟩ is part of each.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerFriendScenario {
    pub system_state: DensityOperator,
    /// Controlled rotation on S⊗M, first factor S.
    pub friend_unitary: UnitaryOperator,
    pub friend_instrument: Instrument,
    pub wigner_instrument: Instrument,
    pub theta: f64,
    pub wigner_basis: WignerBasis,
}

/// |0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ R_y(θ); θ = π copies z into M.
pub fn controlled_rotation(theta: f64) -> UnitaryOperator {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut m = ComplexMatrix::zeros(4, 4);
    m[(0, 0)] = C64::new(1.0, 0.0);
    m[(1, 1)] = C64::new(1.0, 0.0);
    m[(2, 2)] = C64::new(c, 0.0);
    m[(2, 3)] = C64::new(-s, 0.0);
    m[(3, 2)] = C64::new(s, 0.0);
    m[(3, 3)] = C64::new(c, 0.0);
    UnitaryOperator::new(m).expect("rotation block is orthogonal")
}

fn ket(amps: [f64; 4]) -> Vec<C64> {
    amps.iter().map(|&a| C64::new(a, 0.0)).collect()
}

fn wigner_projectors(basis: WignerBasis) -> Vec<(String, ComplexMatrix)> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let kets = match basis {
        WignerBasis::Bell => vec![
            ("Phi+", ket([h, 0.0, 0.0, h])),
            ("Phi-", ket([h, 0.0, 0.0, -h])),
            ("Psi+", ket([0.0, h, h, 0.0])),
            ("Psi-", ket([0.0, h, -h, 0.0])),
        ],
        WignerBasis::Record => vec![
            ("00", ket([1.0, 0.0, 0.0, 0.0])),
            ("01", ket([0.0, 1.0, 0.0, 0.0])),
            ("10", ket([0.0, 0.0, 1.0, 0.0])),
            ("11", ket([0.0, 0.0, 0.0, 1.0])),
        ],
    };
    kets.into_iter()
        .map(|(l, v)| (l.to_string(), ComplexMatrix::outer(&v)))
        .collect()
}

/// Sharp friend (full copy, θ = π).
pub fn build_wigner_friend(
    system_state: DensityOperator,
    wigner_basis: WignerBasis,
) -> Result<WignerFriendScenario> {
    build_wigner_friend_weak(system_state, std::f64::consts::PI, wigner_basis)
}

/// Friend coupling of strength θ ∈ [0, π].
pub fn build_wigner_friend_weak(
    system_state: DensityOperator,
    theta: f64,
    wigner_basis: WignerBasis,
) -> Result<WignerFriendScenario> {
    if system_state.dim() != 2 {
        return Err(Error::Dimension("the system must be a qubit".into()));
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "coupling angle {theta} outside [0, π]"
        )));
    }
    let u = controlled_rotation(theta);
    // V = U (I_S ⊗ |0⟩_M): C² → C⁴
    let attach = ComplexMatrix::identity(2).kron(&ComplexMatrix::column(&[
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
    ]));
    let v = u.matrix() * &attach;
    let friend = (0..2)
        .map(|f| Branch {
            label: f.to_string(),
            kraus: vec![&ComplexMatrix::identity(2).kron(&ComplexMatrix::unit(2, f, f)) * &v],
        })
        .collect();
    let wigner = wigner_projectors(wigner_basis)
        .into_iter()
        .map(|(label, q)| Branch {
            label,
            kraus: vec![&q * &v],
        })
        .collect();
    Ok(WignerFriendScenario {
        system_state,
        friend_unitary: u,
        friend_instrument: Instrument::new(friend)?,
        wigner_instrument: Instrument::new(wigner)?,
        theta,
        wigner_basis,
    })
}

impl WignerFriendScenario {
    /// State of S⊗M after the coupling.
    pub fn post_coupling_state(&self) -> Result<DensityOperator> {
        let m0 = DensityOperator::basis(2, 0)?;
        let joint = self.system_state.matrix().kron(m0.matrix());
        DensityOperator::new(
            self.friend_unitary
                .matrix()
                .sandwich(&joint)?
                .hermitian_part(),
        )
    }

    pub fn friend_probabilities(&self) -> Result<Vec<f64>> {
        self.friend_instrument.probabilities(&self.system_state)
    }

    pub fn wigner_probabilities(&self) -> Result<Vec<f64>> {
        self.wigner_instrument.probabilities(&self.system_state)
    }
}

/// Instrument-level verdict: does a joint instrument for the friend and
/// Wigner exist?
pub fn scenario_verdict(sc: &WignerFriendScenario, opts: &SolverOptions) -> Result<CompatReport> {
    joint_instrument_feasibility(&sc.friend_instrument, &sc.wigner_instrument, opts)
}

/// Verdict on the POVMs the two instruments induce on S only.
pub fn scenario_povm_verdict(
    sc: &WignerFriendScenario,
    opts: &SolverOptions,
) -> Result<CompatReport> {
    joint_povm_feasibility(
        &sc.friend_instrument.induced_povm()?,
        &sc.wigner_instrument.induced_povm()?,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::luders_instrument;
    use crate::compat::Verdict;
    use crate::linalg::Povm;

    const Z: [f64; 3] = [0.0, 0.0, 1.0];
    const X: [f64; 3] = [1.0, 0.0, 0.0];

    fn plus() -> DensityOperator {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        DensityOperator::pure(&[C64::new(h, 0.0), C64::new(h, 0.0)]).unwrap()
    }

    fn sharp(axis: [f64; 3]) -> Instrument {
        luders_instrument(&Povm::unsharp_qubit(1.0, axis).unwrap()).unwrap()
    }

    #[test]
    fn draw_skips_dust() {
        let table = cdf(&[0.0, 1e-16, 0.5, 0.5, 1e-17]).unwrap();
        assert_eq!(draw(&table, 0.0), 2);
        assert_eq!(draw(&table, 0.4999), 2);
        assert_eq!(draw(&table, 0.5), 3);
        assert_eq!(draw(&table, 1.0 - 1e-17), 3);
    }

    #[test]
    fn deterministic_outcome() {
        let log = sample(&sharp(Z), &DensityOperator::basis(2, 0).unwrap(), 5000, 9).unwrap();
        assert_eq!(log.count("+"), 5000);
        assert_eq!(log.count("-"), 0);
        let z = compare_to_born(&log, &sharp(Z), &DensityOperator::basis(2, 0).unwrap()).unwrap();
        assert!(z.iter().all(|s| s.z == 0.0));
    }

    #[test]
    fn binomial_statistics() {
        let shots = 100_000;
        for (eta, rho) in [(0.0, plus()), (0.42, DensityOperator::basis(2, 0).unwrap())] {
            let ins = luders_instrument(&Povm::unsharp_qubit(eta, Z).unwrap()).unwrap();
            let log = sample(&ins, &rho, shots, 1).unwrap();
            let p = (1.0 + eta) / 2.0;
            let sigma = (shots as f64 * p * (1.0 - p)).sqrt();
            assert!((log.count("+") as f64 - shots as f64 * p).abs() < 5.0 * sigma);
            assert_eq!(log.counts.values().sum::<u64>(), shots);
        }
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let ins = luders_instrument(&Povm::unsharp_qubit(0.3, X).unwrap()).unwrap();
        let rho = DensityOperator::maximally_mixed(2).unwrap();
        let a = sample(&ins, &rho, 10_000, 5).unwrap();
        let b = sample(&ins, &rho, 10_000, 5).unwrap();
        let c = sample(&ins, &rho, 10_000, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn zero_shots_rejected() {
        let r = sample(&sharp(Z), &plus(), 0, 0);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn merge_adds_counts() {
        let ins = sharp(X);
        let a = sample(&ins, &plus(), 200, 1).unwrap();
        let b = sample(&ins, &DensityOperator::maximally_mixed(2).unwrap(), 300, 2).unwrap();
        let m = a.merge(&b).unwrap();
        assert_eq!(m.shots, 500);
        assert_eq!(m.count("+"), a.count("+") + b.count("+"));
        assert_eq!(b.merge(&a).unwrap().counts, m.counts);
    }

    #[test]
    fn repeatability_of_sharp_chain() {
        let seq = sample_sequential(&[sharp(Z), sharp(Z)], &plus(), 10_000, 3).unwrap();
        assert!(seq.runs.iter().all(|r| r[0] == r[1]));
        let first_plus = seq.runs.iter().filter(|r| r[0] == 0).count() as f64;
        assert!((first_plus - 5000.0).abs() < 5.0 * 50.0);
    }

    #[test]
    fn z_then_x_is_fair() {
        let shots = 100_000u64;
        let seq = sample_sequential(
            &[sharp(Z), sharp(X)],
            &DensityOperator::basis(2, 0).unwrap(),
            shots,
            4,
        )
        .unwrap();
        assert!(seq.runs.iter().all(|r| r[0] == 0));
        let plus = seq.runs.iter().filter(|r| r[1] == 0).count() as f64;
        let sigma = (shots as f64 * 0.25).sqrt();
        assert!((plus - shots as f64 / 2.0).abs() < 5.0 * sigma);
    }

    #[test]
    fn chain_dimension_mismatch() {
        let r = sample_sequential(&[sharp(Z), Instrument::identity(3)], &plus(), 10, 0);
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn negative_control_has_large_z() {
        let ins = sharp(Z);
        let log = sample(&ins, &DensityOperator::basis(2, 0).unwrap(), 100_000, 1).unwrap();
        let z = compare_to_born(&log, &ins, &plus()).unwrap();
        assert!(z.iter().all(|s| s.z.abs() > 10.0));
    }

    #[test]
    fn wigner_friend_examples() {
        let zero =
            build_wigner_friend(DensityOperator::basis(2, 0).unwrap(), WignerBasis::Bell).unwrap();
        assert!((zero.friend_probabilities().unwrap()[0] - 1.0).abs() < 1e-12);

        let sc = build_wigner_friend(plus(), WignerBasis::Bell).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityOperator::pure(&ket([h, 0.0, 0.0, h])).unwrap();
        assert!(
            sc.post_coupling_state()
                .unwrap()
                .matrix()
                .max_abs_diff(bell.matrix())
                < 1e-12
        );
        assert!((sc.wigner_probabilities().unwrap()[0] - 1.0).abs() < 1e-12);
        let f = sc.friend_probabilities().unwrap();
        assert!((f[0] - 0.5).abs() < 1e-12 && (f[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wigner_friend_verdicts() {
        let opts = SolverOptions::default();
        let sc = build_wigner_friend(plus(), WignerBasis::Bell).unwrap();
        assert_eq!(
            scenario_verdict(&sc, &opts).unwrap().verdict,
            Verdict::Incompatible
        );
        assert_eq!(
            scenario_povm_verdict(&sc, &opts).unwrap().verdict,
            Verdict::Incompatible
        );

        let control = build_wigner_friend(plus(), WignerBasis::Record).unwrap();
        let r = scenario_verdict(&control, &opts).unwrap();
        assert_eq!(r.verdict, Verdict::Compatible);
        assert!(r.joint.is_some());

        let weak = build_wigner_friend_weak(plus(), 0.05, WignerBasis::Bell).unwrap();
        assert_eq!(
            scenario_povm_verdict(&weak, &opts).unwrap().verdict,
            Verdict::Compatible
        );
    }

    #[test]
    fn verdict_invariant_under_relabeling() {
        let opts = SolverOptions::default();
        for basis in [WignerBasis::Bell, WignerBasis::Record] {
            let sc = build_wigner_friend(plus(), basis).unwrap();
            let mut relabeled = sc.clone();
            relabeled.friend_instrument =
                sc.friend_instrument.relabeled(|l| format!("f{l}")).unwrap();
            relabeled.wigner_instrument = sc.wigner_instrument.permuted(&[3, 1, 0, 2]).unwrap();
            assert_eq!(
                scenario_verdict(&sc, &opts).unwrap().verdict,
                scenario_verdict(&relabeled, &opts).unwrap().verdict
            );
        }
    }
}
