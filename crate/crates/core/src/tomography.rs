//! Detector tomography: estimate a POVM from outcome counts on known probe
//! states by linear inversion, then recover the sharpness η with a
//! bootstrap standard error.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::born::born_distribution;
use crate::error::{Error, Result};
use crate::linalg::basis::{from_coordinates, hermitian_basis, least_squares, span_rank};
use crate::linalg::{
    eig_hermitian, pauli_z, project_effect, ComplexMatrix, DensityOperator, Effect, Povm,
    Tolerances, C64,
};
use crate::pointer::{eta_analytic, induced_effects_numeric, PointerConfig};
use crate::records::{derive_seed, sample_distribution, stream_rng};

/// Known input states with distinct descriptors, spanning Hermitian space.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeSet {
    descriptors: Vec<String>,
    states: Vec<DensityOperator>,
}

impl ProbeSet {
    pub fn new(descriptors: Vec<String>, states: Vec<DensityOperator>) -> Result<Self> {
        if descriptors.len() != states.len() || states.is_empty() {
            return Err(Error::Dimension(
                "one descriptor per probe state required".into(),
            ));
        }
        crate::linalg::types::check_labels(&descriptors, states.len())?;
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(Error::Dimension(
                "probe states of different dimensions".into(),
            ));
        }
        let mats: Vec<ComplexMatrix> = states.iter().map(|s| s.matrix().clone()).collect();
        let rank = span_rank(&mats)?;
        if rank < d * d {
            return Err(Error::InformationallyIncomplete {
                rank,
                needed: d * d,
            });
        }
        Ok(Self {
            descriptors,
            states,
        })
    }

    pub fn descriptors(&self) -> &[String] {
        &self.descriptors
    }

    pub fn states(&self) -> &[DensityOperator] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// The six Pauli eigenstates ±x, ±y, ±z.
pub fn qubit_probes() -> ProbeSet {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| C64::new(re, im);
    let kets = [
        ("+x", [c(h, 0.0), c(h, 0.0)]),
        ("-x", [c(h, 0.0), c(-h, 0.0)]),
        ("+y", [c(h, 0.0), c(0.0, h)]),
        ("-y", [c(h, 0.0), c(0.0, -h)]),
        ("+z", [c(1.0, 0.0), c(0.0, 0.0)]),
        ("-z", [c(0.0, 0.0), c(1.0, 0.0)]),
    ];
    let (names, states): (Vec<String>, Vec<DensityOperator>) = kets
        .iter()
        .map(|(n, k)| {
            (
                n.to_string(),
                DensityOperator::pure(k).expect("unit vector"),
            )
        })
        .unzip();
    ProbeSet::new(names, states).expect("Pauli eigenstates span qubit operators")
}

/// Outcome counts per probe, all probes measured with the same number of shots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CountTable {
    pub labels: Vec<String>,
    pub probes: Vec<String>,
    /// counts[k][i]: outcome i on probe k.
    pub counts: Vec<Vec<u64>>,
    pub shots_per_probe: u64,
}

impl CountTable {
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        let n = self.shots_per_probe as f64;
        self.counts
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / n).collect())
            .collect()
    }
}

/// Born frequencies of `p` on every probe (the noiseless table).
pub fn exact_frequencies(p: &Povm, probes: &ProbeSet) -> Result<Vec<Vec<f64>>> {
    if p.dim() != probes.dim() {
        return Err(Error::Dimension(format!(
            "POVM of dimension {} with probes of dimension {}",
            p.dim(),
            probes.dim()
        )));
    }
    probes
        .states()
        .iter()
        .map(|s| born_distribution(s, p))
        .collect()
}

/// Per probe, `shots` draws from the Born distribution (independent
/// derived seeds per probe).
pub fn simulate_counts(p: &Povm, probes: &ProbeSet, shots: u64, seed: u64) -> Result<CountTable> {
    let freqs = exact_frequencies(p, probes)?;
    let counts = freqs
        .iter()
        .enumerate()
        .map(|(k, probs)| {
            let log = sample_distribution(p.labels(), probs, shots, derive_seed(seed, k as u64))?;
            Ok(p.labels().iter().map(|l| log.count(l)).collect())
        })
        .collect::<Result<Vec<Vec<u64>>>>()?;
    Ok(CountTable {
        labels: p.labels().to_vec(),
        probes: probes.descriptors().to_vec(),
        counts,
        shots_per_probe: shots,
    })
}

const MAX_PROJECTION_ROUNDS: usize = 50;
const COMPLETION_TOL: f64 = 1e-9;

fn completion_defect(effects: &[ComplexMatrix]) -> (ComplexMatrix, f64) {
    let d = effects[0].rows();
    let total = effects
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, e| acc + e);
    let gap = &ComplexMatrix::identity(d) - &total;
    let size = gap.max_abs();
    (gap, size)
}

fn redistribute(effects: &mut [ComplexMatrix], gap: &ComplexMatrix) {
    let share = gap.scale_real(1.0 / effects.len() as f64);
    for e in effects.iter_mut() {
        *e += &share;
    }
}

/// Least-squares effects from a frequency table, completed exactly, then
/// alternately clipped to [0, I] and re-completed.
pub fn reconstruct_from_frequencies(
    labels: &[String],
    freqs: &[Vec<f64>],
    probes: &ProbeSet,
) -> Result<Povm> {
    if freqs.len() != probes.len() || freqs.iter().any(|r| r.len() != labels.len()) {
        return Err(Error::Dimension(
            "frequency table does not match probes and labels".into(),
        ));
    }
    let d = probes.dim();
    let basis = hermitian_basis(d);
    let design: Vec<Vec<f64>> = probes
        .states()
        .iter()
        .map(|s| {
            basis
                .iter()
                .map(|b| s.matrix().trace_product(b).re)
                .collect()
        })
        .collect();
    let rhs: Vec<Vec<f64>> = (0..labels.len())
        .map(|i| freqs.iter().map(|r| r[i]).collect())
        .collect();
    let ls = least_squares(&design, &rhs)?;
    let mut effects: Vec<ComplexMatrix> = ls
        .solutions
        .iter()
        .map(|c| from_coordinates(c, &basis).hermitian_part())
        .collect();
    let (gap, _) = completion_defect(&effects);
    redistribute(&mut effects, &gap);

    for _ in 0..MAX_PROJECTION_ROUNDS {
        let inside = effects
            .iter()
            .map(|e| {
                eig_hermitian(e)
                    .map(|h| h.min() >= -COMPLETION_TOL && h.max() <= 1.0 + COMPLETION_TOL)
            })
            .collect::<Result<Vec<bool>>>()?;
        if inside.iter().all(|&ok| ok) {
            break;
        }
        for e in effects.iter_mut() {
            *e = project_effect(e)?;
        }
        let (gap, size) = completion_defect(&effects);
        if size < COMPLETION_TOL {
            break;
        }
        redistribute(&mut effects, &gap);
    }

    let tol = Tolerances {
        psd: 1e-8,
        complete: 1e-8,
        ..Tolerances::default()
    };
    let attempt = effects
        .iter()
        .map(|e| Effect::with_tol(e.clone(), &tol))
        .collect::<Result<Vec<_>>>()
        .and_then(|es| Povm::with_tol(labels.to_vec(), es, &tol));
    match attempt {
        Ok(p) => Ok(p),
        Err(_) => normalized_fallback(labels, &effects),
    }
}

/// Clip to PSD and conjugate by S^{-1/2}, S = Σ E_i: exactly complete and
/// each E_i ≤ I. Used when the alternation has not converged.
fn normalized_fallback(labels: &[String], effects: &[ComplexMatrix]) -> Result<Povm> {
    let clipped = effects
        .iter()
        .map(|e| Ok(eig_hermitian(e)?.reconstruct_with(|l| l.max(0.0))))
        .collect::<Result<Vec<_>>>()?;
    let d = clipped[0].rows();
    let s = clipped
        .iter()
        .fold(ComplexMatrix::zeros(d, d), |acc, e| acc + e);
    let es = eig_hermitian(&s)?;
    if es.min() <= 1e-12 {
        return Err(Error::InvalidParameter(
            "reconstructed effects do not span the identity".into(),
        ));
    }
    let inv_sqrt = es.reconstruct_with(|l| 1.0 / l.sqrt());
    let mats = clipped
        .iter()
        .map(|e| Ok(inv_sqrt.sandwich(e)?.hermitian_part()))
        .collect::<Result<Vec<_>>>()?;
    Povm::from_matrices(labels.to_vec(), mats)
}

pub fn reconstruct_povm(table: &CountTable, probes: &ProbeSet) -> Result<Povm> {
    if table.shots_per_probe == 0 {
        return Err(Error::InvalidParameter("count table has zero shots".into()));
    }
    if table.probes != probes.descriptors() {
        return Err(Error::Labels(
            "count table rows do not match the probe set".into(),
        ));
    }
    if table
        .counts
        .iter()
        .any(|r| r.iter().sum::<u64>() != table.shots_per_probe)
    {
        return Err(Error::InvalidParameter(
            "a probe row does not sum to shots_per_probe".into(),
        ));
    }
    reconstruct_from_frequencies(&table.labels, &table.frequencies(), probes)
}

/// η̂ = Tr(σ_z(E₊ - E₋))/2 projected to [0, 1]; the first effect is E₊.
pub fn eta_of(p: &Povm) -> Result<f64> {
    if p.len() != 2 || p.dim() != 2 {
        return Err(Error::InvalidParameter(format!(
            "sharpness needs a binary qubit POVM, got {} outcomes in dimension {}",
            p.len(),
            p.dim()
        )));
    }
    let diff = p.effects()[0].matrix() - p.effects()[1].matrix();
    Ok((pauli_z().trace_product(&diff).re / 2.0).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TomographyResult {
    pub povm_hat: Povm,
    pub eta_hat: f64,
    pub eta_stderr: f64,
    /// 0 when the input was an exact frequency table.
    pub shots_per_probe: u64,
}

/// Point estimate on exact frequencies; the standard error is 0.
pub fn estimate_eta_exact(p: &Povm, probes: &ProbeSet) -> Result<TomographyResult> {
    let freqs = exact_frequencies(p, probes)?;
    let povm_hat = reconstruct_from_frequencies(p.labels(), &freqs, probes)?;
    Ok(TomographyResult {
        eta_hat: eta_of(&povm_hat)?,
        povm_hat,
        eta_stderr: 0.0,
        shots_per_probe: 0,
    })
}

/// Multinomial draw of `n` trials as a chain of conditional binomials.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(left);
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(left, q).expect("q in [0, 1]").sample(rng);
        out.push(k);
        left -= k;
        mass -= p;
    }
    out
}

/// Point estimate plus bootstrap standard error from `resamples` multinomial
/// resamples of every probe row, each re-run through the whole pipeline.
pub fn estimate_eta(
    table: &CountTable,
    probes: &ProbeSet,
    resamples: usize,
    seed: u64,
) -> Result<TomographyResult> {
    let povm_hat = reconstruct_povm(table, probes)?;
    let eta_hat = eta_of(&povm_hat)?;
    if resamples < 2 {
        return Err(Error::InvalidParameter(
            "bootstrap needs at least 2 resamples".into(),
        ));
    }
    let freqs = table.frequencies();
    let boot_seed = derive_seed(seed, 0xb007);
    let etas = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(boot_seed, b as u64);
            let counts = freqs
                .iter()
                .map(|row| multinomial(&mut rng, table.shots_per_probe, row))
                .collect();
            let resampled = CountTable {
                counts,
                ..table.clone()
            };
            eta_of(&reconstruct_povm(&resampled, probes)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = etas.iter().sum::<f64>() / resamples as f64;
    let var = etas.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(TomographyResult {
        povm_hat,
        eta_hat,
        eta_stderr: var.sqrt(),
        shots_per_probe: table.shots_per_probe,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KappaPoint {
    pub kappa: f64,
    pub delta: f64,
    pub eta_true: f64,
    pub eta_hat: f64,
    pub stderr: f64,
}

/// Tomography of the numerically induced pointer POVM at each κ.
pub fn kappa_sweep(
    kappas: &[f64],
    delta: f64,
    shots: u64,
    resamples: usize,
    seed: u64,
) -> Result<Vec<KappaPoint>> {
    let probes = qubit_probes();
    kappas
        .iter()
        .enumerate()
        .map(|(k, &kappa)| {
            let (povm, _) = induced_effects_numeric(&PointerConfig::new(kappa, delta)?)?;
            let point_seed = derive_seed(seed, k as u64);
            let table = simulate_counts(&povm, &probes, shots, point_seed)?;
            let res = estimate_eta(&table, &probes, resamples, point_seed)?;
            Ok(KappaPoint {
                kappa,
                delta,
                eta_true: eta_analytic(kappa, delta)?.eta,
                eta_hat: res.eta_hat,
                stderr: res.eta_stderr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    const Z: [f64; 3] = [0.0, 0.0, 1.0];

    #[test]
    fn probe_set_examples() {
        let p = qubit_probes();
        assert_eq!(p.len(), 6);
        let mats: Vec<ComplexMatrix> = p.states().iter().map(|s| s.matrix().clone()).collect();
        assert_eq!(span_rank(&mats).unwrap(), 4);
        let total = mats
            .iter()
            .fold(ComplexMatrix::zeros(2, 2), |acc, m| acc + m);
        assert!(total.max_abs_diff(&ComplexMatrix::identity(2).scale_real(3.0)) < 1e-15);
    }

    #[test]
    fn probe_set_rejects_incomplete_and_duplicates() {
        let z0 = DensityOperator::basis(2, 0).unwrap();
        let z1 = DensityOperator::basis(2, 1).unwrap();
        assert!(matches!(
            ProbeSet::new(vec!["a".into(), "b".into()], vec![z0.clone(), z1]),
            Err(Error::InformationallyIncomplete { .. })
        ));
        let p = qubit_probes();
        let mut names = p.descriptors().to_vec();
        names[1] = names[0].clone();
        assert!(ProbeSet::new(names, p.states().to_vec()).is_err());
    }

    #[test]
    fn exact_round_trips() {
        let probes = qubit_probes();
        for p in [
            Povm::unsharp_qubit(0.6, Z).unwrap(),
            Povm::computational(2).unwrap(),
        ] {
            let freqs = exact_frequencies(&p, &probes).unwrap();
            let hat = reconstruct_from_frequencies(p.labels(), &freqs, &probes).unwrap();
            for (a, b) in hat.effects().iter().zip(p.effects()) {
                assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-9);
            }
        }
        let r = estimate_eta_exact(&Povm::unsharp_qubit(0.6, Z).unwrap(), &probes).unwrap();
        assert!((r.eta_hat - 0.6).abs() < 1e-9);
        assert_eq!(r.eta_stderr, 0.0);
    }

    #[test]
    fn deterministic_probe_counts() {
        let probes = qubit_probes();
        let t = simulate_counts(&Povm::computational(2).unwrap(), &probes, 1000, 1).unwrap();
        assert_eq!(t.counts[4], vec![1000, 0]);
        assert_eq!(t.counts[5], vec![0, 1000]);
    }

    #[test]
    fn trivial_povm_gives_zero_eta() {
        let probes = qubit_probes();
        let t =
            simulate_counts(&Povm::unsharp_qubit(0.0, Z).unwrap(), &probes, 100_000, 2).unwrap();
        for row in &t.counts {
            let sigma = (100_000f64 * 0.25).sqrt();
            assert!((row[0] as f64 - 50_000.0).abs() < 5.0 * sigma);
        }
        let r = estimate_eta(&t, &probes, 50, 2).unwrap();
        assert!(r.eta_hat < 3.0 * r.eta_stderr.max(1e-3));
    }

    #[test]
    fn noisy_reconstruction_is_valid() {
        let probes = qubit_probes();
        let truth = Povm::unsharp_qubit(0.6, Z).unwrap();
        let t = simulate_counts(&truth, &probes, 100_000, 3).unwrap();
        let hat = reconstruct_povm(&t, &probes).unwrap();
        for (a, b) in hat.effects().iter().zip(truth.effects()) {
            assert!(a.matrix().max_abs_diff(b.matrix()) < 0.02);
        }
    }

    #[test]
    fn projection_repairs_out_of_range_estimates() {
        // frequencies slightly beyond a sharp POVM push the LS effects
        // outside [0, I]
        let probes = qubit_probes();
        let mut freqs = exact_frequencies(&Povm::computational(2).unwrap(), &probes).unwrap();
        freqs[0] = vec![0.47, 0.53];
        freqs[1] = vec![0.53, 0.47];
        let hat = reconstruct_from_frequencies(&["0".into(), "1".into()], &freqs, &probes).unwrap();
        for e in hat.effects() {
            let h = eig_hermitian(e.matrix()).unwrap();
            assert!(h.min() > -1e-8 && h.max() < 1.0 + 1e-8);
        }
    }

    #[test]
    fn multinomial_preserves_total() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let c = multinomial(&mut rng, 1000, &[0.2, 0.0, 0.5, 0.3]);
            assert_eq!(c.iter().sum::<u64>(), 1000);
            assert_eq!(c[1], 0);
        }
    }

    #[test]
    fn eta_requires_binary_qubit_povm() {
        assert!(eta_of(&Povm::computational(3).unwrap()).is_err());
        assert!(eta_of(&Povm::trivial(2)).is_err());
    }
}
