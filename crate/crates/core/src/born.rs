//! Trace-rule probabilities, additivity over orthogonal resolutions of the
//! identity, and linear reconstruction of a state from its probabilities on
//! an informationally complete effect family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::basis::{from_coordinates, hermitian_basis, least_squares, span_rank};
use crate::linalg::random::haar_unitary;
use crate::linalg::{bloch_operator, eig_hermitian, ComplexMatrix, DensityOperator, Effect, Povm};

const BOUNDARY_TOL: f64 = 1e-10;

/// p = Tr(ρ E). Values within 1e-10 outside [0, 1] are clamped.
pub fn born_prob(rho: &DensityOperator, e: &Effect) -> Result<f64> {
    if rho.dim() != e.dim() {
        return Err(Error::Dimension(format!(
            "state of dimension {} with effect of dimension {}",
            rho.dim(),
            e.dim()
        )));
    }
    let p = rho.matrix().trace_product(e.matrix()).re;
    if !(-BOUNDARY_TOL..=1.0 + BOUNDARY_TOL).contains(&p) {
        return Err(Error::InvalidParameter(format!("trace rule returned {p}")));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Outcome distribution of a POVM, in label order.
pub fn born_distribution(rho: &DensityOperator, povm: &Povm) -> Result<Vec<f64>> {
    povm.effects().iter().map(|e| born_prob(rho, e)).collect()
}

/// Checks that `ops` is a family of mutually orthogonal projectors summing to
/// the identity of dimension d.
pub fn validate_resolution(ops: &[ComplexMatrix], d: usize) -> Result<()> {
    const TOL: f64 = 1e-9;
    if ops.is_empty() {
        return Err(Error::InvalidParameter("empty resolution".into()));
    }
    let mut total = ComplexMatrix::zeros(d, d);
    for (k, p) in ops.iter().enumerate() {
        if !p.is_square() || p.rows() != d {
            return Err(Error::Dimension(format!("projector {k} is not {d}x{d}")));
        }
        let dev = (p * p).max_abs_diff(p).max(p.hermiticity_defect());
        if dev > TOL {
            return Err(Error::InvalidParameter(format!(
                "element {k} is not an orthogonal projector (defect {dev:.3e})"
            )));
        }
        for q in &ops[k + 1..] {
            if (p * q).max_abs() > TOL {
                return Err(Error::InvalidParameter(
                    "resolution elements are not mutually orthogonal".into(),
                ));
            }
        }
        total += p;
    }
    let deviation = total.max_abs_diff(&ComplexMatrix::identity(d));
    if deviation > TOL {
        return Err(Error::Incomplete { deviation });
    }
    Ok(())
}

/// max over resolutions of |Σ_k Tr(ρ P_k) - 1|.
pub fn additivity_check(rho: &DensityOperator, resolutions: &[Vec<ComplexMatrix>]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for res in resolutions {
        validate_resolution(res, rho.dim())?;
        let total: f64 = res.iter().map(|p| rho.matrix().trace_product(p).re).sum();
        worst = worst.max((total - 1.0).abs());
    }
    Ok(worst)
}

/// Rank-one projectors onto the columns of a Haar-random unitary.
pub fn random_resolution<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<ComplexMatrix> {
    let u = haar_unitary(rng, d);
    (0..d)
        .map(|k| ComplexMatrix::outer(&u.matrix().col_vec(k)))
        .collect()
}

/// Tetrahedral qubit POVM E_k = ¼(I + n_k·σ), labelled "t0".."t3".
pub fn ic_effects_qubit() -> Povm {
    let s = 1.0 / 3f64.sqrt();
    let axes = [[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    let id = ComplexMatrix::identity(2);
    let mats = axes
        .iter()
        .map(|&n| (&id + &bloch_operator(n)).scale_real(0.25))
        .collect();
    Povm::from_matrices((0..4).map(|k| format!("t{k}")).collect(), mats)
        .expect("tetrahedron vectors sum to zero")
}

/// d² rank-one projectors onto the first columns of Haar unitaries drawn
/// from a fixed seed; rank-validated before returning.
pub fn ic_projectors(d: usize, seed: u64) -> Result<Vec<Effect>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ops: Vec<ComplexMatrix> = (0..d * d)
        .map(|_| ComplexMatrix::outer(&haar_unitary(&mut rng, d).matrix().col_vec(0)))
        .collect();
    let rank = span_rank(&ops)?;
    if rank < d * d {
        return Err(Error::InformationallyIncomplete {
            rank,
            needed: d * d,
        });
    }
    ops.into_iter()
        .map(|m| Effect::new(m.hermitian_part()))
        .collect()
}

/// Default qutrit IC family (seed 3).
pub fn ic_effects_qutrit() -> Vec<Effect> {
    ic_projectors(3, 3).expect("seed 3 yields a rank-9 family")
}

/// An effect with its measured probability.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSample {
    pub effect: Effect,
    pub probability: f64,
}

impl FrameSample {
    pub fn new(effect: Effect, probability: f64) -> Result<Self> {
        if !probability.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&probability) {
            return Err(Error::InvalidParameter(format!(
                "probability {probability} outside [0, 1]"
            )));
        }
        Ok(Self {
            effect,
            probability: probability.clamp(0.0, 1.0),
        })
    }
}

/// Forward map: the exact trace-rule samples of `rho` on `effects`.
pub fn frame_samples(rho: &DensityOperator, effects: &[Effect]) -> Result<Vec<FrameSample>> {
    effects
        .iter()
        .map(|e| FrameSample::new(e.clone(), born_prob(rho, e)?))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReconstructionReport {
    pub rho_hat: DensityOperator,
    /// max_k |Tr(ρ̂ E_k) - p_k|.
    pub residual: f64,
    /// Condition number of the traceless design block.
    pub condition_diagnostic: f64,
}

/// Least-squares Hermitian ρ̂ with Tr ρ̂ = 1 built in (ρ̂ = I/d + traceless
/// part), then eigenvalue clipping and renormalization.
pub fn reconstruct_state(samples: &[FrameSample]) -> Result<ReconstructionReport> {
    let first = samples
        .first()
        .ok_or_else(|| Error::InvalidParameter("no samples".into()))?;
    let d = first.effect.dim();
    if samples.iter().any(|s| s.effect.dim() != d) {
        return Err(Error::Dimension("samples mix effect dimensions".into()));
    }
    let ops: Vec<ComplexMatrix> = samples.iter().map(|s| s.effect.matrix().clone()).collect();
    let rank = span_rank(&ops)?;
    if rank < d * d {
        return Err(Error::InformationallyIncomplete {
            rank,
            needed: d * d,
        });
    }

    let basis = hermitian_basis(d);
    let mut coords = vec![0.0; d * d];
    coords[0] = 1.0 / (d as f64).sqrt();
    let mut condition = 1.0;
    if d > 1 {
        let design: Vec<Vec<f64>> = ops
            .iter()
            .map(|e| basis[1..].iter().map(|b| e.trace_product(b).re).collect())
            .collect();
        let target: Vec<f64> = samples
            .iter()
            .map(|s| s.probability - s.effect.matrix().trace().re / d as f64)
            .collect();
        let ls = least_squares(&design, &[target])?;
        coords[1..].copy_from_slice(&ls.solutions[0]);
        condition = ls.condition;
    }
    let raw = from_coordinates(&coords, &basis).hermitian_part();
    let clipped = eig_hermitian(&raw)?.reconstruct_with(|l| l.max(0.0));
    let tr = clipped.trace().re;
    let rho_hat = DensityOperator::new(clipped.scale_real(1.0 / tr).hermitian_part())?;
    let residual = samples
        .iter()
        .map(|s| (rho_hat.matrix().trace_product(s.effect.matrix()).re - s.probability).abs())
        .fold(0.0, f64::max);
    Ok(ReconstructionReport {
        rho_hat,
        residual,
        condition_diagnostic: condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_z, random, trace_distance, C64};

    #[test]
    fn born_examples() {
        let zero = DensityOperator::basis(2, 0).unwrap();
        let p0 = Effect::new(ComplexMatrix::unit(2, 0, 0)).unwrap();
        assert_eq!(born_prob(&zero, &p0).unwrap(), 1.0);

        let eta = 0.42;
        let plus =
            Effect::new((&ComplexMatrix::identity(2) + &pauli_z().scale_real(eta)).scale_real(0.5))
                .unwrap();
        assert!((born_prob(&zero, &plus).unwrap() - (1.0 + eta) / 2.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = random::random_effect(&mut rng, 4);
        let mixed = DensityOperator::maximally_mixed(4).unwrap();
        assert!((born_prob(&mixed, &e).unwrap() - e.matrix().trace().re / 4.0).abs() < 1e-15);

        assert!(matches!(born_prob(&mixed, &plus), Err(Error::Dimension(_))));
    }

    #[test]
    fn additivity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random::random_density(&mut rng, 3);
        let comp: Vec<ComplexMatrix> = (0..3).map(|k| ComplexMatrix::unit(3, k, k)).collect();
        assert!(additivity_check(&rho, &[comp]).unwrap() < 1e-10);

        let res: Vec<Vec<ComplexMatrix>> =
            (0..100).map(|_| random_resolution(&mut rng, 3)).collect();
        assert!(additivity_check(&rho, &res).unwrap() < 1e-9);

        let fine = random_resolution(&mut rng, 3);
        let p = fine[0].clone();
        let coarse = vec![p.clone(), &ComplexMatrix::identity(3) - &p];
        assert!(additivity_check(&rho, &[coarse]).unwrap() < 1e-10);
    }

    #[test]
    fn additivity_rejects_invalid_resolutions() {
        let rho = DensityOperator::maximally_mixed(2).unwrap();
        let not_complete = vec![ComplexMatrix::unit(2, 0, 0)];
        assert!(matches!(
            additivity_check(&rho, &[not_complete]),
            Err(Error::Incomplete { .. })
        ));
        let half = ComplexMatrix::identity(2).scale_real(0.5);
        let not_projective = vec![half.clone(), half];
        assert!(matches!(
            additivity_check(&rho, &[not_projective]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn tetrahedron_povm() {
        let p = ic_effects_qubit();
        let mut total = ComplexMatrix::zeros(2, 2);
        for e in p.effects() {
            total += e.matrix();
            let spec = eig_hermitian(e.matrix()).unwrap().values;
            assert!(spec[0].abs() < 1e-15 && (spec[1] - 0.5).abs() < 1e-15);
        }
        assert!(total.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        let ops: Vec<ComplexMatrix> = p.effects().iter().map(|e| e.matrix().clone()).collect();
        assert_eq!(span_rank(&ops).unwrap(), 4);
    }

    #[test]
    fn reconstruct_examples() {
        let effects = ic_effects_qubit().effects().to_vec();
        let zero = DensityOperator::basis(2, 0).unwrap();
        let rep = reconstruct_state(&frame_samples(&zero, &effects).unwrap()).unwrap();
        assert!(rep.rho_hat.matrix().max_abs_diff(zero.matrix()) < 1e-10);
        assert!(rep.residual < 1e-10);

        let mixed = DensityOperator::maximally_mixed(2).unwrap();
        let rep = reconstruct_state(&frame_samples(&mixed, &effects).unwrap()).unwrap();
        assert!(rep.rho_hat.matrix().max_abs_diff(mixed.matrix()) < 1e-10);
    }

    #[test]
    fn reconstruct_qutrit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let effects = ic_effects_qutrit();
        assert_eq!(effects.len(), 9);
        let rho = random::random_density(&mut rng, 3);
        let rep = reconstruct_state(&frame_samples(&rho, &effects).unwrap()).unwrap();
        assert!(trace_distance(rep.rho_hat.matrix(), rho.matrix()).unwrap() < 1e-9);
        assert!(rep.condition_diagnostic.is_finite());
    }

    #[test]
    fn reconstruct_rejects_incomplete_family() {
        let rho = DensityOperator::maximally_mixed(2).unwrap();
        let effects = Povm::computational(2).unwrap().effects().to_vec();
        let samples = frame_samples(&rho, &effects).unwrap();
        assert!(matches!(
            reconstruct_state(&samples),
            Err(Error::InformationallyIncomplete { rank: 2, needed: 4 })
        ));
    }

    #[test]
    fn frame_sample_validation() {
        let e = Effect::identity(2);
        assert!(FrameSample::new(e.clone(), 1.5).is_err());
        assert!(FrameSample::new(e.clone(), f64::NAN).is_err());
        assert_eq!(FrameSample::new(e, 1.0 + 1e-13).unwrap().probability, 1.0);
    }

    #[test]
    fn pure_state_helper() {
        let rho = DensityOperator::pure(&[C64::new(3.0, 0.0), C64::new(0.0, 4.0)]).unwrap();
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-15);
    }
}
