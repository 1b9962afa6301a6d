use measkit::channels::luders_instrument;
use measkit::compat::{
    joint_instrument_feasibility, joint_povm_feasibility, marginals, min_block_eigenvalue, Joint,
    SolverOptions, Verdict,
};
use measkit::linalg::{random, ComplexMatrix, Effect, Povm};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random POVM with `n` outcomes: E_k = S^{-1/2} G_k S^{-1/2} for random
/// PSD G_k and S = Σ G_k.
fn random_povm(rng: &mut ChaCha8Rng, d: usize, n: usize, tag: &str) -> Povm {
    let gs: Vec<ComplexMatrix> = (0..n)
        .map(|_| random::random_density(rng, d).into_matrix())
        .collect();
    let s = gs.iter().fold(ComplexMatrix::zeros(d, d), |acc, g| acc + g);
    let e = measkit::linalg::eig_hermitian(&s).unwrap();
    let inv_sqrt = e.reconstruct_with(|l| 1.0 / l.sqrt());
    let mats = gs
        .iter()
        .map(|g| (&(&inv_sqrt * g) * &inv_sqrt).hermitian_part())
        .collect();
    Povm::from_matrices((0..n).map(|k| format!("{tag}{k}")).collect(), mats).unwrap()
}

/// ηE + (1-η) Tr(E)/d I.
fn noisy(p: &Povm, eta: f64) -> Povm {
    let d = p.dim();
    let mats = p
        .effects()
        .iter()
        .map(|e| {
            let tr = e.matrix().trace().re / d as f64;
            &e.matrix().scale_real(eta) + &ComplexMatrix::identity(d).scale_real((1.0 - eta) * tr)
        })
        .collect();
    Povm::from_matrices(p.labels().to_vec(), mats).unwrap()
}

fn mix(a: &Povm, b: &Povm, lambda: f64) -> Povm {
    let mats = a
        .effects()
        .iter()
        .zip(b.effects())
        .map(|(x, y)| &x.matrix().scale_real(lambda) + &y.matrix().scale_real(1.0 - lambda))
        .collect();
    Povm::from_matrices(a.labels().to_vec(), mats).unwrap()
}

fn assert_valid_joint(joint: &Option<Joint>, a: &Povm, b: &Povm) {
    let Some(Joint::Povm(j)) = joint else {
        panic!("compatible verdict without joint");
    };
    let (ma, mb) = marginals(j).unwrap();
    for (x, y) in ma
        .effects()
        .iter()
        .zip(a.effects())
        .chain(mb.effects().iter().zip(b.effects()))
    {
        assert!(x.matrix().max_abs_diff(y.matrix()) < 1e-7);
    }
    let blocks: Vec<&ComplexMatrix> = j.effects.iter().flatten().map(Effect::matrix).collect();
    assert!(min_block_eigenvalue(blocks).unwrap() > -1e-9);
}

/// A random 3-outcome qutrit POVM and its merge of outcomes 0 and 1.
fn coarse_grained_pair(rng: &mut ChaCha8Rng) -> (Povm, Povm) {
    let a = random_povm(rng, 3, 3, "a");
    let e = a.effects();
    let b = Povm::from_matrices(
        vec!["x".into(), "y".into()],
        vec![e[0].matrix() + e[1].matrix(), e[2].matrix().clone()],
    )
    .unwrap();
    (a, b)
}

#[test]
fn post_processing_mostly_decides_compatible() {
    let decided = (0..40u64)
        .filter(|&seed| {
            let (a, b) = coarse_grained_pair(&mut ChaCha8Rng::seed_from_u64(seed));
            joint_povm_feasibility(&a, &b, &SolverOptions::default())
                .unwrap()
                .verdict
                == Verdict::Compatible
        })
        .count();
    assert!(decided >= 32, "{decided}/40 decided");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Any two POVMs become jointly measurable at noise 1/2, witnessed by
    // G_ij = (A_i Tr(B_j) + Tr(A_i) B_j) / 2d.
    #[test]
    fn half_noise_pairs_are_compatible(seed in any::<u64>(), d in 2usize..=3, n in 2usize..=3, m in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = noisy(&random_povm(&mut rng, d, n, "a"), 0.5);
        let b = noisy(&random_povm(&mut rng, d, m, "b"), 0.5);
        let r = joint_povm_feasibility(&a, &b, &SolverOptions::default()).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Compatible);
        assert_valid_joint(&r.joint, &a, &b);
    }

    #[test]
    fn relabeling_permutes_joint_and_keeps_verdict(seed in any::<u64>(), eta in 0.3f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = noisy(&random_povm(&mut rng, 2, 3, "a"), eta);
        let b = noisy(&random_povm(&mut rng, 2, 2, "b"), eta);
        let opts = SolverOptions::default();
        let r = joint_povm_feasibility(&a, &b, &opts).unwrap();
        let pa = a.permuted(&[2, 0, 1]).unwrap();
        let pb = b.permuted(&[1, 0]).unwrap();
        let rp = joint_povm_feasibility(&pa, &pb, &opts).unwrap();
        prop_assert_eq!(r.verdict, rp.verdict);
        if let (Some(Joint::Povm(j)), Some(Joint::Povm(jp))) = (&r.joint, &rp.joint) {
            prop_assert_eq!(&jp.row_labels, &pa.labels().to_vec());
            for (i, pi) in [2usize, 0, 1].iter().enumerate() {
                for (j2, pj) in [1usize, 0].iter().enumerate() {
                    let diff = jp.effects[i][j2].matrix().max_abs_diff(j.effects[*pi][*pj].matrix());
                    prop_assert!(diff < 1e-9, "diff {}", diff);
                }
            }
        }
    }

    #[test]
    fn convex_combination_stays_compatible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = noisy(&random_povm(&mut rng, 2, 2, "a"), 0.5);
        let a2 = noisy(&random_povm(&mut rng, 2, 2, "a"), 0.5);
        let b = noisy(&random_povm(&mut rng, 2, 2, "b"), 0.5);
        let opts = SolverOptions::default();
        prop_assert_eq!(joint_povm_feasibility(&a, &b, &opts).unwrap().verdict, Verdict::Compatible);
        prop_assert_eq!(joint_povm_feasibility(&a2, &b, &opts).unwrap().verdict, Verdict::Compatible);
        let m = mix(&a, &a2, 0.5);
        let r = joint_povm_feasibility(&m, &b, &opts).unwrap();
        prop_assert_eq!(r.verdict, Verdict::Compatible);
        assert_valid_joint(&r.joint, &m, &b);
    }

    // Coarse-grainings of A are always jointly measurable with A. The only
    // joint is a boundary point with zero blocks, where Dykstra converges
    // sublinearly, so a few cases run out of budget as undecided; none may
    // be called incompatible.
    #[test]
    fn post_processing_is_never_incompatible(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = coarse_grained_pair(&mut rng);
        let r = joint_povm_feasibility(&a, &b, &SolverOptions::default()).unwrap();
        prop_assert_ne!(r.verdict, Verdict::Incompatible);
        if r.verdict == Verdict::Compatible {
            assert_valid_joint(&r.joint, &a, &b);
        }
    }

    // A joint instrument never exists when the induced POVMs are incompatible.
    #[test]
    fn instrument_verdict_respects_povm_level(seed in any::<u64>(), eta in 0.2f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = noisy(&random_povm(&mut rng, 2, 2, "a"), eta);
        let b = noisy(&random_povm(&mut rng, 2, 2, "b"), eta);
        let opts = SolverOptions::default();
        let povm = joint_povm_feasibility(&a, &b, &opts).unwrap();
        let ia = luders_instrument(&a).unwrap();
        let ib = luders_instrument(&b).unwrap();
        let ins = joint_instrument_feasibility(&ia, &ib, &opts).unwrap();
        if povm.verdict == Verdict::Incompatible {
            prop_assert_ne!(ins.verdict, Verdict::Compatible);
        }
        if ins.verdict == Verdict::Compatible {
            let Some(Joint::Instrument(j)) = &ins.joint else { panic!() };
            prop_assert!(min_block_eigenvalue(j.choi.iter().flatten()).unwrap() > -1e-9);
        }
    }
}

#[test]
fn monotone_scan_for_random_axes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = SolverOptions::default();
    for _ in 0..5 {
        let a = random::random_pure(&mut rng, 2).bloch().unwrap();
        let b = random::random_pure(&mut rng, 2).bloch().unwrap();
        let verdicts: Vec<Verdict> = (0..=25)
            .map(|k| {
                let eta = 0.04 * k as f64;
                joint_povm_feasibility(
                    &Povm::unsharp_qubit(eta, a).unwrap(),
                    &Povm::unsharp_qubit(eta, b).unwrap(),
                    &opts,
                )
                .unwrap()
                .verdict
            })
            .filter(|v| *v != Verdict::Undecided)
            .collect();
        assert!(
            verdicts.windows(2).filter(|w| w[0] != w[1]).count() <= 1,
            "{verdicts:?}"
        );
    }
}
