//! Dykstra verdicts against the brute-force oracle in `support/`.

#[path = "support/qubit_oracle.rs"]
mod qubit_oracle;

use measkit::compat::{joint_povm_feasibility, marginals, Joint, SolverOptions, Verdict};
use measkit::linalg::Povm;
use qubit_oracle::{oracle_compatible, oracle_value, unit};

#[test]
fn oracle_reproduces_known_orthogonal_boundary() {
    let (z, x) = ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
    // at the symmetric point the functional equals η/√2 exactly
    for eta in [0.3, 0.7, 0.9] {
        assert!((oracle_value(eta, z, x) - eta / 2f64.sqrt()).abs() < 1e-3);
    }
    assert!(oracle_compatible(0.70, z, x));
    assert!(!oracle_compatible(0.715, z, x));
}

#[test]
fn solver_agrees_with_oracle_on_scans() {
    let opts = SolverOptions::default();
    let pairs = [
        ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
        ([0.0, 0.0, 1.0], unit([1.0, 0.0, 1.0])),
        (unit([1.0, 1.0, 0.0]), unit([0.0, 1.0, -1.0])),
        ([0.0, 0.0, 1.0], unit([1.0, 0.0, -0.2])),
    ];
    for (a, b) in pairs {
        let mut verdicts = Vec::new();
        for k in 0..=20 {
            let eta = 0.05 * k as f64;
            let pa = Povm::unsharp_qubit(eta, a).unwrap();
            let pb = Povm::unsharp_qubit(eta, b).unwrap();
            let r = joint_povm_feasibility(&pa, &pb, &opts).unwrap();
            let value = oracle_value(eta, a, b);
            // within 0.01 of the frontier the grid oracle is not decisive
            if (value - 0.5).abs() > 0.01 {
                let want = if value <= 0.5 {
                    Verdict::Compatible
                } else {
                    Verdict::Incompatible
                };
                assert_eq!(
                    r.verdict, want,
                    "axes {a:?} {b:?} eta {eta}: oracle {value}"
                );
            }
            if let Some(Joint::Povm(j)) = &r.joint {
                let (ma, mb) = marginals(j).unwrap();
                for (x, y) in ma
                    .effects()
                    .iter()
                    .zip(pa.effects())
                    .chain(mb.effects().iter().zip(pb.effects()))
                {
                    assert!(x.matrix().max_abs_diff(y.matrix()) < 1e-7);
                }
            }
            verdicts.push(r.verdict);
        }
        // monotone in η: once incompatible, never compatible again
        let decided: Vec<Verdict> = verdicts
            .into_iter()
            .filter(|v| *v != Verdict::Undecided)
            .collect();
        let switches = decided.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(switches <= 1, "{decided:?}");
        assert!(decided.first() == Some(&Verdict::Compatible));
    }
}

#[test]
fn solver_agrees_with_oracle_at_acceptance_points() {
    let (z, x) = ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
    let opts = SolverOptions::default();
    for eta in [0.5, 0.65, 0.75, 0.9] {
        let r = joint_povm_feasibility(
            &Povm::unsharp_qubit(eta, z).unwrap(),
            &Povm::unsharp_qubit(eta, x).unwrap(),
            &opts,
        )
        .unwrap();
        let want = if oracle_compatible(eta, z, x) {
            Verdict::Compatible
        } else {
            Verdict::Incompatible
        };
        assert_eq!(r.verdict, want, "eta {eta}");
    }
}

#[test]
fn fine_scan_near_orthogonal_frontier() {
    let (z, x) = ([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
    let opts = SolverOptions::default();
    let mut out = Vec::new();
    for k in 0..=20 {
        let eta = 0.68 + 0.003 * k as f64;
        let r = joint_povm_feasibility(
            &Povm::unsharp_qubit(eta, z).unwrap(),
            &Povm::unsharp_qubit(eta, x).unwrap(),
            &opts,
        )
        .unwrap();
        out.push((eta, r.verdict, r.iterations));
    }
    eprintln!("{out:?}");
    for (eta, v, _) in &out {
        if *eta < 0.70 {
            assert_ne!(*v, Verdict::Incompatible, "eta {eta}");
        }
        if *eta > 0.715 {
            assert_ne!(*v, Verdict::Compatible, "eta {eta}");
        }
    }
}
