use measkit::linalg::Povm;
use measkit::pointer::erf;
use measkit::tomography::{
    estimate_eta, eta_of, exact_frequencies, kappa_sweep, qubit_probes,
    reconstruct_from_frequencies, reconstruct_povm, simulate_counts,
};
use proptest::prelude::*;
use rayon::prelude::*;

const Z: [f64; 3] = [0.0, 0.0, 1.0];

#[test]
fn kappa_sweep_tracks_erf_and_increases() {
    let kappas = [0.25, 0.5, 1.0, 2.0];
    let pts = kappa_sweep(&kappas, 1.0, 100_000, 200, 2024).unwrap();
    for p in &pts {
        let truth = erf(p.kappa / std::f64::consts::SQRT_2);
        assert!(p.stderr > 0.0);
        assert!((p.eta_hat - truth).abs() <= 3.0 * p.stderr, "{p:?}");
    }
    assert!(pts.windows(2).all(|w| w[1].eta_hat > w[0].eta_hat));
}

#[test]
fn bootstrap_interval_covers_truth() {
    let probes = qubit_probes();
    let eta = 0.6;
    let truth = Povm::unsharp_qubit(eta, Z).unwrap();
    let covered: usize = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let t = simulate_counts(&truth, &probes, 100_000, seed).unwrap();
            let r = estimate_eta(&t, &probes, 200, seed).unwrap();
            usize::from((r.eta_hat - eta).abs() <= 2.0 * r.eta_stderr)
        })
        .sum();
    assert!(covered >= 90, "coverage {covered}/100");
}

#[test]
fn error_shrinks_with_shots() {
    let probes = qubit_probes();
    let eta = 0.6;
    let truth = Povm::unsharp_qubit(eta, Z).unwrap();
    let mean_err = |shots: u64| -> f64 {
        (0..10u64)
            .map(|seed| {
                let t = simulate_counts(&truth, &probes, shots, 1000 + seed).unwrap();
                (eta_of(&reconstruct_povm(&t, &probes).unwrap()).unwrap() - eta).abs()
            })
            .sum::<f64>()
            / 10.0
    };
    let (small, large) = (mean_err(10_000), mean_err(1_000_000));
    assert!(
        large <= 3.0 * small / 10.0,
        "10^4: {small:e}, 10^6: {large:e}"
    );
}

#[test]
fn per_entry_error_scale_at_1e5_shots() {
    let probes = qubit_probes();
    let truth = Povm::unsharp_qubit(0.6, Z).unwrap();
    let errs: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let t = simulate_counts(&truth, &probes, 100_000, seed).unwrap();
            let hat = reconstruct_povm(&t, &probes).unwrap();
            hat.effects()
                .iter()
                .zip(truth.effects())
                .map(|(a, b)| a.matrix().max_abs_diff(b.matrix()))
                .fold(0.0, f64::max)
        })
        .collect();
    let typical = {
        let mut s = errs.clone();
        s.sort_by(f64::total_cmp);
        s[50]
    };
    assert!(typical <= 0.02, "median per-entry error {typical}");
    assert!(errs.iter().all(|&e| e < 0.05));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exact_frequencies_round_trip(eta in 0.0f64..=1.0, theta in 0.0f64..std::f64::consts::PI, phi in 0.0f64..std::f64::consts::TAU) {
        let axis = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let p = Povm::unsharp_qubit(eta, axis).unwrap();
        let probes = qubit_probes();
        let hat = reconstruct_from_frequencies(p.labels(), &exact_frequencies(&p, &probes).unwrap(), &probes).unwrap();
        for (a, b) in hat.effects().iter().zip(p.effects()) {
            prop_assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-9);
        }
    }
}
