use measkit::linalg::ComplexMatrix;
use measkit::pointer::{
    erf, eta_analytic, induced_effects_numeric, PointerConfig, PointerGrid, ShiftSign,
};
use proptest::prelude::*;

/// (2/√π) ∫_0^x e^{-t²} dt by the trapezoid rule with step h.
fn erf_trapezoid(x: f64, h: f64) -> f64 {
    let n = (x / h).round() as usize;
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut acc = 0.5 * (f(0.0) + f(x));
    for j in 1..n {
        acc += f(j as f64 * h);
    }
    acc * h * 2.0 / std::f64::consts::PI.sqrt()
}

#[test]
fn erf_matches_trapezoid_reference() {
    for x in [0.01, 0.1, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0] {
        let want = erf_trapezoid(x, 1e-5);
        assert!(
            (erf(x) - want).abs() < 1e-9,
            "x = {x}: {} vs {want}",
            erf(x)
        );
    }
}

// statrs carries absolute errors up to ~4e-11 (near x = 0.5), so this is a
// coarse second opinion; the trapezoid reference above is the tight one.
#[test]
fn erf_matches_statrs() {
    for k in -600..=600 {
        let x = k as f64 * 0.01;
        let theirs = statrs::function::erf::erf(x);
        assert!((erf(x) - theirs).abs() < 1e-10, "x = {x}");
    }
}

#[test]
fn acceptance_grid_of_ratios() {
    for delta in [0.5, 1.0, 1.7, 2.5, 4.0] {
        for r in [0.0, 1.0, 2.0, 3.0, 4.0] {
            let kappa = r * delta;
            let (_, res) =
                induced_effects_numeric(&PointerConfig::new(kappa, delta).unwrap()).unwrap();
            let want = erf(kappa / (std::f64::consts::SQRT_2 * delta));
            assert!((res.eta - want).abs() < 1e-6, "κ = {kappa}, Δ = {delta}");
        }
    }
}

#[test]
fn strong_coupling_gives_projectors() {
    let (p, _) = induced_effects_numeric(&PointerConfig::new(100.0, 1.0).unwrap()).unwrap();
    assert!(
        p.effects()[0]
            .matrix()
            .max_abs_diff(&ComplexMatrix::unit(2, 0, 0))
            < 1e-9
    );
    assert!(
        p.effects()[1]
            .matrix()
            .max_abs_diff(&ComplexMatrix::unit(2, 1, 1))
            < 1e-9
    );
}

#[test]
fn halving_spacing_quarters_the_error() {
    // coarse grids so the quadrature error is far above rounding
    let (kappa, delta) = (1.3, 1.0);
    let half = kappa + 8.0 * delta;
    let truth = eta_analytic(kappa, delta).unwrap().eta;
    let err = |n: usize| {
        let g = PointerGrid {
            q_min: -half,
            q_max: half,
            n_points: n,
        };
        let (_, r) =
            induced_effects_numeric(&PointerConfig::with_grid(kappa, delta, g).unwrap()).unwrap();
        (r.eta - truth).abs()
    };
    let (e1, e2, e3) = (err(80), err(159), err(317));
    assert!(e1 / e2 > 3.5 && e2 / e3 > 3.5, "{e1:e} {e2:e} {e3:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn effects_sum_to_identity(kappa in 0.0f64..20.0, delta in 0.05f64..5.0) {
        let (p, _) = induced_effects_numeric(&PointerConfig::new(kappa, delta).unwrap()).unwrap();
        let total = p.effects()[0].matrix() + p.effects()[1].matrix();
        prop_assert!(total.max_abs_diff(&ComplexMatrix::identity(2)) < 1e-9);
    }

    #[test]
    fn eta_depends_only_on_ratio(kappa in 0.0f64..5.0, delta in 0.1f64..3.0, s in 0.1f64..10.0) {
        let a = PointerConfig::new(kappa, delta).unwrap();
        let g = a.grid;
        let scaled = PointerGrid { q_min: g.q_min * s, q_max: g.q_max * s, n_points: g.n_points };
        let b = PointerConfig::with_grid(kappa * s, delta * s, scaled).unwrap();
        let (_, ra) = induced_effects_numeric(&a).unwrap();
        let (_, rb) = induced_effects_numeric(&b).unwrap();
        prop_assert!((ra.eta - rb.eta).abs() < 1e-9);
    }

    #[test]
    fn sign_flip_swaps_effects_exactly(kappa in 0.0f64..10.0, delta in 0.1f64..3.0) {
        let cfg = PointerConfig::new(kappa, delta).unwrap();
        let (p, _) = induced_effects_numeric(&cfg).unwrap();
        let (m, _) = induced_effects_numeric(&cfg.with_shift_sign(ShiftSign::UpToNegative)).unwrap();
        prop_assert_eq!(p.effects()[0].matrix(), m.effects()[1].matrix());
        prop_assert_eq!(p.effects()[1].matrix(), m.effects()[0].matrix());
    }
}
