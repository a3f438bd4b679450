use brwlab::analysis::{fit_points, pz_bound, pz_verify, FitModel, ModelComparison};
use proptest::prelude::*;

fn grid() -> Vec<f64> {
    (0..8).map(|i| 4.0 * 1.6f64.powi(i)).collect()
}

proptest! {
    #[test]
    fn fitters_recover_noiseless_slopes(slope in -3.0f64..-0.1, intercept in -2.0f64..2.0) {
        let ns = grid();
        let zeros = vec![0.0; ns.len()];
        for model in [FitModel::Power, FitModel::StretchedExp, FitModel::Exp] {
            let ps: Vec<f64> = ns
                .iter()
                .map(|&n| {
                    let t = match model {
                        FitModel::Power => n.ln(),
                        FitModel::StretchedExp => n.sqrt(),
                        FitModel::Exp => n,
                    };
                    // keep exponents representable for the exponential model
                    (intercept + slope * t / if model == FitModel::Exp { 10.0 } else { 1.0 }).exp()
                })
                .collect();
            let fit = fit_points(model, &ns, &ps, &zeros, (0.0, f64::INFINITY)).unwrap();
            let expected = if model == FitModel::Exp { slope / 10.0 } else { slope };
            prop_assert!((fit.slope - expected).abs() <= 1e-6);
            prop_assert!((fit.intercept - intercept).abs() <= 1e-6);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&fit.r_squared));
        }
    }

    #[test]
    fn model_comparison_is_deterministic(noise in proptest::collection::vec(0.9f64..1.1, 8)) {
        let ns = grid();
        let ps: Vec<f64> = ns.iter().zip(&noise).map(|(&n, e)| (-0.5 * n.sqrt()).exp() * e).collect();
        let hs: Vec<f64> = ps.iter().map(|p| 0.05 * p).collect();
        let a = ModelComparison::from_points(&ns, &ps, &hs, (0.0, 1e9)).unwrap();
        let b = ModelComparison::from_points(&ns, &ps, &hs, (0.0, 1e9)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pz_bound_is_a_probability(p in 1.01f64..6.0, eps in 0.0f64..=1.0, m1 in 0.0f64..10.0, excess in 1.0f64..50.0) {
        let mp = m1.powf(p) * excess;
        let b = pz_bound(p, eps, m1, mp).unwrap();
        prop_assert!((0.0..=1.0).contains(&b.value));
    }

    #[test]
    fn pz_matches_the_classical_bound_at_p2(eps in 0.0f64..=1.0, m1 in 0.01f64..10.0, excess in 1.0f64..50.0) {
        let m2 = m1 * m1 * excess;
        let b = pz_bound(2.0, eps, m1, m2).unwrap();
        let classical = (1.0 - eps).powi(2) * m1 * m1 / m2;
        prop_assert!((b.value - classical).abs() <= 1e-12);
    }

    #[test]
    fn pz_never_exceeds_the_truth(
        atoms in proptest::collection::vec((0.0f64..20.0, 0.01f64..1.0), 1..=5),
        p in 1.1f64..4.0,
        eps in 0.0f64..=1.0,
    ) {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let atoms: Vec<(f64, f64)> = atoms.iter().map(|&(x, w)| (x, w / total)).collect();
        prop_assert!(pz_verify(&atoms, p, eps).unwrap().pass);
    }
}

#[test]
fn pz_hand_cases() {
    let constant = pz_verify(&[(1.0, 1.0)], 2.0, 0.0).unwrap();
    assert_eq!((constant.bound.value, constant.truth), (1.0, 1.0));
    let two_point = pz_verify(&[(0.0, 0.5), (2.0, 0.5)], 2.0, 0.5).unwrap();
    assert!((two_point.bound.value - 0.125).abs() < 1e-15);
    assert_eq!(two_point.conditional_truth, 0.5);
    assert!(pz_bound(1.0, 0.5, 1.0, 1.0).is_err());
    assert!(pz_bound(2.0, 1.5, 1.0, 1.0).is_err());
}
