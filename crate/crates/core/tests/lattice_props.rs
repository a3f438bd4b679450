use brwlab::lattice::{graph_norm, heat_kernel, return_probabilities, transition_probabilities, truncated_green};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_kernel_conserves_mass(dim in 1usize..=4, n in 0usize..=24) {
        let p = heat_kernel(dim, n).unwrap();
        prop_assert!((p.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heat_kernel_vanishes_off_parity(dim in 1usize..=3, n in 0usize..=20) {
        let p = heat_kernel(dim, n).unwrap();
        p.for_each_point(|x, v| {
            if (n as u64 + graph_norm(x)) % 2 == 1 {
                assert_eq!(v, 0.0, "{x:?}");
            }
        });
    }

    #[test]
    fn heat_kernel_has_hyperoctahedral_symmetry(dim in 2usize..=3, n in 1usize..=16, swap in 0usize..3, flip in 0usize..3) {
        let p = heat_kernel(dim, n).unwrap();
        let (i, j) = (swap % dim, (swap + 1) % dim);
        p.for_each_point(|x, v| {
            let neg: Vec<i64> = x.iter().map(|c| -c).collect();
            let mut perm = x.to_vec();
            perm.swap(i, j);
            let mut flipped = x.to_vec();
            flipped[flip % dim] *= -1;
            // summation order differs between images, so allow rounding
            for y in [&neg, &perm, &flipped] {
                let w = p.get(y);
                assert!((w - v).abs() <= 1e-12 * v.abs(), "{x:?} -> {y:?}: {v} vs {w}");
            }
        });
    }

    #[test]
    fn truncated_green_grows_with_n(dim in 1usize..=3, n in 1usize..=16) {
        let small = truncated_green(dim, n).unwrap();
        let large = truncated_green(dim, n + 1).unwrap();
        small.for_each_point(|x, v| assert!(large.get(x) >= v, "{x:?}"));
    }
}

#[test]
fn local_limit_shape_is_bounded() {
    for dim in 1..=4usize {
        let p = return_probabilities(dim, 1025).unwrap();
        let scaled: Vec<f64> = (8..=1024).map(|n| (n as f64).powf(dim as f64 / 2.0) * (p[n] + p[n + 1])).collect();
        let hi = scaled.iter().cloned().fold(0.0, f64::max);
        let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(lo > 0.0 && hi / lo < 2.0, "d={dim}: [{lo}, {hi}]");
    }
}

#[test]
fn gaussian_envelope_window() {
    for dim in 1..=5usize {
        for n in [16usize, 64, 256] {
            let r = (2.0 * (n as f64).sqrt()) as i64;
            for a in 0..=r {
                for b in 0..=if dim > 1 { a } else { 0 } {
                    let e2 = (a * a + b * b) as f64;
                    if e2 > 4.0 * n as f64 {
                        continue;
                    }
                    let mut x = vec![0i64; dim];
                    x[0] = a;
                    if dim > 1 {
                        x[1] = b;
                    }
                    let p = transition_probabilities(&x, n + 1).unwrap();
                    let ratio = (p[n] + p[n + 1]) / ((n as f64).powf(-(dim as f64) / 2.0) * (-e2 / n as f64).exp());
                    assert!((1e-3..=10.0).contains(&ratio), "d={dim} n={n} x={x:?}: {ratio}");
                }
            }
        }
    }
}
