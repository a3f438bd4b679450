use brwlab::diagrams::{evaluate_truncated, DenseKernel, PinnedDiagram};
use brwlab::lattice::graph_norm;
use brwlab::moments::{exact_moment, MomentRequest, Truncation};
use brwlab::offspring::OffspringDistribution;
use brwlab::skeletons::enumerate_skeletons;
use proptest::prelude::*;

fn point(dim: usize) -> impl Strategy<Value = Vec<i64>> {
    proptest::collection::vec(-3i64..=3, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn diagrams_are_nonnegative_and_grow_with_n(
        k in 1usize..=3,
        pick in any::<prop::sample::Index>(),
        dim in 1usize..=2,
        n in 1usize..=5,
        pins in proptest::collection::vec(point(2), 4),
    ) {
        let set = enumerate_skeletons(k).unwrap();
        let s = pick.get(set.items()).clone();
        let pins: Vec<Vec<i64>> = pins.into_iter().take(k + 1).map(|p| p[..dim].to_vec()).collect();
        let d = PinnedDiagram::new(s, pins).unwrap();
        let a = evaluate_truncated(&d, n).unwrap();
        let b = evaluate_truncated(&d, n + 1).unwrap();
        prop_assert!(a.value >= 0.0);
        prop_assert_eq!(a.truncation_error_bound, 0.0);
        prop_assert!(b.value >= a.value);
    }

    #[test]
    fn diagrams_vanish_beyond_their_reach(
        k in 1usize..=3,
        pick in any::<prop::sample::Index>(),
        n in 1usize..=4,
        x in point(2),
    ) {
        let set = enumerate_skeletons(k).unwrap();
        let s = pick.get(set.items()).clone();
        let edges = s.edge_count();
        let mut pins = vec![vec![0i64, 0]; k];
        pins.push(x.clone());
        let v = evaluate_truncated(&PinnedDiagram::new(s, pins).unwrap(), n).unwrap().value;
        if graph_norm(&x) as usize > n * edges {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn maximal_diagram_is_symmetric_under_pin_permutation(k in 1usize..=3, n in 1usize..=4, x in point(2)) {
        let dense = DenseKernel::new(2, n).unwrap();
        let set = enumerate_skeletons(k).unwrap();
        let mut last = vec![vec![0i64, 0]; k];
        last.push(x.clone());
        let mut first = vec![x.clone()];
        first.extend(vec![vec![0i64, 0]; k]);
        let max_over = |pins: &[Vec<i64>]| {
            set.injective()
                .map(|s| dense.evaluate(s, pins).unwrap().unwrap_or(0.0))
                .fold(0.0, f64::max)
        };
        let (a, b) = (max_over(&last), max_over(&first));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(b).max(1e-300), "{} vs {}", a, b);
    }
}

#[test]
fn truncated_moments_grow_with_n_and_k() {
    for dim in 1..=3 {
        for mu in [OffspringDistribution::binary(), OffspringDistribution::geometric()] {
            let mut previous_n = vec![0.0; 4];
            for n in [2usize, 4, 8] {
                let mut previous_k = 0.0;
                for k in 1..=3 {
                    let v = exact_moment(&MomentRequest::at_origin(dim, k, Truncation::Steps { n }, mu.clone()))
                        .unwrap()
                        .value;
                    // L(0) >= 1 always, so E[L^k] increases with k
                    assert!(v >= previous_k, "d={dim} n={n} k={k}");
                    assert!(v >= previous_n[k], "d={dim} n={n} k={k}");
                    previous_k = v;
                    previous_n[k] = v;
                }
                let m1 = previous_n[1];
                assert!(previous_n[2] >= m1 * m1, "Cauchy-Schwarz d={dim} n={n}");
            }
        }
    }
}
