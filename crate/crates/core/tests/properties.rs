//! Randomized structural laws: metric axioms for the Hausdorff distances,
//! region enumeration invariants, and signed-permutation group laws.

use froglab_core::lattice::{enumerate, Region, SignedPermutation, Site};
use froglab_core::shape::{hausdorff, lattice_hausdorff};
use proptest::prelude::*;

fn cloud() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(
        prop::collection::vec(-4.0f64..4.0, 2),
        1..12,
    )
}

fn site_set() -> impl Strategy<Value = Vec<Site>> {
    prop::collection::btree_set((-6i64..=6, -6i64..=6), 1..15)
        .prop_map(|s| s.into_iter().map(|(a, b)| Site::new(vec![a, b])).collect())
}

fn perm() -> impl Strategy<Value = SignedPermutation> {
    (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(swap, n0, n1)| {
        let p = if swap { vec![1, 0] } else { vec![0, 1] };
        SignedPermutation::new(p, vec![n0, n1]).unwrap()
    })
}

proptest! {
    #[test]
    fn hausdorff_metric_laws(a in cloud(), b in cloud(), c in cloud()) {
        let dab = hausdorff(&a, &b).unwrap();
        let dba = hausdorff(&b, &a).unwrap();
        prop_assert!((dab - dba).abs() < 1e-12, "not symmetric");
        prop_assert!(hausdorff(&a, &a).unwrap() < 1e-12, "self-distance not zero");
        let dac = hausdorff(&a, &c).unwrap();
        let dcb = hausdorff(&c, &b).unwrap();
        prop_assert!(dab <= dac + dcb + 1e-9, "triangle violated");
    }

    #[test]
    fn lattice_and_float_hausdorff_agree(a in site_set(), b in site_set()) {
        let fa: Vec<Vec<f64>> = a.iter().map(|s| s.0.iter().map(|&c| c as f64).collect()).collect();
        let fb: Vec<Vec<f64>> = b.iter().map(|s| s.0.iter().map(|&c| c as f64).collect()).collect();
        let exact = hausdorff(&fa, &fb).unwrap();
        let bfs = lattice_hausdorff(&a, &b).unwrap() as f64;
        prop_assert!((exact - bfs).abs() < 1e-9, "routes disagree: {exact} vs {bfs}");
    }

    #[test]
    fn ball_enumeration_is_sorted_exact_and_complete(radius in 0u64..6) {
        let sites = enumerate(&Region::Ball { center: Site::zero(2), radius }).unwrap();
        prop_assert!(sites.windows(2).all(|w| w[0] < w[1]), "not strictly sorted");
        prop_assert!(sites.iter().all(|s| s.norm() <= radius), "outside the ball");
        // |B(0, m)| in d = 2 is 2 m^2 + 2 m + 1.
        prop_assert_eq!(sites.len() as u64, 2 * radius * radius + 2 * radius + 1);
    }

    #[test]
    fn sphere_enumeration_matches_ball_difference(radius in 1u64..6) {
        let sphere = enumerate(&Region::Sphere { center: Site::zero(2), radius }).unwrap();
        prop_assert!(sphere.iter().all(|s| s.norm() == radius));
        prop_assert_eq!(sphere.len() as u64, 4 * radius);
    }

    #[test]
    fn signed_permutation_group_laws(g in perm(), h in perm(), x in (-9i64..=9, -9i64..=9)) {
        let x = Site::new(vec![x.0, x.1]);
        let gh = g.compose(&h);
        prop_assert_eq!(gh.apply(&x), g.apply(&h.apply(&x)), "composition");
        let inv = g.inverse();
        prop_assert_eq!(inv.apply(&g.apply(&x)), x.clone(), "inverse");
        prop_assert_eq!(g.apply(&x).norm(), x.norm(), "norm not preserved");
    }
}
