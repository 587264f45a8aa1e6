//! Property tests for the structural invariants: homogeneity and
//! linearity in the measure, restriction algebra, maximal-function
//! subadditivity, capacity monotonicity and threshold-enrichment
//! monotonicity.

use proptest::prelude::*;

use potkit::capacity::{self, DiscreteSet};
use potkit::geom;
use potkit::kernels::Kernel;
use potkit::lipschitz;
use potkit::measures::{RadonMeasure, Region};
use potkit::operators;

fn atoms_strategy(dim: usize, max_atoms: usize) -> impl Strategy<Value = RadonMeasure> {
    prop::collection::vec(
        (
            prop::collection::vec(-0.875f64..0.875, dim),
            -1.0f64..1.0,
        ),
        1..max_atoms,
    )
    .prop_filter_map("distinct atom locations", move |atoms| {
        RadonMeasure::from_atoms(dim, atoms).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_variation_is_absolutely_homogeneous(
        mu in atoms_strategy(2, 6),
        alpha in -4.0f64..4.0,
    ) {
        let scaled = mu.scaled(alpha);
        prop_assert!(
            (scaled.total_variation() - alpha.abs() * mu.total_variation()).abs()
                <= 1e-12 * (1.0 + mu.total_variation())
        );
    }

    #[test]
    fn restriction_partitions_and_is_idempotent(
        mu in atoms_strategy(2, 8),
        cx in -0.5f64..0.5,
        cy in -0.5f64..0.5,
        r in 0.05f64..1.0,
    ) {
        let ball = Region::Ball { center: vec![cx, cy], radius: r };
        let inside = mu.restrict(&ball);
        let outside = mu.restrict(&ball.complement());
        prop_assert_eq!(
            inside.atoms.len() + outside.atoms.len(),
            mu.atoms.len()
        );
        prop_assert!(
            (inside.total_variation() + outside.total_variation() - mu.total_variation()).abs()
                <= 1e-12
        );
        prop_assert_eq!(inside.restrict(&ball), inside);
    }

    #[test]
    fn potential_and_truncation_are_linear_in_atom_measures(
        m1 in atoms_strategy(2, 4),
        m2 in atoms_strategy(2, 4),
        eps in 0.01f64..0.5,
    ) {
        let k = Kernel::riesz(2).unwrap();
        let x = vec![2.5, 2.5]; // outside the atom box, no collisions
        let sum = m1.try_add(&m2).unwrap();
        let p_sum = operators::potential(&k, &sum, &[x.clone()]).unwrap().scalars()[0];
        let p1 = operators::potential(&k, &m1, &[x.clone()]).unwrap().scalars()[0];
        let p2 = operators::potential(&k, &m2, &[x.clone()]).unwrap().scalars()[0];
        prop_assert!((p_sum - (p1 + p2)).abs() <= 1e-11 * (1.0 + p1.abs() + p2.abs()));

        let t_sum = operators::truncated_singular(&k, &sum, &x, eps).unwrap();
        let t1 = operators::truncated_singular(&k, &m1, &x, eps).unwrap();
        let t2 = operators::truncated_singular(&k, &m2, &x, eps).unwrap();
        for ax in 0..2 {
            prop_assert!(
                (t_sum[ax] - (t1[ax] + t2[ax])).abs()
                    <= 1e-11 * (1.0 + t1[ax].abs() + t2[ax].abs())
            );
        }
    }

    #[test]
    fn maximal_function_is_subadditive(
        m1 in atoms_strategy(2, 4),
        m2 in atoms_strategy(2, 4),
        px in -1.5f64..1.5,
        py in -1.5f64..1.5,
    ) {
        let radii = operators::geometric_radii(0.05, 6.0);
        let pts = vec![vec![px, py]];
        let sum = m1.try_add(&m2).unwrap();
        let ms = operators::maximal_function(&sum, &pts, &radii).unwrap().scalars()[0];
        let m1v = operators::maximal_function(&m1, &pts, &radii).unwrap().scalars()[0];
        let m2v = operators::maximal_function(&m2, &pts, &radii).unwrap().scalars()[0];
        prop_assert!(ms <= m1v + m2v + 1e-12);
    }

    #[test]
    fn weak_l1_norm_is_monotone_under_threshold_enrichment(
        values in prop::collection::vec(0.0f64..10.0, 16..64),
        thresholds in prop::collection::vec(0.01f64..12.0, 1..12),
        extra in 0.01f64..12.0,
    ) {
        let base = lipschitz::weak_l1_norm(&values, 0.125, &thresholds);
        let mut enriched_t = thresholds.clone();
        enriched_t.push(extra);
        let enriched = lipschitz::weak_l1_norm(&values, 0.125, &enriched_t);
        prop_assert!(enriched.sup_product >= base.sup_product);
    }
}

proptest! {
    // capacity programs solve a dense LP per case; keep the case count low
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn capacity_is_monotone_under_set_inclusion(
        mask in prop::collection::vec(any::<bool>(), 16),
        extra_index in 0usize..16,
    ) {
        let h = 0.25;
        let cell = |i: usize| vec![(i % 4) as f64 * h + h / 2.0, (i / 4) as f64 * h + h / 2.0];
        let mut small: Vec<Vec<f64>> = (0..16).filter(|i| mask[*i]).map(cell).collect();
        if small.is_empty() {
            small.push(cell(extra_index));
        }
        let mut large = small.clone();
        let candidate = cell(extra_index);
        if !large.contains(&candidate) {
            large.push(candidate);
        }
        let e = DiscreteSet::from_centers(2, h, small).unwrap();
        let f = DiscreteSet::from_centers(2, h, large).unwrap();
        let ve = capacity::capacity_lp(&e, 1).unwrap().value;
        let vf = capacity::capacity_lp(&f, 1).unwrap().value;
        prop_assert!(ve <= vf + 1e-10);
    }

    #[test]
    fn capacity_certificate_always_holds(
        mask in prop::collection::vec(any::<bool>(), 12),
        refinement in 1usize..3,
    ) {
        let h = 0.2;
        let centers: Vec<Vec<f64>> = (0..12)
            .filter(|i| mask[*i])
            .map(|i| vec![(i % 4) as f64 * h + h / 2.0, (i / 4) as f64 * h + h / 2.0])
            .collect();
        prop_assume!(!centers.is_empty());
        let set = DiscreteSet::from_centers(2, h, centers).unwrap();
        let est = capacity::capacity_lp(&set, refinement).unwrap();
        prop_assert!(est.certificate_max_constraint <= 1.0 + 1e-9);
        prop_assert!(est.weights.iter().all(|w| *w >= 0.0));
        let mass: f64 = est.weights.iter().sum();
        prop_assert!((mass - est.value).abs() <= 1e-9 * (1.0 + est.value));
    }

    #[test]
    fn capacity_rescales_exactly(
        mask in prop::collection::vec(any::<bool>(), 9),
        lambda_exp in 1i32..3,
    ) {
        let h = 0.25;
        let lambda = 2.0f64.powi(lambda_exp);
        let centers: Vec<Vec<f64>> = (0..9)
            .filter(|i| mask[*i])
            .map(|i| vec![(i % 3) as f64 * h + h / 2.0, (i / 3) as f64 * h + h / 2.0])
            .collect();
        prop_assume!(!centers.is_empty());
        let base = DiscreteSet::from_centers(2, h, centers.clone()).unwrap();
        let scaled = DiscreteSet::from_centers(
            2,
            lambda * h,
            centers.iter().map(|c| geom::scale(c, lambda)).collect(),
        )
        .unwrap();
        let v = capacity::capacity_lp(&base, 1).unwrap().value;
        let vs = capacity::capacity_lp(&scaled, 1).unwrap().value;
        prop_assert!((vs - lambda * v).abs() <= 1e-9 * (1.0 + vs));
    }
}
