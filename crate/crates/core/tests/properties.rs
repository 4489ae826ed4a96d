use linenet::assign::{opt_assign_instance, opt_dp};
use linenet::spatial::{
    allocate_gs, allocate_mtr, allocate_nn, allocate_ugs, generate_instance, CapacityLaw, SpatialInstance,
};
use linenet::DistributionSpec;
use proptest::prelude::*;

fn law() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (0.3f64..3.0).prop_map(|r| DistributionSpec::exponential(r).unwrap()),
        (0.3f64..3.0).prop_map(|v| DistributionSpec::deterministic(v).unwrap()),
        (0.3f64..3.0).prop_map(|m| DistributionSpec::uniform(m).unwrap()),
        (1.5f64..6.0, 0.3f64..3.0).prop_map(|(cv2, m)| linenet::h2_from_cv2(cv2, m).unwrap()),
    ]
}

fn capacity() -> impl Strategy<Value = CapacityLaw> {
    prop_oneof![
        (1u32..6).prop_map(CapacityLaw::Constant),
        (1u32..3, 0u32..3).prop_map(|(lo, d)| CapacityLaw::UniformRange { lo, hi: lo + d }),
    ]
}

fn instance() -> impl Strategy<Value = SpatialInstance> {
    (law(), law(), capacity(), 1usize..120, 1usize..120, any::<u64>())
        .prop_map(|(u, s, c, n, m, seed)| generate_instance(&u, &s, n, m, &c, seed).unwrap())
}

fn sorted_points(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..100.0, 1..max).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mtr_and_ugs_share_profile_and_total(inst in instance()) {
        let (m, pm) = allocate_mtr(&inst);
        let (u, pu) = allocate_ugs(&inst);
        prop_assert_eq!(&pm, &pu);
        prop_assert_eq!(m.matched, u.matched);
        let (tm, tu) = (m.horizon_total(&inst), u.horizon_total(&inst));
        prop_assert!((tm - tu).abs() <= 1e-9 * tm.max(1.0));
        prop_assert!((tm - pm.integral()).abs() <= 1e-9 * tm.max(1.0));
    }

    #[test]
    fn unidirectional_policies_serve_rightwards(inst in instance()) {
        for r in [allocate_mtr(&inst).0, allocate_ugs(&inst).0] {
            prop_assert!(r.respects_capacity(&inst));
            for (i, s) in r.assignment.iter().enumerate() {
                if let Some(j) = s {
                    prop_assert!(inst.servers()[*j] >= inst.users()[i]);
                }
            }
        }
    }

    #[test]
    fn every_policy_respects_capacity(inst in instance()) {
        prop_assert!(allocate_nn(&inst).respects_capacity(&inst));
        prop_assert!(allocate_gs(&inst).respects_capacity(&inst));
    }

    #[test]
    fn opt_is_non_crossing_and_dominates(inst in instance()) {
        let (mtr, _) = allocate_mtr(&inst);
        let restricted = inst.with_users(&mtr.matched_users());
        prop_assume!(!restricted.users().is_empty());
        let opt = opt_assign_instance(&restricted).unwrap();
        prop_assert!(opt.is_non_crossing());
        let tol = 1e-9 * opt.total_cost.max(1.0);
        prop_assert!(opt.total_cost <= mtr.total + tol);
        prop_assert!(opt.total_cost <= allocate_nn(&restricted).total + tol);
        prop_assert!(opt.total_cost <= allocate_gs(&restricted).total + tol);
        let mut load = vec![0u32; restricted.servers().len()];
        for &j in &opt.assignment {
            load[j] += 1;
        }
        prop_assert!(load.iter().zip(restricted.capacities()).all(|(l, c)| l <= c));
    }

    #[test]
    fn dp_shift_invariant(u in sorted_points(12), s in sorted_points(20), shift in -50.0f64..50.0) {
        prop_assume!(u.len() <= s.len());
        let a = opt_dp(&u, &s, 1).unwrap();
        let u2: Vec<f64> = u.iter().map(|x| x + shift).collect();
        let s2: Vec<f64> = s.iter().map(|x| x + shift).collect();
        let b = opt_dp(&u2, &s2, 1).unwrap();
        prop_assert!((a.total_cost - b.total_cost).abs() < 1e-7 * a.total_cost.max(1.0));
    }

    #[test]
    fn more_capacity_never_costs_more(u in sorted_points(12), s in sorted_points(12)) {
        prop_assume!(u.len() <= s.len());
        let one = opt_dp(&u, &s, 1).unwrap().total_cost;
        let two = opt_dp(&u, &s, 2).unwrap().total_cost;
        prop_assert!(two <= one + 1e-9);
    }
}
