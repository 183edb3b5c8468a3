use nbbm_core::coupling::{config_distance, CoupledPair, CouplingMode};
use nbbm_core::fbpde::{FlowParams, InitialTail, SplitCut};
use nbbm_core::killedbm::{simulate_killed, BoundaryPath, KilledParams};
use nbbm_core::nbbm::{InitialCondition, ParticleSystem};
use nbbm_core::waves::TravellingWave;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn selection_only_moves_particles_right(seed in any::<u64>(), n in 2usize..40) {
        let mut ps = ParticleSystem::new(n, &InitialCondition::iid_minimal(), seed).unwrap();
        for _ in 0..200 {
            let before = ps.positions().to_vec();
            let ev = ps.step_event().unwrap();
            prop_assert_eq!(ps.positions().len(), n);
            prop_assert!(ev.displacement >= 0.0);
            prop_assert_eq!(ps.positions()[ev.victim_index], ps.positions()[ev.target_index]);
            prop_assert!(before.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn same_seed_same_path(seed in any::<u64>(), n in 2usize..20) {
        let run = || {
            let mut ps = ParticleSystem::new(n, &InitialCondition::AllZero, seed).unwrap();
            ps.advance_to(3.0).unwrap();
            ps.positions().to_vec()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn coupled_distance_is_a_capped_mean_below_the_matching_cost(seed in any::<u64>(), n in 2usize..12) {
        let init = InitialCondition::iid_minimal();
        let mut pair = CoupledPair::from_initial(n, &init, &InitialCondition::AllZero, seed, CouplingMode::Full).unwrap();
        let mut ok = true;
        pair.advance_to(2.0, |ev| ok &= (0.0..=1.0).contains(&ev.w_after)).unwrap();
        prop_assert!(ok);
        let w = pair.distance();
        prop_assert!((w - config_distance(pair.a(), pair.b())).abs() < 1e-12);
        prop_assert!(pair.matching_cost() >= w - 1e-12);
    }

    #[test]
    fn diagonal_pair_never_separates(seed in any::<u64>(), n in 2usize..16, mode in prop_oneof![Just(CouplingMode::Full), Just(CouplingMode::Literal)]) {
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut pair = CoupledPair::new(x.clone(), x, seed, mode).unwrap();
        let mut zero = true;
        pair.advance_to(2.0, |ev| zero &= ev.w_after == 0.0).unwrap();
        prop_assert!(zero);
        prop_assert_eq!(pair.a(), pair.b());
    }

    #[test]
    fn wave_tail_is_a_survival_function(c in 1.415f64..3.0, x in 0.0f64..30.0, h in 0.0f64..2.0) {
        let w = TravellingWave::new(c).unwrap();
        let (a, b) = (w.tail_at(x), w.tail_at(x + h));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn killed_paths_die_before_the_query_or_survive_above(seed in any::<u64>(), speed in 0.5f64..2.0) {
        let b = BoundaryPath::linear(-1.0, speed, 1.0).unwrap();
        let p = KilledParams::new(1.0, 200, seed);
        let u0 = InitialTail::heaviside();
        for s in simulate_killed(&u0, &b, &p).unwrap() {
            match (s.tau, s.position) {
                (Some(t), None) => prop_assert!((0.0..=1.0).contains(&t)),
                (None, Some(x)) => prop_assert!(x > b.eval(1.0).unwrap()),
                other => prop_assert!(false, "inconsistent sample {other:?}"),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn flow_keeps_unit_mass_right_of_boundary(rate in 0.8f64..3.0, shift in -1.0f64..1.0) {
        let params = FlowParams { dx: 0.04, dt: 0.01, ..FlowParams::default() };
        let mut s = SplitCut::new(&InitialTail::exp(rate).shifted(shift), params).unwrap();
        for _ in 0..100 {
            s.step().unwrap();
            prop_assert!(s.boundary().is_finite());
        }
        let prof = s.profile();
        prop_assert!(prof.u.iter().all(|&u| u >= 0.0));
        prop_assert!((prof.mass() - 1.0).abs() < 1e-9, "mass {}", prof.mass());
        for (i, &u) in prof.u.iter().enumerate() {
            if prof.edge(i + 1) <= prof.boundary - 1e-12 {
                prop_assert_eq!(u, 0.0);
            }
        }
    }
}
