mod common;

use std::sync::Arc;

use common::{random_game, random_qbf, rng, GameShape};
use pgsynth::cli::{parse_pg, print_pg};
use pgsynth::encoding::{encode_sequential, encode_true_concurrent, EncodeOptions};
use pgsynth::net::Marking;
use pgsynth::semantics::reach_tc;
use pgsynth::solving::{eval_bruteforce, qcir, qdimacs, solve_cegar, BruteForceCaps, Status};
use pgsynth::unfolding::unfold;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn firing_moves_exactly_the_flow(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), GameShape::default());
        let net = g.net();
        for m in net.reachable_markings().unwrap() {
            for t in net.enabled(&m).collect::<Vec<_>>() {
                let next = net.fire(&m, t).unwrap();
                let expected: Marking = m
                    .iter()
                    .filter(|p| !net.pre(t).contains(p))
                    .chain(net.post(t).iter().copied())
                    .collect();
                prop_assert_eq!(next, expected);
            }
        }
    }

    #[test]
    fn tc_reachability_is_contained_in_sequential(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), GameShape::default());
        let seq = g.net().reachable_markings().unwrap();
        let tc = reach_tc(g.net()).unwrap();
        prop_assert!(tc.is_subset(&seq));
    }

    #[test]
    fn unfoldings_are_homomorphic(seed in any::<u64>(), b in 1usize..=3) {
        let g = random_game(&mut rng(seed), GameShape::default());
        let u = unfold(&g, b).unwrap();
        prop_assert_eq!(u.verify_homomorphism(), Vec::<String>::new());
        let labelled: Marking = u.net().initial_marking().iter().map(|p| u.place_label(p)).collect();
        prop_assert_eq!(&labelled, g.net().initial_marking());
        for p in u.net().places() {
            prop_assert_eq!(u.game().is_env(p), g.is_env(u.place_label(p)));
            prop_assert_eq!(u.game().is_bad(p), g.is_bad(u.place_label(p)));
        }
    }

    #[test]
    fn pg_text_round_trips(seed in any::<u64>()) {
        let g = random_game(&mut rng(seed), GameShape::default());
        let text = print_pg(&g);
        let back = parse_pg(&text).unwrap();
        prop_assert_eq!(print_pg(&back), text);
        prop_assert_eq!(back.net(), g.net());
    }

    #[test]
    fn solvers_agree_on_random_formulas(seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = random_qbf(&mut r, 12, 24);
        let expected = eval_bruteforce(&q, BruteForceCaps::default()).unwrap().status;
        prop_assert_eq!(solve_cegar(&q, None).status, expected);
        let cnf = qdimacs::to_cnf(&q);
        prop_assert_eq!(qdimacs::solve_by_expansion(&cnf, None).unwrap().status, expected);
        let text = qcir::to_qcir(&q);
        let back = qcir::parse_qcir(&text).unwrap();
        prop_assert_eq!(qcir::to_qcir(&back), text);
        prop_assert_eq!(solve_cegar(&back, None).status, expected);
        let qd = qdimacs::to_qdimacs(&q);
        prop_assert_eq!(qdimacs::parse_qdimacs(&qd).unwrap().render(), qd);
    }

    #[test]
    fn cegar_witnesses_satisfy_the_formula(seed in any::<u64>()) {
        let q = random_qbf(&mut rng(seed), 10, 20);
        let r = solve_cegar(&q, None);
        if r.status == Status::Sat {
            let x = r.witness.unwrap();
            let pinned: Vec<(u32, bool)> = q.exists.iter().copied().zip(x).collect();
            let fixed = q.with_units(&pinned);
            prop_assert_eq!(eval_bruteforce(&fixed, BruteForceCaps::default()).unwrap().status, Status::Sat);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(24) })]

    /// The encodings of small games decided by exhaustive evaluation and by
    /// the counterexample-guided solver give the same answer.
    #[test]
    fn encodings_solve_the_same_with_every_backend(seed in any::<u64>(), n in 2usize..=4) {
        let shape = GameShape { max_places: 4, max_transitions: 3, ..GameShape::default() };
        let g = random_game(&mut rng(seed), shape);
        let u = Arc::new(unfold(&g, 1).unwrap());
        let problems = [
            encode_sequential(&u, n).unwrap(),
            encode_true_concurrent(&u, n, EncodeOptions::default()).unwrap(),
        ];
        for p in problems {
            let caps = BruteForceCaps { existential: 10, universal: 14 };
            let Ok(exact) = eval_bruteforce(&p.qbf, caps) else { continue };
            prop_assert_eq!(solve_cegar(&p.qbf, None).status, exact.status);
        }
    }
}
