use ief::lpengine::{solve_master, ColGenOptions};
use ief::payments::{
    brute_compare_ab, build_envy_graph, check_ief_with_payments, compute_a_payments, is_ief_able_a,
    permutation_condition, solve_subsidy_min, solve_utility_max, CompareConfig, CompareProblem, PaymentScheme,
};
use ief::testkit::{
    fixtures, full_lp_reference, random_instance, random_matching_lottery, random_normalized_instance,
    ReferenceProblem,
};
use ief::twoebm::{
    all_matchings, brute_force_2ebm, solve_2ebm, EdgePairWeights, PairIndexMap,
};
use ief::welfare_opt::{
    price_feasibility, price_lognash, price_utilitarian, solve_ief_welfare, unconstrained_optimum, DualPoint,
    WelfareProblem,
};
use ief::{Error, Objective, Rat, WelfareMeasure};
use num_traits::Zero;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dual(rng: &mut ChaCha8Rng, n: usize) -> DualPoint {
    let mut d = DualPoint::zero(n);
    for y in d.y.iter_mut() {
        *y = if rng.gen_bool(0.5) { rng.gen_range(0.0..2.0) } else { 0.0 };
    }
    d.z = rng.gen_range(-1.0..1.0);
    d
}

#[test]
fn pair_index_map_is_a_mirrored_bijection() {
    for n in 2..=12 {
        let map = PairIndexMap::new(n);
        let size = n * (n - 1);
        let mut seen = vec![false; size];
        for i in 0..n {
            for k in (0..n).filter(|&k| k != i) {
                let p = map.index(i, k);
                assert!(!seen[p]);
                seen[p] = true;
                assert_eq!(map.pair(p), (i, k));
                // one-based positions sum to N + 1
                assert_eq!((p + 1) + (map.index(k, i) + 1), size + 1);
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn two_ebm_matches_brute_force(seed in any::<u64>(), n in 2usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = EdgePairWeights::from_fn(n, |_, _, _, _| rng.gen_range(-1.0..1.0));
        let sol = solve_2ebm(&w).unwrap();
        let (b, v) = brute_force_2ebm(&w).unwrap();
        prop_assert!((sol.value - v).abs() < 1e-7);
        prop_assert_eq!(sol.matching, b);
    }

    #[test]
    fn pricing_weights_aggregate_to_the_dual_constraint(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_normalized_instance(&mut rng, n, 5);
        let values = inst.values_f64();
        let dual = random_dual(&mut rng, n);
        let util = price_utilitarian(values, &dual);
        let feas = price_feasibility(values, &dual);
        let logn = price_lognash(values, &dual);
        for b in all_matchings(n) {
            let sw = ief::model::matching_welfare(values, &b, WelfareMeasure::Utilitarian);
            prop_assert!((util.objective(&b) - dual.constraint_lhs(values, &b, sw)).abs() < 1e-9);
            prop_assert!((feas.objective(&b) - dual.constraint_lhs(values, &b, 0.0)).abs() < 1e-9);
            let lg = ief::model::matching_welfare(values, &b, WelfareMeasure::LogNash);
            prop_assert!((logn.objective(&b) - dual.constraint_lhs(values, &b, lg)).abs() < 1e-9);
        }
    }

    #[test]
    fn characterization_conditions_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let den = rng.gen_range(1..=4);
        let inst = random_instance(&mut rng, 3, 3, den);
        let lottery = random_matching_lottery(&mut rng, 3, 3);
        let graph = build_envy_graph(&inst, &lottery).unwrap();
        let able = is_ief_able_a(&graph);
        prop_assert_eq!(able, permutation_condition(&inst, &lottery).unwrap());
        match compute_a_payments(&graph) {
            Ok(p) => {
                prop_assert!(able);
                for v in &p {
                    prop_assert!(*v >= Rat::zero());
                }
                let r = check_ief_with_payments(&inst, &lottery, &PaymentScheme::A(p), Rat::zero()).unwrap();
                prop_assert!(r.holds);
            }
            Err(Error::PositiveCycle) => prop_assert!(!able),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn welfare_solvers_match_the_full_lp(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_normalized_instance(&mut rng, n, 4);
        for obj in Objective::ALL {
            let cg = solve_ief_welfare(&inst, obj);
            let full = full_lp_reference(&inst, ReferenceProblem::Welfare(obj));
            match (&cg, &full) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a.objective - b.value).abs() < 1e-6, "{obj}: {} vs {}", a.objective, b.value);
                    prop_assert!(ief::fairness::is_ief(&inst, &a.lottery, 1e-6).unwrap().holds);
                    let (_, unc) = unconstrained_optimum(&inst, WelfareMeasure::from(obj)).unwrap();
                    prop_assert!(a.objective <= unc + 1e-9);
                    if obj != Objective::LogNash {
                        prop_assert!(unc <= n as f64 * a.objective + 1e-6);
                    }
                }
                (Err(Error::Infeasible), Err(Error::Infeasible)) => {}
                (Err(Error::LogNashUnsupportable), Err(Error::LogNashUnsupportable)) => {}
                _ => prop_assert!(false, "{obj}: {:?} vs {:?}", cg.map(|r| r.objective), full.map(|r| r.value)),
            }
        }
    }

    #[test]
    fn column_generation_brackets_the_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_normalized_instance(&mut rng, 3, 4);
        let Ok(full) = full_lp_reference(&inst, ReferenceProblem::Welfare(Objective::Utilitarian)) else {
            return Ok(());
        };
        let problem = WelfareProblem::new(&inst, Objective::Utilitarian).unwrap();
        let res = solve_master(&problem, &ColGenOptions::for_size(3)).unwrap();
        for rec in &res.history {
            prop_assert!(rec.objective <= full.value + 1e-6);
            if let Some(bound) = rec.bound {
                prop_assert!(bound >= full.value - 1e-6);
            }
        }
        let last = res.history.last().unwrap();
        prop_assert!(last.bound.unwrap() - last.objective <= 1e-6 * (1.0 + last.objective.abs()));
    }

    #[test]
    fn payment_solvers_match_the_full_lp(seed in any::<u64>(), n in 2usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, n, n, 6);
        let eps = 1e-3;
        let sub = solve_subsidy_min(&inst, eps).unwrap();
        let full = full_lp_reference(&inst, ReferenceProblem::Subsidy).unwrap();
        prop_assert!((sub.lp_optimum - full.value).abs() < 1e-6, "subsidy {} vs {}", sub.lp_optimum, full.value);
        prop_assert!(sub.total >= full.value - 1e-6 && sub.total <= full.value + eps + 1e-6);
        prop_assert!(check_ief_with_payments(&inst, &sub.lottery, &sub.payments, eps).unwrap().holds);

        let rent = rng.gen_range(0.0..2.0);
        let u = solve_utility_max(&inst, rent, eps);
        let full = full_lp_reference(&inst, ReferenceProblem::Utility { rent });
        match (u, full) {
            (Ok(u), Ok(full)) => {
                prop_assert!(u.min_expected_utility >= full.value - eps - 1e-6, "utility {} vs {}", u.min_expected_utility, full.value);
                prop_assert!(u.rent_residual.abs() <= 1e-7);
                prop_assert!(check_ief_with_payments(&inst, &u.lottery, &u.payments, eps).unwrap().holds);
            }
            (Err(Error::Infeasible), Err(Error::Infeasible)) => {}
            (u, full) => prop_assert!(false, "{:?} vs {:?}", u.map(|r| r.lp_optimum), full.map(|r| r.value)),
        }
    }
}

#[test]
fn per_outcome_payments_dominate_a_and_b() {
    for f in [fixtures::subsidy_b_beats_a(), fixtures::subsidy_a_beats_b()] {
        let c = solve_subsidy_min(&f.instance, 1e-3).unwrap().total;
        let r = brute_compare_ab(&f.instance, &CompareConfig::new(CompareProblem::Subsidy)).unwrap();
        let best = r.best_a.unwrap().value.min(r.best_b.unwrap().value);
        assert!(c <= best + 1e-6, "{}: C {c} vs {best}", f.name);
    }
    for f in [fixtures::rent_b_beats_a(), fixtures::rent_a_beats_b()] {
        let c = solve_utility_max(&f.instance, 1.0, 1e-3).unwrap().lp_optimum;
        let mut config = CompareConfig::new(CompareProblem::Rent(1.0));
        config.denominator = 10;
        let r = brute_compare_ab(&f.instance, &config).unwrap();
        let best = r.best_a.unwrap().value.max(r.best_b.unwrap().value);
        assert!(c >= best - 1e-6, "{}: C {c} vs {best}", f.name);
    }
}

#[test]
fn rent_fixtures_separate_a_and_b() {
    let mut config = CompareConfig::new(CompareProblem::Rent(1.0));
    config.denominator = 10;
    let b_wins = brute_compare_ab(&fixtures::rent_b_beats_a().instance, &config).unwrap();
    let a_wins = brute_compare_ab(&fixtures::rent_a_beats_b().instance, &config).unwrap();
    let (a1, b1) = (b_wins.best_a.unwrap().value, b_wins.best_b.unwrap().value);
    let (a2, b2) = (a_wins.best_a.unwrap().value, a_wins.best_b.unwrap().value);
    assert!(b1 > a1 + 1e-6, "B {b1} vs A {a1}");
    assert!(a2 > b2 + 1e-6, "A {a2} vs B {b2}");
}

#[test]
fn phantom_payments_are_not_left_in_the_output() {
    let inst = ief::Instance::from_fractions(&[
        &[(0, 1), (1, 2), (1, 3)],
        &[(1, 3), (5, 6), (1, 1)],
        &[(0, 1), (0, 1), (5, 6)],
    ])
    .unwrap();
    let eps = 1e-3;
    let full = full_lp_reference(&inst, ReferenceProblem::Subsidy).unwrap();
    assert!((full.value - 2.0 / 3.0).abs() < 1e-9);
    // the plain repair of an optimal vertex that pays on undrawn matchings
    let rep = ief::payments::epsilon_repair(&full.x, &full.t, 1.0, eps, ief::payments::RepairMode::Subsidy).unwrap();
    assert!(rep.k2 > 0);
    assert!(!check_ief_with_payments(&inst, &rep.lottery, &rep.payments, eps).unwrap().holds);
    let sub = solve_subsidy_min(&inst, eps).unwrap();
    assert!(sub.repair.resolved);
    assert!(check_ief_with_payments(&inst, &sub.lottery, &sub.payments, eps).unwrap().holds);
    assert!(sub.total <= 2.0 / 3.0 + eps + 1e-9, "total {}", sub.total);
}
