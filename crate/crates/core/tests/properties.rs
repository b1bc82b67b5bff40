use std::sync::Arc;

use mechkit::allocation::{AllocationSet, StandardKind};
use mechkit::convergence::{converge, tail_limit, ConvergeOptions, MechanismSequence, PriceSchedule};
use mechkit::io::{mechanism_from_json, menu_to_json};
use mechkit::mechanism::{Mechanism, Menu};
use mechkit::random;
use mechkit::solver::{self, solve_brev, solve_rev, solve_srev};
use mechkit::vecops::{dot, norm_sq, scale, sub, zeros};
use mechkit::{Rational, Scalar};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Q = Rational;

fn q(n: i64, d: i64) -> Q {
    Q::from_ratio(n, d)
}

fn set(kind: StandardKind, k: usize) -> Arc<AllocationSet<Q>> {
    Arc::new(AllocationSet::standard(kind, k).unwrap())
}

fn probes(rng: &mut ChaCha8Rng, k: usize, count: usize) -> Vec<Vec<Q>> {
    (0..count).map(|_| random::grid_point(rng, k, 12, 4)).collect()
}

fn kind_strategy() -> impl Strategy<Value = StandardKind> {
    prop::sample::select(StandardKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn support_function_is_sublinear_and_bounded(seed: u64, kind in kind_strategy(), k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = set(kind, k);
        let y1 = random::grid_point::<Q, _>(&mut rng, k, 8, 4);
        let y2 = random::grid_point::<Q, _>(&mut rng, k, 8, 4);
        let lambda = q(rand::Rng::gen_range(&mut rng, 1..=9), 3);
        let (h1, w1) = gamma.support_max(&y1);
        let (h2, _) = gamma.support_max(&y2);
        let sum: Vec<Q> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
        prop_assert!(gamma.support_max(&sum).0 <= h1.clone() + h2);
        prop_assert_eq!(gamma.support_max(&scale(&y1, &lambda)).0, lambda * h1.clone());
        prop_assert!(gamma.contains(&w1, &Q::tol()));
        // h(y) <= γ‖y‖, squared since both sides are nonnegative
        prop_assert!(h1.clone() * h1 <= gamma.gamma_norm_sq().clone() * norm_sq(&y1));
    }

    #[test]
    fn vertices_satisfy_halfspaces(kind in kind_strategy(), k in 1usize..=4) {
        let gamma = set(kind, k);
        if let Some(hs) = gamma.halfspaces() {
            for v in gamma.vertices() {
                for h in hs {
                    prop_assert!(dot(&h.normal, v) <= h.offset);
                }
            }
        }
    }

    #[test]
    fn payoff_functions_are_gamma_lipschitz(seed: u64, k in 1usize..=3, size in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = set(StandardKind::Cube, k);
        let menu = random::menu(&mut rng, &gamma, size).normalize_npt();
        let f = menu.payoff_function();
        let g2 = gamma.gamma_norm_sq().clone();
        let pts = probes(&mut rng, k, 6);
        for x in &pts {
            for y in &pts {
                let d = f.evaluate(x) - f.evaluate(y);
                prop_assert!(d.clone() * d <= g2.clone() * norm_sq(&sub(x, y)));
            }
            for g in f.subgradient_set(x).active_gradients {
                for y in &pts {
                    prop_assert!(f.evaluate(y) >= f.evaluate(x) + dot(&g, &sub(y, x)));
                }
            }
        }
    }

    #[test]
    fn directional_derivatives_are_convex(seed: u64, k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = set(StandardKind::UnitDemand, k);
        let f = random::menu(&mut rng, &gamma, 5).payoff_function();
        for x in probes(&mut rng, k, 5) {
            let y: Vec<Q> = random::grid_point::<Q, _>(&mut rng, k, 8, 4)
                .into_iter()
                .map(|c| c - q(1, 1))
                .collect();
            let neg: Vec<Q> = y.iter().map(|c| -c.clone()).collect();
            let (up, down) = (f.dir_derivative(&x, &y), f.dir_derivative(&x, &neg));
            prop_assert!(up.clone() + down.clone() >= q(0, 1));
            if f.is_differentiable(&x) {
                prop_assert_eq!(up, -down);
            }
        }
    }

    #[test]
    fn supermodularity_ignores_linear_shifts(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = set(StandardKind::Cube, 2);
        let f = random::menu(&mut rng, &gamma, 4).payoff_function();
        let h = vec![q(rand::Rng::gen_range(&mut rng, -4..=4), 2), q(rand::Rng::gen_range(&mut rng, -4..=4), 2)];
        let grid = mechkit::grid::box_grid(2, &q(3, 1), 5);
        prop_assert_eq!(
            f.check_supermodular(&grid).supermodular,
            f.add_linear(&h).check_supermodular(&grid).supermodular
        );
    }

    #[test]
    fn menus_are_truthful_and_payments_match_the_derivative(seed: u64, k in 1usize..=3, size in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = set(StandardKind::Cube, k);
        let menu = random::menu(&mut rng, &gamma, size);
        let b = menu.payoff_function();
        let with_null = Menu::with_null(gamma.clone(), menu.items().to_vec()).unwrap();
        let m = Mechanism::new(with_null.normalize_npt());
        let pts = probes(&mut rng, k, 8);
        prop_assert!(m.verify_ic(&pts).passed);
        prop_assert!(m.verify_ir(&pts).passed);
        let raw = Mechanism::new(menu);
        for x in &pts {
            prop_assert_eq!(raw.choose(x).payment, b.dir_derivative(x, x) - b.evaluate(x));
        }
        let report = m.payoff_function().is_in_b_gamma(&gamma, &pts);
        prop_assert!(report.member);
    }

    #[test]
    fn normalization_and_pruning_preserve_revenue(seed: u64, k in 1usize..=2, size in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = set(StandardKind::Cube, k);
        let menu = random::menu(&mut rng, &gamma, size);
        let dist = random::valuation::<Q, _>(&mut rng, k, 4, 8);
        let base = Mechanism::new(menu.clone()).revenue(&dist);

        let b0 = menu.payoff(&zeros(k));
        let normalized = Mechanism::new(menu.normalize_npt()).revenue(&dist);
        let bump = if b0 > q(0, 1) { b0 } else { q(0, 1) };
        prop_assert_eq!(normalized, base.clone() + bump);

        let hi = vec![q(2, 1); k];
        let pruned = Mechanism::new(menu.prune_dominated(&zeros(k), &hi)).revenue(&dist);
        prop_assert_eq!(pruned, base);
    }

    #[test]
    fn menus_reload_identically(seed: u64, k in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = set(StandardKind::UnitDemand, k);
        let menu = random::menu(&mut rng, &gamma, 5);
        let json = menu_to_json(&menu);
        let back = mechanism_from_json::<Q>(&json, None).unwrap();
        prop_assert_eq!(back.menu.items(), menu.items());
        prop_assert_eq!(
            serde_json::to_string(&menu_to_json(&back.menu)).unwrap(),
            serde_json::to_string(&json).unwrap()
        );
    }

    #[test]
    fn tail_limit_recovers_harmonic_limits(l in -20i64..20, c in -20i64..20, den in 1i64..6) {
        let values: Vec<Q> = (1..=60).map(|n| q(l, den) + q(c, den * n)).collect();
        let (limit, _) = tail_limit(&values, 5, &Q::tol()).expect("settles");
        prop_assert_eq!(limit, q(l, den));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solver_sandwich_and_bounds(seed: u64, k in 1usize..=2, n in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = random::valuation::<Q, _>(&mut rng, k, n, 8);
        let cube = set(StandardKind::Cube, k);
        let rev = solve_rev(&cube, &dist).unwrap();
        prop_assert_eq!(rev.mechanism.revenue(&dist), rev.optimal_revenue.clone());
        prop_assert!(rev.mechanism.verify_all(dist.support()).passed);
        prop_assert!(solve_srev(&cube, &dist).unwrap().optimal_revenue <= rev.optimal_revenue);
        prop_assert!(solve_brev(&cube, &dist).unwrap().optimal_revenue <= rev.optimal_revenue);
        let det = solver::solve_deterministic(&set(StandardKind::CubeVertices, k), &dist, solver::DEFAULT_CAP).unwrap();
        prop_assert!(det.optimal_revenue <= rev.optimal_revenue);
        let bound = cube.gamma_norm() * dist.expected_norm();
        prop_assert!(rev.optimal_revenue.to_f64() <= bound + 1e-9);
    }

    #[test]
    fn optimal_revenue_scales_and_ignores_null_types(seed: u64, k in 1usize..=2, n in 1usize..=4, lambda in 1i64..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = random::valuation::<Q, _>(&mut rng, k, n, 8);
        let gamma = set(StandardKind::UnitDemand, k);
        let base = solve_rev(&gamma, &dist).unwrap().optimal_revenue;
        let f = q(lambda, 2);
        let scaled = solve_rev(&gamma, &dist.scaled(&f).unwrap()).unwrap().optimal_revenue;
        prop_assert_eq!(scaled, f * base.clone());
        let extra = loop {
            let x = random::grid_point::<Q, _>(&mut rng, k, 8, 4);
            if !dist.support().contains(&x) {
                break x;
            }
        };
        let padded = solve_rev(&gamma, &dist.with_null_type(extra).unwrap()).unwrap().optimal_revenue;
        prop_assert_eq!(padded, base);
    }

    #[test]
    fn fixed_price_limits_are_usc(seed: u64, c in 1i64..=8, a in -4i64..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = random::valuation::<Q, _>(&mut rng, 1, 3, 12);
        let gamma = set(StandardKind::Cube, 1);
        let seq = MechanismSequence::fixed_price(gamma, PriceSchedule::harmonic(q(c, 2), q(a, 4))).unwrap();
        let opts = ConvergeOptions { n_max: 40, ..ConvergeOptions::default() };
        let report = converge(&seq, &dist, &opts).unwrap();
        prop_assert!(report.converged);
        prop_assert_eq!(report.usc_holds, Some(true));
        let limit = report.limit_mechanism.unwrap();
        prop_assert!(limit.payoff_function().is_in_b_gamma(seq.gamma(), &report.grid).member);
        for (x, v) in report.grid.iter().zip(&report.limit_values) {
            prop_assert_eq!(&limit.payoff(x), v);
        }
    }
}
