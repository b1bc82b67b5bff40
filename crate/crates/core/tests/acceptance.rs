//! Acceptance suite. Each criterion prints one PASS/FAIL line with its
//! runtime; the process exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mechkit::convergence::{
    check_usc, converge, heavy_tail, heavy_tail_survival, infinite_expectation_demo, monotone_limit_check,
    wrong_way_demo, ConvergeOptions, HeavyTailOptions,
};
use mechkit::solver::{
    bundle_price_menu, separate_price_menu, solve_brev, solve_deterministic, solve_rev, solve_srev,
    verification_points, DEFAULT_CAP,
};
use mechkit::vecops::{norm_sq, sub};
use mechkit::{
    random, AffinePiece, AllocationSet, DiscreteValuation, Mechanism, MonotoneMode, PwlConvex, Rational, Scalar,
    StandardKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type R = Rational;
type Check = std::result::Result<String, String>;

fn r(n: i64, d: i64) -> R {
    R::from_ratio(n, d)
}

fn zero() -> R {
    R::from_i64(0)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cube<S: Scalar>(k: usize) -> Arc<AllocationSet<S>> {
    Arc::new(AllocationSet::standard(StandardKind::Cube, k).unwrap())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `p·P[X >= p]` by summing the truncated probability table directly.
fn tail_revenue(dist: &DiscreteValuation<R>, p: i64) -> R {
    let price = R::from_i64(p);
    let mass = dist
        .support()
        .iter()
        .zip(dist.probs())
        .filter(|(x, _)| x[0] >= price)
        .fold(zero(), |acc, (_, q)| acc + q.clone());
    price * mass
}

fn c1_posted_prices() -> Check {
    let x = heavy_tail::<R>(10_000).map_err(|e| e.to_string())?;
    let gamma = cube::<R>(1);
    for p in [1i64, 10, 100, 999] {
        let expected = r(p, p + 1);
        let price = R::from_i64(p);
        let formula = price.clone() * heavy_tail_survival(&price);
        ensure(formula == expected, || format!("p={p}: formula gives {formula}"))?;
        let mech = Mechanism::new(bundle_price_menu(&gamma, price).map_err(|e| e.to_string())?);
        let rev = mech.revenue(&x);
        ensure(rev == expected, || format!("p={p}: truncated revenue {rev}"))?;
        ensure(tail_revenue(&x, p) == expected, || format!("p={p}: table sum disagrees"))?;
    }
    Ok("p/(p+1) for p in {1,10,100,999}, N=10^4".into())
}

fn c2_escaping_prices() -> Check {
    let opts = HeavyTailOptions::default();
    let rep = infinite_expectation_demo::<R>(&opts).map_err(|e| e.to_string())?;
    for (i, rev) in rep.escaping_revenues.iter().enumerate() {
        let n = i as i64 + 1;
        ensure(*rev == r(n, n + 1), || format!("n={n}: revenue {rev}"))?;
    }
    ensure(rep.escaping_revenues.windows(2).all(|w| w[0] < w[1]), || "revenues not increasing".into())?;
    let n = opts.n_max as i64;
    ensure(rep.sup_revenue == r(n, n + 1), || format!("sup {}", rep.sup_revenue))?;
    ensure(rep.limit_revenue == zero(), || format!("limit revenue {}", rep.limit_revenue))?;
    ensure(
        rep.limit_mechanism.menu.items().iter().all(|it| it.payment == zero()),
        || "limit menu charges a positive price".into(),
    )?;
    ensure(rep.finite_truncation.usc_holds == Some(true), || "usc fails on the small truncation".into())?;
    Ok(format!("revenues n/(n+1) up to {}, limit revenue 0", rep.sup_revenue))
}

fn c3_payment_formula() -> Check {
    fn run<S: Scalar>(seed: u64, trials: usize) -> std::result::Result<usize, String> {
        let mut rng = rng(seed);
        let mut ties = 0;
        for t in 0..trials {
            let k = rng.gen_range(1..=3);
            let gamma = Arc::new(random::polytope::<S, _>(&mut rng, k).map_err(|e| e.to_string())?);
            let size = rng.gen_range(1..=6);
            let mut menu = random::menu(&mut rng, &gamma, size);
            let x: Vec<S> = random::grid_point(&mut rng, k, 12, 4);
            if rng.gen_bool(0.5) {
                // reprice a fresh allocation so it ties with the best offer at x
                let g = random::point_in(&mut rng, &gamma);
                let price = mechkit::vecops::dot(&g, &x) - menu.payoff(&x);
                if !price.is_negative() {
                    let mut items = menu.items().to_vec();
                    items.push(mechkit::MenuItem::new(g, price));
                    menu = mechkit::Menu::new(gamma.clone(), items).map_err(|e| e.to_string())?;
                }
            }
            let b = menu.payoff_function();
            if b.active_pieces(&x).len() > 1 {
                ties += 1;
            }
            let pay = Mechanism::new(menu).choose(&x).payment;
            let formula = b.dir_derivative(&x, &x) - b.evaluate(&x);
            let ok = if S::MODE == mechkit::NumericMode::Exact {
                pay == formula
            } else {
                (pay.to_f64() - formula.to_f64()).abs() <= 1e-9
            };
            ensure(ok, || format!("trial {t} ({}): payment {pay} vs {formula}", S::MODE.as_str()))?;
        }
        Ok(ties)
    }
    let exact_ties = run::<R>(3, 1000)?;
    let float_ties = run::<f64>(3, 1000)?;
    Ok(format!("1000 pairs per mode, {exact_ties} exact / {float_ties} float with tied offers"))
}

fn c4_usc() -> Check {
    /// Returns (redrawn, fitted via 1/n, min slack).
    fn run<S: Scalar>(seed: u64, trials: usize) -> std::result::Result<(usize, usize, f64), String> {
        let mut rng = rng(seed);
        let (mut done, mut skipped, mut extrapolated) = (0, 0, 0);
        let mut worst = f64::INFINITY;
        let mode = S::MODE.as_str();
        while done < trials {
            let k = rng.gen_range(1..=2);
            let gamma = if rng.gen_bool(0.5) {
                cube::<S>(k)
            } else {
                Arc::new(random::polytope::<S, _>(&mut rng, k).map_err(|e| e.to_string())?)
            };
            let n = rng.gen_range(1..=8);
            let dist = random::valuation::<S, _>(&mut rng, k, n, 12);
            let size = rng.gen_range(1..=4);
            let seq = random::affine_sequence(&mut rng, &gamma, size).map_err(|e| e.to_string())?;
            // a late argmax switch leaves a non-convex estimate on the grid; such
            // draws have not settled by n_max and are redrawn like any other
            let rep = match converge(&seq, &dist, &ConvergeOptions::default()) {
                Ok(rep) if rep.converged => rep,
                Ok(_) | Err(mechkit::Error::NoFeasibleGradient(_)) => {
                    skipped += 1;
                    continue;
                }
                Err(e) => return Err(e.to_string()),
            };
            extrapolated += rep.extrapolated as usize;
            let slack = rep.usc_slack.expect("limit built").to_f64();
            worst = worst.min(slack);
            ensure(slack >= -1e-9, || format!("{mode} trial {done}: usc slack {slack}"))?;
            for pw in &rep.pointwise {
                ensure(pw.holds, || {
                    format!(
                        "{mode} trial {done}: at {:?} limsup payment {} > limit payment {}",
                        pw.point, pw.limsup_payment, pw.limit_payment
                    )
                })?;
            }
            done += 1;
        }
        Ok((skipped, extrapolated, worst))
    }
    let (skipped, fitted, exact_worst) = run::<R>(4, 200)?;
    let (_, _, float_worst) = run::<f64>(4, 200)?;
    Ok(format!(
        "200 convergent sequences per mode ({fitted} via 1/n fit, {skipped} unsettled redrawn); min slack exact {exact_worst:.1e}, float {float_worst:.1e}"
    ))
}

/// Best single price over the values a one-dimensional distribution takes.
fn price_oracle(dist: &DiscreteValuation<R>) -> (R, R) {
    let mut best = (zero(), zero());
    for cand in dist.support() {
        let p = cand[0].clone();
        let mass = dist
            .support()
            .iter()
            .zip(dist.probs())
            .filter(|(x, _)| x[0] >= p)
            .fold(zero(), |a, (_, q)| a + q.clone());
        let rev = p.clone() * mass;
        if rev > best.1 {
            best = (p, rev);
        }
    }
    best
}

fn c5_solvers() -> Check {
    let mut rng = rng(5);
    let box2 = cube::<R>(2);
    let verts = Arc::new(AllocationSet::<R>::standard(StandardKind::CubeVertices, 2).unwrap());
    let mut strict = 0;
    for t in 0..50 {
        let n = rng.gen_range(1..=6);
        let dist = random::valuation::<R, _>(&mut rng, 2, n, 12);
        let e = |e: mechkit::Error| format!("instance {t}: {e}");
        let rev = solve_rev(&box2, &dist).map_err(e)?;
        let det = solve_deterministic(&verts, &dist, DEFAULT_CAP).map_err(e)?;
        let (b_price, b_rev) = price_oracle(&dist.bundle_sum());
        let sep: Vec<(R, R)> = (0..2).map(|i| price_oracle(&dist.marginal(i))).collect();
        let s_rev = sep[0].1.clone() + sep[1].1.clone();

        // posted prices as deterministic menus
        let bundle = Mechanism::new(bundle_price_menu(&verts, b_price).map_err(e)?).revenue(&dist);
        let prices: Vec<R> = sep.iter().map(|s| s.0.clone()).collect();
        let separate = Mechanism::new(separate_price_menu(&verts, &prices).map_err(e)?).revenue(&dist);
        ensure(bundle == b_rev && separate == s_rev, || format!("instance {t}: posted menus disagree with price oracle"))?;
        ensure(solve_brev(&box2, &dist).map_err(e)?.optimal_revenue == b_rev, || format!("instance {t}: brev"))?;
        ensure(solve_srev(&box2, &dist).map_err(e)?.optimal_revenue == s_rev, || format!("instance {t}: srev"))?;

        let floor = R::max_of(b_rev, s_rev);
        ensure(rev.optimal_revenue >= det.optimal_revenue, || format!("instance {t}: Rev < DRev"))?;
        ensure(det.optimal_revenue >= floor, || format!("instance {t}: DRev below posted prices"))?;
        strict += (rev.optimal_revenue > det.optimal_revenue) as usize;

        let probes = verification_points(&dist);
        for (name, res) in [("rev", &rev), ("drev", &det)] {
            ensure(res.certified, || format!("instance {t}: {name} witness not certified"))?;
            let report = res.mechanism.verify_all(&probes);
            ensure(report.passed, || format!("instance {t}: {name} witness fails {:?}", report.violations.first()))?;
            let paid = res.mechanism.revenue(&dist);
            ensure(paid == res.optimal_revenue, || format!("instance {t}: {name} revenue {paid} != {}", res.optimal_revenue))?;
        }
    }
    let one_two = DiscreteValuation::uniform(vec![vec![r(1, 1)], vec![r(2, 1)]]).unwrap();
    let iid = DiscreteValuation::iid(&one_two, 2).unwrap();
    let s = solve_srev(&box2, &iid).map_err(|e| e.to_string())?.optimal_revenue;
    let b = solve_brev(&box2, &iid).map_err(|e| e.to_string())?.optimal_revenue;
    ensure(s == r(2, 1) && b == r(9, 4), || format!("iid uniform{{1,2}}: SRev {s}, BRev {b}"))?;
    Ok(format!("50 instances, Rev > DRev strictly in {strict}; iid SRev 2, BRev 9/4"))
}

fn c6_monotone_limits() -> Check {
    let mut rng = rng(6);
    let gamma = cube::<R>(2);
    let mut payment_trials = 0;
    let mut allocation_trials = 0;
    for t in 0..200 {
        let mode = if t < 100 { MonotoneMode::Payment } else { MonotoneMode::Allocation };
        let n = rng.gen_range(1..=4);
        let dist = random::valuation::<R, _>(&mut rng, 2, n, 8);
        let size = rng.gen_range(1..=4);
        let seq = random::chain_sequence(&mut rng, &gamma, size).map_err(|e| e.to_string())?;
        let grid = verification_points(&dist);
        let rep = monotone_limit_check(&seq, &grid, mode, 80, &R::tol()).map_err(|e| e.to_string())?;
        ensure(rep.member_failures.is_empty(), || format!("trial {t}: member fails precondition"))?;
        ensure(rep.converged, || format!("trial {t}: sequence did not settle"))?;
        ensure(rep.holds, || format!("trial {t} ({mode:?}): limit fails, {:?}", rep.limit_report.violations.first()))?;
        match mode {
            MonotoneMode::Payment => payment_trials += 1,
            MonotoneMode::Allocation => allocation_trials += 1,
        }
    }

    let ww = wrong_way_demo::<R>().map_err(|e| e.to_string())?;
    ensure(ww.seller_favorable.passed, || "seller-favorable limit not payment monotone".into())?;
    let e1 = vec![r(1, 1), r(0, 1)];
    let both = vec![r(1, 1), r(1, 1)];
    ensure(
        ww.adverse.violations.iter().any(|v| v.witness == vec![e1.clone(), both.clone()]),
        || format!("adverse tie rule: no violation at ((1,0),(1,1)): {:?}", ww.adverse.violations),
    )?;

    let max2 = PwlConvex::new(vec![
        AffinePiece::new(vec![r(1, 1), r(0, 1)], zero()),
        AffinePiece::new(vec![r(0, 1), r(1, 1)], zero()),
    ])
    .unwrap();
    let square: Vec<Vec<R>> = vec![vec![r(0, 1), r(0, 1)], vec![r(0, 1), r(1, 1)], e1.clone(), both];
    let sm = max2.check_supermodular(&square);
    let e2 = vec![r(0, 1), r(1, 1)];
    ensure(
        !sm.supermodular
            && sm
                .violations
                .iter()
                .any(|(x, y, _)| (*x == e1 && *y == e2) || (*x == e2 && *y == e1)),
        || "max(x1,x2) not flagged at ((1,0),(0,1))".into(),
    )?;
    Ok(format!(
        "{payment_trials} payment + {allocation_trials} supermodular trials clean; adverse tie violation at ((1,0),(1,1)); max(x1,x2) flagged"
    ))
}

fn c7_invariants() -> Check {
    let mut rng = rng(7);
    // payoff bounds and subgradient inequality on random menus with a null offer
    for t in 0..300 {
        let k = rng.gen_range(1..=3);
        let gamma = Arc::new(random::polytope::<R, _>(&mut rng, k).map_err(|e| e.to_string())?);
        let size = rng.gen_range(1..=5);
        let menu = random::menu(&mut rng, &gamma, size);
        let menu = mechkit::Menu::with_null(gamma.clone(), menu.items().to_vec()).map_err(|e| e.to_string())?;
        let b = menu.payoff_function();
        let g2 = gamma.gamma_norm_sq().clone();
        let x: Vec<R> = random::grid_point(&mut rng, k, 12, 4);
        let y: Vec<R> = random::grid_point(&mut rng, k, 12, 4);
        let (bx, by) = (b.evaluate(&x), b.evaluate(&y));
        let d = bx.clone() - by.clone();
        ensure(d.clone() * d <= g2.clone() * norm_sq(&sub(&x, &y)), || format!("menu {t}: Lipschitz bound fails"))?;
        ensure(bx.clone() * bx.clone() <= g2 * norm_sq(&x), || format!("menu {t}: |b(x)| > γ‖x‖"))?;
        ensure(b.is_in_b_gamma(&gamma, std::slice::from_ref(&x)).member, || format!("menu {t}: payoff outside B_Γ"))?;
        for g in &b.subgradient_set(&x).active_gradients {
            let lower = bx.clone() + mechkit::vecops::dot(g, &sub(&y, &x));
            ensure(by >= lower, || format!("menu {t}: subgradient inequality fails"))?;
        }
    }

    // solver witnesses, scale covariance, zero-probability points
    let box2 = cube::<R>(2);
    let verts = Arc::new(AllocationSet::<R>::standard(StandardKind::CubeVertices, 2).unwrap());
    for t in 0..12 {
        let n = rng.gen_range(1..=4);
        let dist = random::valuation::<R, _>(&mut rng, 2, n, 8);
        let e = |e: mechkit::Error| format!("instance {t}: {e}");
        let rev = solve_rev(&box2, &dist).map_err(e)?;
        let det = solve_deterministic(&verts, &dist, DEFAULT_CAP).map_err(e)?;
        let probes = verification_points(&dist);
        for (g, res) in [(&box2, &rev), (&verts, &det)] {
            let m = res.mechanism.payoff_function().is_in_b_gamma(g, &probes);
            ensure(m.member, || format!("instance {t}: {} witness outside B_Γ", res.class_label))?;
        }
        for lambda in [r(2, 1), r(1, 2), r(3, 1)] {
            let scaled = solve_rev(&box2, &dist.scaled(&lambda).map_err(e)?).map_err(e)?;
            ensure(scaled.optimal_revenue == lambda.clone() * rev.optimal_revenue.clone(), || {
                format!("instance {t}: Rev(λX) != λ·Rev(X) for λ={lambda}")
            })?;
        }
        let mut extra: Vec<R> = random::grid_point(&mut rng, 2, 8, 4);
        while dist.support().contains(&extra) {
            extra = random::grid_point(&mut rng, 2, 8, 4);
        }
        let padded = dist.with_null_type(extra).map_err(e)?;
        let same = solve_rev(&box2, &padded).map_err(e)?;
        ensure(same.optimal_revenue == rev.optimal_revenue, || format!("instance {t}: zero-probability point moved Rev"))?;
    }

    // convergence limits lie in B_Γ and satisfy the payoff bound
    let mut done = 0;
    while done < 30 {
        let k = rng.gen_range(1..=2);
        let gamma = cube::<R>(k);
        let n = rng.gen_range(1..=4);
        let dist = random::valuation::<R, _>(&mut rng, k, n, 8);
        let size = rng.gen_range(1..=3);
        let seq = random::chain_sequence(&mut rng, &gamma, size).map_err(|e| e.to_string())?;
        let opts = ConvergeOptions {
            n_max: 40,
            ..ConvergeOptions::default()
        };
        let rep = converge(&seq, &dist, &opts).map_err(|e| e.to_string())?;
        let Some(limit) = rep.limit_mechanism else { continue };
        let b = limit.payoff_function();
        let m = b.is_in_b_gamma(&gamma, &rep.grid);
        ensure(m.member, || format!("limit {done}: outside B_Γ"))?;
        let g2 = gamma.gamma_norm_sq().clone();
        for x in &rep.grid {
            let v = b.evaluate(x);
            ensure(v.clone() * v <= g2.clone() * norm_sq(x), || format!("limit {done}: payoff bound fails"))?;
        }
        let usc = check_usc(&seq, &limit, &dist, opts.n_max, &R::tol(), opts.window);
        ensure(usc.usc_holds, || format!("limit {done}: usc fails in exact mode"))?;
        done += 1;
    }
    Ok("300 menus, 12 solver instances, 30 exact limits".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check, Duration); 7] = [
        ("1 posted prices on the heavy tail", c1_posted_prices, Duration::from_secs(1)),
        ("2 escaping prices lose revenue in the limit", c2_escaping_prices, Duration::from_secs(5)),
        ("3 seller-favorable payment formula", c3_payment_formula, Duration::from_secs(10)),
        ("4 revenue upper semicontinuity", c4_usc, Duration::from_secs(60)),
        ("5 solver cross-validation", c5_solvers, Duration::from_secs(120)),
        ("6 monotone limits", c6_monotone_limits, Duration::from_secs(60)),
        ("7 invariants", c7_invariants, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let line = match outcome {
            Ok(detail) if took <= budget => format!("PASS criterion {name}: {detail} [{took:.2?}]"),
            Ok(detail) => format!("FAIL criterion {name}: over budget {budget:?} ({detail}) [{took:.2?}]"),
            Err(why) => format!("FAIL criterion {name}: {why} [{took:.2?}]"),
        };
        failed += line.starts_with("FAIL") as usize;
        println!("{line}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
