mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stormgrid_lp::{check_solution, solve, to_text, LpProblem, LpStatus, Sense, SolveOptions};
use support::vertex::{random_bounded_lp, vertex_enumerate, OracleResult};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn matches_vertex_enumeration_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut optimal = 0;
    for case in 0..300 {
        let lp = random_bounded_lp(&mut rng, 6, 6);
        let sol = solve(&lp, &SolveOptions::default()).unwrap();
        match vertex_enumerate(&lp) {
            OracleResult::Optimal { objective, .. } => {
                optimal += 1;
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}\n{}", to_text(&lp));
                assert!(
                    close(sol.objective, objective, 1e-6),
                    "case {case}: simplex {} oracle {objective}\n{}",
                    sol.objective,
                    to_text(&lp)
                );
                let rep = check_solution(&lp, &sol).unwrap();
                assert!(rep.max_row_residual <= 1e-7 && rep.max_bound_violation <= 1e-7);
                assert!(rep.duality_gap.unwrap() <= 1e-6, "case {case}: {rep:?}");
            }
            OracleResult::Infeasible => {
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}\n{}", to_text(&lp));
            }
        }
    }
    assert!(optimal > 100, "too few feasible instances: {optimal}");
}

#[test]
fn face_optimum_resolves_to_first_vertex() {
    let mut lp = LpProblem::new();
    let x = lp.add_var("x", 0.0, 1.0, -1.0);
    let y = lp.add_var("y", 0.0, 1.0, -1.0);
    lp.add_row("c", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
    let sol = solve(&lp, &SolveOptions::default()).unwrap();
    match vertex_enumerate(&lp) {
        OracleResult::Optimal { objective, .. } => assert!((objective + 1.0).abs() < 1e-12),
        OracleResult::Infeasible => panic!("oracle says infeasible"),
    }
    assert_eq!(sol.x, vec![1.0, 0.0]);
}

#[test]
fn repeated_solves_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let lp = random_bounded_lp(&mut rng, 6, 6);
        let a = solve(&lp, &SolveOptions::default()).unwrap();
        let b = solve(&lp.clone(), &SolveOptions::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.iterations, b.iterations);
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.x), bits(&b.x));
        assert_eq!(bits(&a.duals), bits(&b.duals));
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_scales_linearly(seed in any::<u64>(), lambda in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_bounded_lp(&mut rng, 5, 5);
        let base = solve(&lp, &SolveOptions::default()).unwrap();
        let mut scaled = lp.clone();
        for j in 0..lp.num_vars() {
            scaled.set_cost(j, lp.objective()[j] * lambda);
        }
        let sol = solve(&scaled, &SolveOptions::default()).unwrap();
        prop_assert_eq!(base.status, sol.status);
        if base.is_optimal() {
            prop_assert!(close(sol.objective, lambda * base.objective, 1e-8));
            // The old optimal vertex is still optimal for the scaled costs.
            prop_assert!(close(scaled.evaluate(&base.x), sol.objective, 1e-8));
        }
    }

    #[test]
    fn redundant_row_leaves_objective(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_bounded_lp(&mut rng, 5, 5);
        let base = solve(&lp, &SolveOptions::default()).unwrap();
        prop_assume!(base.is_optimal() && lp.num_rows() > 0);
        // Loosen an existing row by 1 and add it again; the copy is dominated.
        let r = &lp.rows()[0];
        let (sense, rhs) = match r.sense {
            Sense::Le => (Sense::Le, r.rhs + 1.0),
            Sense::Ge => (Sense::Ge, r.rhs - 1.0),
            Sense::Eq => (Sense::Le, r.rhs + 1.0),
        };
        let mut more = lp.clone();
        more.add_row("dominated", r.coeffs.clone(), sense, rhs);
        let sol = solve(&more, &SolveOptions::default()).unwrap();
        prop_assert!(sol.is_optimal());
        prop_assert!((sol.objective - base.objective).abs() <= 1e-8);
    }

    #[test]
    fn text_export_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_bounded_lp(&mut rng, 6, 6);
        let back = stormgrid_lp::from_text(&to_text(&lp)).unwrap();
        prop_assert_eq!(back, lp);
    }
}
