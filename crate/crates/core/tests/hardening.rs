mod support;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stormgrid_core::net::{Branch, Bus, Generator};
use stormgrid_core::{
    budget_sweep, build_model, evaluate_plan, parse_matpower, solve_hardening, Budget, Commitment, EconParams,
    Network, ScenarioSet, Weighting,
};
use stormgrid_lp::SolveOptions;

fn bus(id: u32, load: f64) -> Bus {
    Bus { id, base_load: load, is_reference: id == 1 }
}

fn gen(id: u32, at: u32, p_max: f64, cost: f64, noload: f64) -> Generator {
    Generator { id, bus: at, p_min: 0.0, p_max, cost_linear: cost, cost_noload: noload, ramp_dev: p_max }
}

fn line(id: u32, f: u32, t: u32, x: f64, lim: f64) -> Branch {
    Branch { id, from_bus: f, to_bus: t, reactance: x, flow_limit: lim }
}

fn net(buses: Vec<Bus>, generators: Vec<Generator>, branches: Vec<Branch>) -> Network {
    Network { name: "t".into(), base_mva: 100.0, buses, generators, branches }
}

fn outage(label: &str, gens: &[u32], lines: &[u32]) -> (String, BTreeSet<u32>, BTreeSet<u32>) {
    (label.into(), gens.iter().copied().collect(), lines.iter().copied().collect())
}

fn econ(voll: f64, invest: f64, mult: Vec<f64>) -> EconParams {
    EconParams { voll, dg_invest_cost: invest, load_multipliers: mult, ..Default::default() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Losing the only generator of a one-bus system leaves a choice between
/// DG capacity and shedding. DG output is free in every scenario, so each
/// MWh it covers saves the energy cost in the base case plus voll in the
/// contingency. The total as a function of capacity is convex piecewise
/// linear with kinks at the hourly demands.
#[test]
fn single_bus_against_breakpoint_scan() {
    let d = 80.0;
    let (c, n) = (20.0, 7.0);
    let g = net(vec![bus(1, d)], vec![gen(1, 1, 200.0, c, n)], vec![]);
    let sc = ScenarioSet::from_contingencies(vec![outage("lost", &[1], &[])], Weighting::Uniform);
    for (voll, invest, mult) in [
        (100.0, 50.0, vec![1.0]),
        (40.0, 50.0, vec![1.0]),
        (100.0, 150.0, vec![0.5, 1.0, 0.8]),
        (100.0, 250.0, vec![0.5, 1.0, 0.8]),
        (100.0, 350.0, vec![0.5, 1.0, 0.8]),
    ] {
        let e = econ(voll, invest, mult.clone());
        let plan = solve_hardening(&g, &sc, &e, &Commitment::all_on(1, mult.len())).unwrap();
        let demand: Vec<f64> = mult.iter().map(|m| d * m).collect();
        let cost = |cap: f64| invest * cap + demand.iter().map(|&x| (c + voll) * (x - cap.min(x))).sum::<f64>();
        let mut kinks = demand.clone();
        kinks.push(0.0);
        let (best_cap, best) =
            kinks.iter().map(|&k| (k, cost(k))).min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
        let noload = n * mult.len() as f64;
        assert!(close(plan.objective, noload + best, 1e-9), "{voll} {invest}: {} vs {}", plan.objective, noload + best);
        let cap = plan.dg_capacity.get(&1).copied().unwrap_or(0.0);
        assert!((cap - best_cap).abs() < 1e-6, "cap {cap} want {best_cap}");
    }
}

#[test]
fn short_generation_is_covered_by_dg() {
    // 50 MW of generation against 100 MW of load with no contingencies:
    // shedding is not allowed in the base case, so exactly the gap is built
    // whenever DG costs more than the energy it would displace.
    let g = net(vec![bus(1, 100.0)], vec![gen(1, 1, 50.0, 20.0, 3.0)], vec![]);
    for hours in [1, 2] {
        let e = econ(100.0, 50.0, vec![1.0; hours]);
        let plan = solve_hardening(&g, &ScenarioSet::base_only(), &e, &Commitment::all_on(1, hours)).unwrap();
        assert!((plan.dg_capacity[&1] - 50.0).abs() < 1e-9);
        let h = hours as f64;
        assert!(close(plan.objective, 50.0 * 50.0 + h * (20.0 * 50.0 + 3.0), 1e-12));
    }
    // cheaper than three hours of energy: DG takes the whole load
    let e = econ(100.0, 50.0, vec![1.0; 3]);
    let plan = solve_hardening(&g, &ScenarioSet::base_only(), &e, &Commitment::all_on(1, 3)).unwrap();
    assert!((plan.dg_capacity[&1] - 100.0).abs() < 1e-9);
    assert!(close(plan.objective, 100.0 * 50.0 + 3.0 * 3.0, 1e-12));
}

#[test]
fn zero_load_costs_only_no_load() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut g = support::random_network(&mut rng, 6);
    for b in &mut g.buses {
        b.base_load = 0.0;
    }
    for x in &mut g.generators {
        x.p_min = 0.0;
    }
    let sc = ScenarioSet::from_contingencies(vec![outage("a", &[1], &[1])], Weighting::Uniform);
    let e = econ(100.0, 50.0, vec![1.0; 4]);
    let plan = solve_hardening(&g, &sc, &e, &Commitment::all_on(g.generators.len(), 4)).unwrap();
    let noload: f64 = g.generators.iter().map(|x| x.cost_noload).sum();
    assert!(close(plan.objective, 4.0 * noload, 1e-12), "{} vs {}", plan.objective, 4.0 * noload);
    assert!(plan.dg_capacity.is_empty());
    assert_eq!(plan.total_curtailment_mwh, 0.0);
}

#[test]
fn variable_count_on_fixture() {
    let g = parse_matpower(&support::data_file("case118.m")).unwrap();
    let sc = ScenarioSet::from_contingencies(
        vec![outage("a", &[1, 2], &[1]), outage("b", &[], &[5, 6]), outage("c", &[10], &[])],
        Weighting::Uniform,
    );
    let e = econ(100.0, 50.0, stormgrid_core::hardening::default_profile(24));
    let m = build_model(&g, &sc, &e, &Commitment::all_on(54, 24)).unwrap();
    let (t, s, ng, nl, nb) = (24, 4, 54, 186, 118);
    assert_eq!(m.problem.num_vars(), t * s * (ng + nl + 3 * nb) + nb);
    assert_eq!(m.problem.num_vars(), 57_142);
}

#[test]
fn islanded_load_buys_exactly_its_demand() {
    let g = net(vec![bus(1, 0.0), bus(2, 10.0)], vec![gen(1, 1, 50.0, 10.0, 0.0)], vec![line(1, 1, 2, 0.1, 100.0)]);
    let sc = ScenarioSet::from_contingencies(vec![outage("cut", &[], &[1])], Weighting::Uniform);
    let plan = solve_hardening(&g, &sc, &econ(100.0, 50.0, vec![1.0]), &Commitment::all_on(1, 1)).unwrap();
    assert!((plan.dg_capacity[&2] - 10.0).abs() < 1e-9);
    assert!((plan.invest_cost - 500.0).abs() < 1e-6);
    assert!(plan.total_curtailment_mwh.abs() < 1e-9);
    // the DG unit also serves the load in the base case
    assert!((plan.objective - 500.0).abs() < 1e-6);
    // shedding wins once voll plus the displaced energy cost is below the
    // capacity cost
    let plan = solve_hardening(&g, &sc, &econ(30.0, 50.0, vec![1.0]), &Commitment::all_on(1, 1)).unwrap();
    assert!(plan.dg_capacity.is_empty());
    assert!((plan.total_curtailment_mwh - 10.0).abs() < 1e-9);
    assert!((plan.average_unserved_cost - 300.0).abs() < 1e-6);
    assert!((plan.objective - 400.0).abs() < 1e-6);
}

#[test]
fn average_unserved_cost_arithmetic() {
    // three radial loads, each islanded by one contingency
    let loads = [43_338.0, 47_143.0, 44_393.0];
    let mut buses = vec![bus(1, 0.0)];
    let mut lines = Vec::new();
    for (k, &l) in loads.iter().enumerate() {
        buses.push(bus(k as u32 + 2, l));
        lines.push(line(k as u32 + 1, 1, k as u32 + 2, 1e-4, 1e5));
    }
    let g = net(buses, vec![gen(1, 1, 2e5, 10.0, 0.0)], lines);
    let sc = ScenarioSet::from_contingencies(
        vec![outage("p1", &[], &[1]), outage("p2", &[], &[2]), outage("p3", &[], &[3])],
        Weighting::Uniform,
    );
    let e = econ(100.0, 50.0, vec![1.0]);
    let plan = evaluate_plan(&g, &sc, &e, &BTreeMap::new()).unwrap();
    let curt: Vec<f64> = plan.scenarios.iter().map(|s| s.curtailment_mwh).collect();
    for (c, l) in curt.iter().zip(loads) {
        assert!((c - l).abs() < 1e-6);
    }
    assert!((plan.average_unserved_cost - 4_495_800.0).abs() < 1e-3, "{}", plan.average_unserved_cost);
    assert!((plan.annualization_factor - 8760.0).abs() < 1e-12);
}

#[test]
fn evaluating_the_optimal_capacities_reproduces_the_plan() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let g = support::random_network(&mut rng, 6);
    let sc = ScenarioSet::from_contingencies(
        vec![outage("a", &[1], &[1]), outage("b", &[], &[2, 3])],
        Weighting::Uniform,
    );
    let e = econ(100.0, 50.0, vec![0.8, 1.0]);
    let plan = solve_hardening(&g, &sc, &e, &Commitment::all_on(g.generators.len(), 2)).unwrap();
    assert!(plan.total_curtailment_mwh.abs() < 1e-6);
    let again = evaluate_plan(&g, &sc, &e, &plan.dg_capacity).unwrap();
    assert!(again.total_curtailment_mwh.abs() < 1e-6);
    assert!(close(again.objective, plan.objective, 1e-7), "{} vs {}", again.objective, plan.objective);
    assert!(close(again.invest_cost, plan.invest_cost, 1e-9));
}

#[test]
fn dc_opf_lockstep_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 12 {
        let nb = rng.random_range(2..=10);
        let g = support::random_network(&mut rng, nb);
        let Some((dispatch, objective)) = support::dc_opf_ptdf(&g) else { continue };
        let e = EconParams { dg_candidates: Some(vec![]), ..econ(100.0, 50.0, vec![1.0]) };
        let m = build_model(&g, &ScenarioSet::base_only(), &e, &Commitment::all_on(g.generators.len(), 1)).unwrap();
        let (sol, plan) = m.solve(&SolveOptions::default()).unwrap();
        assert!(close(plan.objective, objective, 1e-9), "{} vs {}", plan.objective, objective);
        for (i, p) in dispatch.iter().enumerate() {
            assert!((sol.x[m.layout.dispatch(i, 0, 0)] - p).abs() < 1e-6);
        }
        checked += 1;
    }
}

fn random_case(seed: u64) -> (Network, ScenarioSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = rng.random_range(3..=7);
    let mut g = support::random_network(&mut rng, nb);
    // an island holding only generation must be able to idle it
    for x in &mut g.generators {
        x.p_min = 0.0;
        x.ramp_dev = x.p_max;
    }
    let mut cont = Vec::new();
    for k in 0..rng.random_range(1..=3) {
        let gens: Vec<u32> = g.generators.iter().map(|x| x.id).filter(|_| rng.random_bool(0.3)).collect();
        let lines: Vec<u32> = g.branches.iter().map(|x| x.id).filter(|_| rng.random_bool(0.3)).collect();
        cont.push(outage(&format!("s{k}"), &gens, &lines));
    }
    (g, ScenarioSet::from_contingencies(cont, Weighting::Uniform))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn more_budget_never_hurts(seed in any::<u64>()) {
        let (g, sc) = random_case(seed);
        prop_assume!(support::dc_opf_ptdf(&g).is_some());
        let e = econ(100.0, 50.0, vec![0.7, 1.0]);
        let budgets = [Budget::Limited(0.0), Budget::Limited(500.0), Budget::Limited(2000.0), Budget::Limited(8000.0), Budget::Unlimited];
        let rows = budget_sweep(&g, &sc, &e, &budgets).unwrap();
        for r in &rows {
            prop_assert!(r.error.is_none(), "{:?}", r.error);
            prop_assert!(r.invest_used <= r.budget.amount() * (1.0 + 1e-9) + 1e-6);
        }
        for w in rows.windows(2) {
            prop_assert!(w[1].objective <= w[0].objective * (1.0 + 1e-9) + 1e-6, "{} then {}", w[0].objective, w[1].objective);
        }
        prop_assert!(rows.last().unwrap().total_curtailment_mwh <= rows[0].total_curtailment_mwh + 1e-6);
    }

    #[test]
    fn optimum_satisfies_network_physics(seed in any::<u64>()) {
        let (g, sc) = random_case(seed);
        prop_assume!(support::dc_opf_ptdf(&g).is_some());
        let e = econ(100.0, 50.0, vec![0.9, 1.0, 0.6]);
        let m = build_model(&g, &sc, &e, &Commitment::all_on(g.generators.len(), 3)).unwrap();
        let (sol, plan) = m.solve(&SolveOptions::default()).unwrap();
        let r = support::hardening_invariants(&g, &m, &sol.x);
        prop_assert!(r.max_balance_residual <= 1e-6, "{r:?}");
        prop_assert!(r.max_outaged_dispatch <= 1e-9, "{r:?}");
        prop_assert!(r.max_outaged_flow <= 1e-9, "{r:?}");
        prop_assert!(r.max_flow_angle_residual <= 1e-6, "{r:?}");
        prop_assert!(r.max_base_curtailment <= 1e-9, "{r:?}");
        prop_assert!(r.max_curtailment_excess <= 1e-9, "{r:?}");
        prop_assert!(r.min_curtailment >= -1e-9, "{r:?}");
        // unlimited budget and voll above the capacity cost: nothing is shed
        prop_assert!(plan.total_curtailment_mwh <= 1e-6, "{}", plan.total_curtailment_mwh);
    }
}
