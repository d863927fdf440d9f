//! Independent oracles and generators shared by the integration tests.

#![allow(dead_code)]

#[path = "../../../lp/tests/support/vertex.rs"]
pub mod vertex;

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use stormgrid_core::hardening::HardeningModel;
use stormgrid_core::net::{Branch, Bus, Generator};
use stormgrid_core::{Label, LabeledDataset, Network};
use stormgrid_lp::{LpProblem, Sense};
use vertex::{gauss_solve, vertex_enumerate, OracleResult};

// ---------------------------------------------------------------- SVM

pub fn dual_objective(data: &LabeledDataset, alpha: &[f64]) -> f64 {
    let n = data.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (xi, xj) = (data.features[i], data.features[j]);
            let k = xi[0] * xj[0] + xi[1] * xj[1];
            quad += alpha[i] * alpha[j] * data.labels[i].sign() * data.labels[j].sign() * k;
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Exact maximum of the soft-margin dual for tiny sets.
///
/// Every sample is assigned to the lower bound, the upper bound, or the free
/// set. On the free set the margin is tight, which with `w = sum a y x` and
/// `sum a y = 0` gives a square linear system in (w, g, a_free). Each
/// solution that lands inside the box is a feasible dual point; the best of
/// them is the optimum whenever the optimal face is nondegenerate, which
/// holds for data in general position.
pub fn dual_face_oracle(data: &LabeledDataset, c: f64) -> f64 {
    let n = data.len();
    assert!(n <= 10, "face enumeration is exponential");
    let y: Vec<f64> = data.labels.iter().map(|l| l.sign()).collect();
    let x = &data.features;
    let mut best = f64::NEG_INFINITY;
    let total = 3usize.pow(n as u32);
    for code in 0..total {
        let mut state = vec![0u8; n];
        let mut k = code;
        for s in state.iter_mut() {
            *s = (k % 3) as u8;
            k /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let at_c: Vec<usize> = (0..n).filter(|&i| state[i] == 1).collect();
        let mut alpha = vec![0.0; n];
        for &i in &at_c {
            alpha[i] = c;
        }
        if free.is_empty() {
            let s: f64 = at_c.iter().map(|&i| y[i]).sum();
            if s.abs() > 1e-12 {
                continue;
            }
        } else {
            // unknowns: w0, w1, g, a_free...
            let m = 3 + free.len();
            let mut a = vec![vec![0.0; m]; m];
            let mut b = vec![0.0; m];
            for d in 0..2 {
                a[d][d] = 1.0;
                for (k, &i) in free.iter().enumerate() {
                    a[d][3 + k] = -y[i] * x[i][d];
                }
                b[d] = at_c.iter().map(|&i| c * y[i] * x[i][d]).sum();
            }
            for (k, &i) in free.iter().enumerate() {
                a[2][3 + k] = y[i];
            }
            b[2] = -at_c.iter().map(|&i| c * y[i]).sum::<f64>();
            for (k, &i) in free.iter().enumerate() {
                a[3 + k][0] = y[i] * x[i][0];
                a[3 + k][1] = y[i] * x[i][1];
                a[3 + k][2] = y[i];
                b[3 + k] = 1.0;
            }
            let Some(sol) = gauss_solve(a, b) else { continue };
            let mut inside = true;
            for (k, &i) in free.iter().enumerate() {
                let v = sol[3 + k];
                if !(-1e-12..=c + 1e-12).contains(&v) {
                    inside = false;
                }
                alpha[i] = v.clamp(0.0, c);
            }
            if !inside {
                continue;
            }
        }
        best = best.max(dual_objective(data, &alpha));
    }
    best
}

/// Returns the largest KKT violation of a trained model, measured on its
/// own training data with the conditions written out directly.
pub fn kkt_violation(m: &stormgrid_core::SvmModel, data: &LabeledDataset) -> f64 {
    let alpha = m.alphas(data.len());
    let mut worst: f64 = 0.0;
    for (i, (&x, &y)) in data.features.iter().zip(&data.labels).enumerate() {
        let yf = y.sign() * m.decision_value(x);
        let v = if alpha[i] <= 0.0 {
            (1.0 - yf).max(0.0)
        } else if alpha[i] >= m.c {
            (yf - 1.0).max(0.0)
        } else {
            (yf - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

pub fn random_dataset(rng: &mut impl Rng, n: usize, separable: bool) -> LabeledDataset {
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    // A random line through the unit square splits the classes.
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let normal = [angle.cos(), angle.sin()];
    let offset = normal[0] * 0.5 + normal[1] * 0.5;
    while features.len() < n {
        let p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let side = normal[0] * p[0] + normal[1] * p[1] - offset;
        if separable && side.abs() < 0.05 {
            continue;
        }
        let mut label = if side >= 0.0 { Label::Outage } else { Label::Operational };
        if !separable && rng.random_bool(0.15) {
            label = if label == Label::Outage { Label::Operational } else { Label::Outage };
        }
        features.push(p);
        labels.push(label);
    }
    // Both classes must appear.
    if labels.iter().all(|&l| l == labels[0]) {
        labels[0] = if labels[0] == Label::Outage { Label::Operational } else { Label::Outage };
        if separable {
            return random_dataset(rng, n, separable);
        }
    }
    LabeledDataset { features, labels, normalization_bounds: None }
}

// ---------------------------------------------------------------- grids

/// Connected network with `nb` buses, bus 1 as reference, a few generators
/// with distinct costs and enough capacity to cover load.
pub fn random_network(rng: &mut impl Rng, nb: usize) -> Network {
    let mut buses: Vec<Bus> = (1..=nb as u32)
        .map(|id| Bus {
            id,
            base_load: if rng.random_bool(0.7) { rng.random_range(5.0..40.0) } else { 0.0 },
            is_reference: id == 1,
        })
        .collect();
    if buses.iter().all(|b| b.base_load == 0.0) {
        buses[nb - 1].base_load = 20.0;
    }
    let mut edges: Vec<(u32, u32)> = (2..=nb as u32).map(|k| (rng.random_range(1..k), k)).collect();
    for _ in 0..rng.random_range(0..=3) {
        let a = rng.random_range(1..=nb as u32);
        let b = rng.random_range(1..=nb as u32);
        if a != b && !edges.iter().any(|&(u, v)| (u, v) == (a, b) || (u, v) == (b, a)) {
            edges.push((a, b));
        }
    }
    let branches = edges
        .into_iter()
        .enumerate()
        .map(|(k, (f, t))| {
            // random orientation
            let (f, t) = if rng.random_bool(0.5) { (f, t) } else { (t, f) };
            Branch {
                id: k as u32 + 1,
                from_bus: f,
                to_bus: t,
                reactance: rng.random_range(0.05..0.3),
                flow_limit: rng.random_range(30.0..150.0),
            }
        })
        .collect();
    let total: f64 = buses.iter().map(|b| b.base_load).sum();
    let ng = rng.random_range(2..=3);
    let generators = (0..ng)
        .map(|i| {
            let p_max = (1.5 * total / ng as f64).max(10.0) * rng.random_range(0.8..1.5);
            Generator {
                id: i as u32 + 1,
                bus: rng.random_range(1..=nb as u32),
                p_min: if rng.random_bool(0.3) { rng.random_range(0.0..0.2) * p_max } else { 0.0 },
                p_max,
                cost_linear: rng.random_range(10.0..50.0),
                cost_noload: rng.random_range(0.0..100.0),
                ramp_dev: 0.5 * p_max,
            }
        })
        .collect();
    Network { name: "random".into(), base_mva: 100.0, buses, generators, branches }
}

/// DC-OPF through a PTDF matrix: angles are eliminated, leaving only the
/// generator dispatch, and the small LP is solved by vertex enumeration.
/// Returns `None` when infeasible or when the angle solution leaves
/// [-pi/2, pi/2].
pub fn dc_opf_ptdf(net: &Network) -> Option<(Vec<f64>, f64)> {
    let nb = net.buses.len();
    let pos = net.bus_index();
    let refb = pos[&net.reference_bus()?];
    let others: Vec<usize> = (0..nb).filter(|&b| b != refb).collect();
    let mut bmat = DMatrix::<f64>::zeros(nb, nb);
    for l in &net.branches {
        let (f, t) = (pos[&l.from_bus], pos[&l.to_bus]);
        let s = net.base_mva / l.reactance;
        bmat[(f, f)] += s;
        bmat[(t, t)] += s;
        bmat[(f, t)] -= s;
        bmat[(t, f)] -= s;
    }
    let reduced = bmat.select_rows(&others).select_columns(&others);
    let inv = reduced.try_inverse()?;
    // theta (all buses) per unit injection at each bus
    let mut sens = DMatrix::<f64>::zeros(nb, nb);
    for (r, &br) in others.iter().enumerate() {
        for (c, &bc) in others.iter().enumerate() {
            sens[(br, bc)] = inv[(r, c)];
        }
    }
    let ptdf = |l: &Branch, b: usize| {
        let (f, t) = (pos[&l.from_bus], pos[&l.to_bus]);
        net.base_mva / l.reactance * (sens[(f, b)] - sens[(t, b)])
    };
    let load: Vec<f64> = net.buses.iter().map(|b| b.base_load).collect();

    let mut lp = LpProblem::new();
    for g in &net.generators {
        lp.add_var(format!("P{}", g.id), g.p_min, g.p_max, g.cost_linear);
    }
    let gbus: Vec<usize> = net.generators.iter().map(|g| pos[&g.bus]).collect();
    lp.add_row("balance", (0..gbus.len()).map(|i| (i, 1.0)).collect(), Sense::Eq, load.iter().sum());
    for l in &net.branches {
        let coeffs: Vec<(usize, f64)> = gbus.iter().enumerate().map(|(i, &b)| (i, ptdf(l, b))).collect();
        let base: f64 = (0..nb).map(|b| -ptdf(l, b) * load[b]).sum();
        lp.add_row(format!("f{}+", l.id), coeffs.clone(), Sense::Le, l.flow_limit - base);
        lp.add_row(format!("f{}-", l.id), coeffs, Sense::Ge, -l.flow_limit - base);
    }
    let OracleResult::Optimal { objective, x } = vertex_enumerate(&lp) else { return None };
    let mut inj = DVector::<f64>::from_iterator(nb, load.iter().map(|v| -v));
    for (i, &b) in gbus.iter().enumerate() {
        inj[b] += x[i];
    }
    let theta = &sens * inj;
    if theta.iter().any(|t| t.abs() > FRAC_PI_2) {
        return None;
    }
    let noload: f64 = net.generators.iter().map(|g| g.cost_noload).sum();
    Some((x, objective + noload))
}

// ---------------------------------------------------------------- invariants

#[derive(Debug, Default, Clone, Copy)]
pub struct InvariantReport {
    pub max_balance_residual: f64,
    pub max_outaged_dispatch: f64,
    pub max_outaged_flow: f64,
    pub max_flow_angle_residual: f64,
    pub max_base_curtailment: f64,
    pub max_curtailment_excess: f64,
    pub min_curtailment: f64,
}

/// Recomputes every structural property of a hardening optimum straight
/// from the network data and the primal vector.
pub fn hardening_invariants(net: &Network, model: &HardeningModel, x: &[f64]) -> InvariantReport {
    let lay = &model.layout;
    let pos = net.bus_index();
    let mut r = InvariantReport::default();
    for s in 0..lay.scenarios {
        for t in 0..lay.hours {
            let mut net_in = vec![0.0; lay.nb];
            for (i, g) in net.generators.iter().enumerate() {
                let p = x[lay.dispatch(i, t, s)];
                net_in[pos[&g.bus]] += p;
                if !model.gen_up[s][i] {
                    r.max_outaged_dispatch = r.max_outaged_dispatch.max(p.abs());
                }
            }
            for (l, br) in net.branches.iter().enumerate() {
                let f = x[lay.flow(l, t, s)];
                let (a, b) = (pos[&br.from_bus], pos[&br.to_bus]);
                net_in[a] -= f;
                net_in[b] += f;
                if model.branch_up[s][l] {
                    let dc = net.base_mva * (x[lay.angle(a, t, s)] - x[lay.angle(b, t, s)]) / br.reactance;
                    r.max_flow_angle_residual = r.max_flow_angle_residual.max((f - dc).abs());
                } else {
                    r.max_outaged_flow = r.max_outaged_flow.max(f.abs());
                }
            }
            for b in 0..lay.nb {
                let lc = x[lay.curtailment(b, t, s)];
                let d = model.demand[b][t];
                let res = net_in[b] + x[lay.dg_output(b, t, s)] + lc - d;
                r.max_balance_residual = r.max_balance_residual.max(res.abs());
                if s == 0 {
                    r.max_base_curtailment = r.max_base_curtailment.max(lc.abs());
                }
                r.max_curtailment_excess = r.max_curtailment_excess.max(lc - d);
                r.min_curtailment = r.min_curtailment.min(lc);
            }
        }
    }
    r
}

// ---------------------------------------------------------------- pipeline

pub fn data_file(name: &str) -> String {
    std::fs::read_to_string(format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

pub const C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

/// Default data, 80/20 stratified split and grid-searched penalty, all
/// driven by one seed (the same recipe as the command-line pipeline).
pub fn default_pipeline(seed: u64) -> (stormgrid_core::svm::PenaltySelection, stormgrid_core::ConfusionMatrix) {
    use stormgrid_core::synth::DEFAULT_BOUNDS;
    use stormgrid_core::*;
    let raw = generate_samples(&SampleSpec { seed, ..Default::default() }).unwrap();
    let d = normalize(&raw, DEFAULT_BOUNDS).unwrap();
    let (train_set, test_set) = split(&d, 0.2, seed).unwrap();
    let sel = select_penalty(&train_set, &test_set, &C_GRID, &TrainParams { seed, ..Default::default() }).unwrap();
    let cm = evaluate(&sel.model, &test_set).unwrap();
    (sel, cm)
}

pub fn fixture_forecasts() -> Vec<stormgrid_core::StormForecast> {
    (1..=3)
        .map(|k| stormgrid_core::StormForecast::from_json(&data_file(&format!("forecasts/path{k}.json"))).unwrap())
        .collect()
}
