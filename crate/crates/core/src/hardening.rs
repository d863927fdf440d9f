//! Scenario DC power-flow planning model for DG hardening.
//!
//! Variables per (scenario s, hour t), in this order:
//! dispatch `P` (one per generator), flows `PL` (one per branch), angles
//! `theta`, curtailment `LC` and DG output `PG` (one each per bus). The DG
//! capacities (one per bus) follow all blocks, so the column count is
//! `T * S * (ng + nl + 3 nb) + nb`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stormgrid_lp::{check_solution, solve, LpError, LpProblem, LpSolution, LpStatus, Sense, SolveOptions};

use crate::net::{BusId, NetError, Network};
use crate::storm::{ScenarioSet, StormError};

#[derive(Debug, thiserror::Error)]
pub enum HardeningError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Storm(#[from] StormError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("invalid parameters: {0}")]
    Invalid(String),
    #[error("hardening LP is infeasible after {iterations} iterations")]
    Infeasible { iterations: usize },
    #[error("hardening LP is unbounded; check cost inputs")]
    Unbounded,
    #[error("hardening LP hit the iteration limit ({0})")]
    IterationLimit(usize),
}

/// Investment budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    Unlimited,
    Limited(f64),
}

impl Budget {
    pub fn amount(self) -> f64 {
        match self {
            Budget::Unlimited => f64::INFINITY,
            Budget::Limited(v) => v,
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Unlimited => f.write_str("unlimited"),
            Budget::Limited(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for Budget {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("unlimited") || s.eq_ignore_ascii_case("inf") {
            return Ok(Budget::Unlimited);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_infinite() && v > 0.0 => Ok(Budget::Unlimited),
            Ok(v) if v >= 0.0 && v.is_finite() => Ok(Budget::Limited(v)),
            _ => Err(format!("budget must be a nonnegative number or \"unlimited\", got {s:?}")),
        }
    }
}

impl Serialize for Budget {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Budget::Unlimited => s.serialize_str("unlimited"),
            Budget::Limited(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Budget::from_str(&v.to_string()),
            Raw::Text(t) => Budget::from_str(&t),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Hourly load as a fraction of daily peak (IEEE RTS winter weekday).
pub const DEFAULT_LOAD_PROFILE: [f64; 24] = [
    0.67, 0.63, 0.60, 0.59, 0.59, 0.60, 0.74, 0.86, 0.95, 0.96, 0.96, 0.95, 0.95, 0.95, 0.93, 0.94, 0.99, 1.00, 1.00,
    0.96, 0.91, 0.83, 0.73, 0.63,
];

pub fn default_profile(hours: usize) -> Vec<f64> {
    (0..hours).map(|t| DEFAULT_LOAD_PROFILE[t % 24]).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconParams {
    /// currency/MWh
    pub voll: f64,
    pub voll_by_bus: BTreeMap<BusId, f64>,
    /// currency/MW
    pub dg_invest_cost: f64,
    pub dg_invest_cost_by_bus: BTreeMap<BusId, f64>,
    pub budget: Budget,
    /// One multiplier per hour; the horizon length is its length.
    pub load_multipliers: Vec<f64>,
    /// Buses allowed to host DG. `None` means every bus with load.
    pub dg_candidates: Option<Vec<BusId>>,
    /// Also price contingency dispatch at the scenario weights.
    pub price_scenario_dispatch: bool,
}

impl Default for EconParams {
    fn default() -> Self {
        EconParams {
            voll: 100.0,
            voll_by_bus: BTreeMap::new(),
            dg_invest_cost: 50.0,
            dg_invest_cost_by_bus: BTreeMap::new(),
            budget: Budget::Unlimited,
            load_multipliers: default_profile(24),
            dg_candidates: None,
            price_scenario_dispatch: false,
        }
    }
}

impl EconParams {
    pub fn horizon(&self) -> usize {
        self.load_multipliers.len()
    }

    pub fn voll_at(&self, bus: BusId) -> f64 {
        self.voll_by_bus.get(&bus).copied().unwrap_or(self.voll)
    }

    pub fn invest_cost_at(&self, bus: BusId) -> f64 {
        self.dg_invest_cost_by_bus.get(&bus).copied().unwrap_or(self.dg_invest_cost)
    }

    pub fn candidates(&self, net: &Network) -> BTreeSet<BusId> {
        match &self.dg_candidates {
            Some(list) => list.iter().copied().collect(),
            None => net.buses.iter().filter(|b| b.base_load > 0.0).map(|b| b.id).collect(),
        }
    }

    /// Scales per-horizon figures to a year.
    pub fn annualization_factor(&self) -> f64 {
        8760.0 / self.horizon() as f64
    }

    pub fn validate(&self, net: &Network) -> Result<(), HardeningError> {
        let bad = |m: String| Err(HardeningError::Invalid(m));
        if self.load_multipliers.is_empty() {
            return bad("horizon must have at least one hour".into());
        }
        if let Some(m) = self.load_multipliers.iter().find(|m| **m <= 0.0 || !m.is_finite()) {
            return bad(format!("load multipliers must be positive, got {m}"));
        }
        let ids: BTreeSet<BusId> = net.buses.iter().map(|b| b.id).collect();
        if self.voll < 0.0 || !self.voll.is_finite() {
            return bad(format!("voll must be nonnegative, got {}", self.voll));
        }
        for (b, v) in &self.voll_by_bus {
            if !ids.contains(b) {
                return bad(format!("voll given for unknown bus {b}"));
            }
            if *v < 0.0 || !v.is_finite() {
                return bad(format!("voll at bus {b} must be nonnegative, got {v}"));
            }
        }
        for (b, v) in &self.dg_invest_cost_by_bus {
            if !ids.contains(b) {
                return bad(format!("investment cost given for unknown bus {b}"));
            }
            if !v.is_finite() {
                return bad(format!("investment cost at bus {b} must be finite"));
            }
        }
        for b in self.candidates(net) {
            if !ids.contains(&b) {
                return bad(format!("DG candidate {b} is not a bus"));
            }
            let ic = self.invest_cost_at(b);
            if ic <= 0.0 || !ic.is_finite() {
                return bad(format!("DG investment cost at bus {b} must be positive, got {ic}"));
            }
        }
        if let Budget::Limited(v) = self.budget {
            if v < 0.0 || !v.is_finite() {
                return bad(format!("budget must be nonnegative, got {v}"));
            }
        }
        Ok(())
    }
}

/// Commitment status per generator (network order) and hour.
#[derive(Clone, Debug, PartialEq)]
pub struct Commitment {
    pub on: Vec<Vec<bool>>,
}

impl Commitment {
    pub fn all_on(generators: usize, hours: usize) -> Self {
        Commitment { on: vec![vec![true; hours]; generators] }
    }
}

/// Column positions of the model variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarLayout {
    pub hours: usize,
    pub scenarios: usize,
    pub ng: usize,
    pub nl: usize,
    pub nb: usize,
}

impl VarLayout {
    pub fn block_len(&self) -> usize {
        self.ng + self.nl + 3 * self.nb
    }

    fn block(&self, t: usize, s: usize) -> usize {
        (s * self.hours + t) * self.block_len()
    }

    pub fn dispatch(&self, i: usize, t: usize, s: usize) -> usize {
        self.block(t, s) + i
    }

    pub fn flow(&self, l: usize, t: usize, s: usize) -> usize {
        self.block(t, s) + self.ng + l
    }

    pub fn angle(&self, b: usize, t: usize, s: usize) -> usize {
        self.block(t, s) + self.ng + self.nl + b
    }

    pub fn curtailment(&self, b: usize, t: usize, s: usize) -> usize {
        self.block(t, s) + self.ng + self.nl + self.nb + b
    }

    pub fn dg_output(&self, b: usize, t: usize, s: usize) -> usize {
        self.block(t, s) + self.ng + self.nl + 2 * self.nb + b
    }

    pub fn dg_capacity(&self, b: usize) -> usize {
        self.hours * self.scenarios * self.block_len() + b
    }

    pub fn num_vars(&self) -> usize {
        self.hours * self.scenarios * self.block_len() + self.nb
    }
}

/// An assembled planning LP and the data needed to read its solution.
#[derive(Clone, Debug)]
pub struct HardeningModel {
    pub problem: LpProblem,
    pub layout: VarLayout,
    pub bus_ids: Vec<BusId>,
    /// Demand in MW, indexed [bus][hour].
    pub demand: Vec<Vec<f64>>,
    /// Generator available, indexed [scenario][generator].
    pub gen_up: Vec<Vec<bool>>,
    /// Branch available, indexed [scenario][branch].
    pub branch_up: Vec<Vec<bool>>,
    pub weights: Vec<f64>,
    pub labels: Vec<String>,
    pub voll: Vec<f64>,
    pub invest_cost: Vec<f64>,
    pub cost_linear: Vec<f64>,
    /// Fixed no-load cost of the base case over the horizon.
    pub base_noload: f64,
    pub budget: Budget,
    pub annualization_factor: f64,
}

enum CapacityMode<'a> {
    Optimize,
    Fixed(&'a BTreeMap<BusId, f64>),
}

pub fn build_model(
    net: &Network,
    scenarios: &ScenarioSet,
    econ: &EconParams,
    commitment: &Commitment,
) -> Result<HardeningModel, HardeningError> {
    assemble(net, scenarios, econ, commitment, CapacityMode::Optimize)
}

#[allow(clippy::needless_range_loop)]
fn assemble(
    net: &Network,
    scenarios: &ScenarioSet,
    econ: &EconParams,
    commitment: &Commitment,
    mode: CapacityMode<'_>,
) -> Result<HardeningModel, HardeningError> {
    net.validate()?;
    scenarios.validate(net)?;
    econ.validate(net)?;
    let hours = econ.horizon();
    let (ng, nl, nb) = (net.generators.len(), net.branches.len(), net.buses.len());
    if commitment.on.len() != ng || commitment.on.iter().any(|r| r.len() != hours) {
        return Err(HardeningError::Invalid(format!("commitment must be {ng} generators x {hours} hours")));
    }
    let ns = scenarios.scenarios.len();
    let lay = VarLayout { hours, scenarios: ns, ng, nl, nb };
    let bus_pos: HashMap<BusId, usize> = net.bus_index();
    let reference = bus_pos[&net.reference_bus().ok_or(NetError::NoReferenceBus)?];

    let demand: Vec<Vec<f64>> =
        net.buses.iter().map(|b| econ.load_multipliers.iter().map(|m| b.base_load * m).collect()).collect();
    let gen_up: Vec<Vec<bool>> = scenarios
        .scenarios
        .iter()
        .map(|s| net.generators.iter().map(|g| !s.out_generators.contains(&g.id)).collect())
        .collect();
    let branch_up: Vec<Vec<bool>> = scenarios
        .scenarios
        .iter()
        .map(|s| net.branches.iter().map(|l| !s.out_branches.contains(&l.id)).collect())
        .collect();
    let weights: Vec<f64> = scenarios.scenarios.iter().map(|s| s.weight).collect();
    let voll: Vec<f64> = net.buses.iter().map(|b| econ.voll_at(b.id)).collect();
    let invest_cost: Vec<f64> = net.buses.iter().map(|b| econ.invest_cost_at(b.id)).collect();

    let (dg_allowed, cap_bounds): (Vec<bool>, Vec<(f64, f64)>) = match mode {
        CapacityMode::Optimize => {
            let cand = econ.candidates(net);
            net.buses
                .iter()
                .map(|b| if cand.contains(&b.id) { (true, (0.0, f64::INFINITY)) } else { (false, (0.0, 0.0)) })
                .unzip()
        }
        CapacityMode::Fixed(caps) => {
            for (b, v) in caps {
                if !bus_pos.contains_key(b) {
                    return Err(HardeningError::Invalid(format!("capacity given for unknown bus {b}")));
                }
                if *v < 0.0 || !v.is_finite() {
                    return Err(HardeningError::Invalid(format!("capacity at bus {b} must be nonnegative, got {v}")));
                }
            }
            net.buses
                .iter()
                .map(|b| {
                    let c = caps.get(&b.id).copied().unwrap_or(0.0);
                    (c > 0.0, (c, c))
                })
                .unzip()
        }
    };

    let mut lp = LpProblem::new();
    let mut base_noload = 0.0;
    let mut offset = 0.0;
    for s in 0..ns {
        let w = weights[s];
        let priced = s == 0 || econ.price_scenario_dispatch;
        let cost_scale = if s == 0 { 1.0 } else { w };
        for t in 0..hours {
            for (i, g) in net.generators.iter().enumerate() {
                let on = commitment.on[i][t] && gen_up[s][i];
                let (lo, hi) = if on { (g.p_min, g.p_max) } else { (0.0, 0.0) };
                let cost = if priced { cost_scale * g.cost_linear } else { 0.0 };
                lp.add_var(format!("P[g{},t{t},s{s}]", g.id), lo, hi, cost);
                if priced && on {
                    offset += cost_scale * g.cost_noload;
                    if s == 0 {
                        base_noload += g.cost_noload;
                    }
                }
            }
            for (l, br) in net.branches.iter().enumerate() {
                let lim = if branch_up[s][l] { br.flow_limit } else { 0.0 };
                lp.add_var(format!("PL[l{},t{t},s{s}]", br.id), -lim, lim, 0.0);
            }
            for (b, bus) in net.buses.iter().enumerate() {
                let (lo, hi) = if b == reference { (0.0, 0.0) } else { (-FRAC_PI_2, FRAC_PI_2) };
                lp.add_var(format!("theta[b{},t{t},s{s}]", bus.id), lo, hi, 0.0);
            }
            for (b, bus) in net.buses.iter().enumerate() {
                let hi = if s == 0 { 0.0 } else { demand[b][t] };
                let cost = if s == 0 { 0.0 } else { w * voll[b] };
                lp.add_var(format!("LC[b{},t{t},s{s}]", bus.id), 0.0, hi, cost);
            }
            for (b, bus) in net.buses.iter().enumerate() {
                let hi = if dg_allowed[b] { f64::INFINITY } else { 0.0 };
                lp.add_var(format!("PG[b{},t{t},s{s}]", bus.id), 0.0, hi, 0.0);
            }
        }
    }
    for (b, bus) in net.buses.iter().enumerate() {
        let (lo, hi) = cap_bounds[b];
        let cost = if matches!(mode, CapacityMode::Optimize) { invest_cost[b] } else { 0.0 };
        lp.add_var(format!("Gmax[b{}]", bus.id), lo, hi, cost);
    }
    debug_assert_eq!(lp.num_vars(), lay.num_vars());
    if let CapacityMode::Fixed(_) = mode {
        offset += cap_bounds.iter().zip(&invest_cost).map(|((c, _), ic)| c * ic).sum::<f64>();
    }
    lp.set_objective_offset(offset);

    let gens_at: Vec<Vec<usize>> = {
        let mut v = vec![Vec::new(); nb];
        for (i, g) in net.generators.iter().enumerate() {
            v[bus_pos[&g.bus]].push(i);
        }
        v
    };
    let ends: Vec<(usize, usize)> = net.branches.iter().map(|l| (bus_pos[&l.from_bus], bus_pos[&l.to_bus])).collect();
    let mut touching: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
    for (l, &(f, to)) in ends.iter().enumerate() {
        // flow leaves the from bus and enters the to bus
        touching[f].push((l, -1.0));
        touching[to].push((l, 1.0));
    }

    for s in 0..ns {
        for t in 0..hours {
            for b in 0..nb {
                let mut coeffs: Vec<(usize, f64)> = gens_at[b].iter().map(|&i| (lay.dispatch(i, t, s), 1.0)).collect();
                coeffs.push((lay.dg_output(b, t, s), 1.0));
                coeffs.extend(touching[b].iter().map(|&(l, sign)| (lay.flow(l, t, s), sign)));
                coeffs.push((lay.curtailment(b, t, s), 1.0));
                lp.add_row(format!("balance[b{},t{t},s{s}]", net.buses[b].id), coeffs, Sense::Eq, demand[b][t]);
            }
            for (l, br) in net.branches.iter().enumerate() {
                let (f, to) = ends[l];
                let k = net.base_mva / br.reactance;
                let coeffs = vec![(lay.flow(l, t, s), 1.0), (lay.angle(f, t, s), -k), (lay.angle(to, t, s), k)];
                let name = format!("flow[l{},t{t},s{s}]", br.id);
                if branch_up[s][l] {
                    lp.add_row(name, coeffs, Sense::Eq, 0.0);
                } else {
                    let big_m = PI * k;
                    lp.add_row(format!("{name}+"), coeffs.clone(), Sense::Le, big_m);
                    lp.add_row(format!("{name}-"), coeffs, Sense::Ge, -big_m);
                }
            }
            if s > 0 {
                for (i, g) in net.generators.iter().enumerate() {
                    if !(gen_up[s][i] && commitment.on[i][t]) {
                        continue;
                    }
                    let coeffs = vec![(lay.dispatch(i, t, 0), 1.0), (lay.dispatch(i, t, s), -1.0)];
                    let name = format!("ramp[g{},t{t},s{s}]", g.id);
                    lp.add_row(format!("{name}+"), coeffs.clone(), Sense::Le, g.ramp_dev);
                    lp.add_row(format!("{name}-"), coeffs, Sense::Ge, -g.ramp_dev);
                }
            }
            for b in 0..nb {
                if !dg_allowed[b] {
                    continue;
                }
                lp.add_row(
                    format!("dg[b{},t{t},s{s}]", net.buses[b].id),
                    vec![(lay.dg_output(b, t, s), 1.0), (lay.dg_capacity(b), -1.0)],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }
    let budget = match mode {
        CapacityMode::Optimize => econ.budget,
        CapacityMode::Fixed(_) => Budget::Unlimited,
    };
    if let Budget::Limited(limit) = budget {
        let coeffs: Vec<(usize, f64)> =
            (0..nb).filter(|&b| dg_allowed[b]).map(|b| (lay.dg_capacity(b), invest_cost[b])).collect();
        lp.add_row("budget", coeffs, Sense::Le, limit);
    }
    lp.validate()?;

    Ok(HardeningModel {
        problem: lp,
        layout: lay,
        bus_ids: net.buses.iter().map(|b| b.id).collect(),
        demand,
        gen_up,
        branch_up,
        weights,
        labels: scenarios.scenarios.iter().map(|s| s.label.clone()).collect(),
        voll,
        invest_cost,
        cost_linear: net.generators.iter().map(|g| g.cost_linear).collect(),
        base_noload,
        budget,
        annualization_factor: econ.annualization_factor(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub label: String,
    pub weight: f64,
    pub curtailment_mwh: f64,
    /// voll times curtailed energy, unweighted.
    pub unserved_cost: f64,
    pub dg_energy_mwh: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub status: String,
    pub iterations: usize,
    pub variables: usize,
    pub rows: usize,
    pub nonzeros: usize,
    pub max_row_residual: f64,
    pub max_bound_violation: f64,
    pub duality_gap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardeningPlan {
    pub budget: Budget,
    pub horizon_hours: usize,
    /// MW per bus; buses without capacity are omitted.
    pub dg_capacity: BTreeMap<BusId, f64>,
    pub invest_cost: f64,
    /// Base-case no-load plus energy cost over the horizon.
    pub base_operation_cost: f64,
    /// Weighted contingency dispatch cost over the horizon (reported only).
    pub scenario_operation_cost: f64,
    pub scenarios: Vec<ScenarioOutcome>,
    pub total_curtailment_mwh: f64,
    /// Weighted sum of voll times curtailed energy.
    pub unserved_energy_cost: f64,
    /// Unweighted voll times curtailed energy averaged over contingencies.
    pub average_unserved_cost: f64,
    pub objective: f64,
    pub annualization_factor: f64,
    pub annual_base_operation_cost: f64,
    pub annual_average_unserved_cost: f64,
    pub diagnostics: SolveDiagnostics,
}

impl HardeningPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}

/// Capacities below this are reported as zero.
pub const CAPACITY_EPS: f64 = 1e-6;

impl HardeningModel {
    pub fn solve(&self, opts: &SolveOptions) -> Result<(LpSolution, HardeningPlan), HardeningError> {
        let sol = solve(&self.problem, opts)?;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Err(HardeningError::Infeasible { iterations: sol.iterations }),
            LpStatus::Unbounded => return Err(HardeningError::Unbounded),
            LpStatus::IterationLimit => return Err(HardeningError::IterationLimit(sol.iterations)),
        }
        let plan = self.plan(&sol)?;
        Ok((sol, plan))
    }

    pub fn plan(&self, sol: &LpSolution) -> Result<HardeningPlan, HardeningError> {
        let lay = &self.layout;
        let x = &sol.x;
        let report = check_solution(&self.problem, sol)?;
        let mut dg_capacity = BTreeMap::new();
        let mut invest_cost = 0.0;
        for b in 0..lay.nb {
            let c = x[lay.dg_capacity(b)];
            if c >= CAPACITY_EPS {
                dg_capacity.insert(self.bus_ids[b], c);
                invest_cost += self.invest_cost[b] * c;
            }
        }
        let mut base_operation_cost = self.base_noload;
        for t in 0..lay.hours {
            for i in 0..lay.ng {
                base_operation_cost += self.cost_linear[i] * x[lay.dispatch(i, t, 0)];
            }
        }
        let mut scenario_operation_cost = 0.0;
        let mut outcomes = Vec::new();
        for s in 1..lay.scenarios {
            let (mut curt, mut cost, mut dg) = (0.0, 0.0, 0.0);
            for t in 0..lay.hours {
                for b in 0..lay.nb {
                    let lc = x[lay.curtailment(b, t, s)];
                    curt += lc;
                    cost += self.voll[b] * lc;
                    dg += x[lay.dg_output(b, t, s)];
                }
                for i in 0..lay.ng {
                    scenario_operation_cost += self.weights[s] * self.cost_linear[i] * x[lay.dispatch(i, t, s)];
                }
            }
            outcomes.push(ScenarioOutcome {
                label: self.labels[s].clone(),
                weight: self.weights[s],
                curtailment_mwh: curt,
                unserved_cost: cost,
                dg_energy_mwh: dg,
            });
        }
        let total_curtailment_mwh = outcomes.iter().map(|o| o.curtailment_mwh).sum();
        let unserved_energy_cost = outcomes.iter().map(|o| o.weight * o.unserved_cost).sum();
        let average_unserved_cost = if outcomes.is_empty() {
            0.0
        } else {
            outcomes.iter().map(|o| o.unserved_cost).sum::<f64>() / outcomes.len() as f64
        };
        let af = self.annualization_factor;
        Ok(HardeningPlan {
            budget: self.budget,
            horizon_hours: lay.hours,
            dg_capacity,
            invest_cost,
            base_operation_cost,
            scenario_operation_cost,
            scenarios: outcomes,
            total_curtailment_mwh,
            unserved_energy_cost,
            average_unserved_cost,
            objective: sol.objective,
            annualization_factor: af,
            annual_base_operation_cost: af * base_operation_cost,
            annual_average_unserved_cost: af * average_unserved_cost,
            diagnostics: SolveDiagnostics {
                status: format!("{:?}", sol.status).to_lowercase(),
                iterations: sol.iterations,
                variables: self.problem.num_vars(),
                rows: self.problem.num_rows(),
                nonzeros: self.problem.num_nonzeros(),
                max_row_residual: report.max_row_residual,
                max_bound_violation: report.max_bound_violation,
                duality_gap: report.duality_gap,
            },
        })
    }
}

pub fn solve_hardening(
    net: &Network,
    scenarios: &ScenarioSet,
    econ: &EconParams,
    commitment: &Commitment,
) -> Result<HardeningPlan, HardeningError> {
    let model = build_model(net, scenarios, econ, commitment)?;
    model.solve(&SolveOptions::default()).map(|(_, plan)| plan)
}

/// Operations-only solve with DG capacities held at `capacities`.
pub fn evaluate_plan(
    net: &Network,
    scenarios: &ScenarioSet,
    econ: &EconParams,
    capacities: &BTreeMap<BusId, f64>,
) -> Result<HardeningPlan, HardeningError> {
    let commitment = Commitment::all_on(net.generators.len(), econ.horizon());
    let model = assemble(net, scenarios, econ, &commitment, CapacityMode::Fixed(capacities))?;
    model.solve(&SolveOptions::default()).map(|(_, plan)| plan)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub budget: Budget,
    pub curtailment_mwh: Vec<f64>,
    pub total_curtailment_mwh: f64,
    pub average_unserved_cost: f64,
    pub invest_used: f64,
    pub objective: f64,
    pub error: Option<String>,
}

/// Solves once per budget. Budgets must be nonnegative and ascending.
pub fn budget_sweep(
    net: &Network,
    scenarios: &ScenarioSet,
    econ: &EconParams,
    budgets: &[Budget],
) -> Result<Vec<SweepRow>, HardeningError> {
    for pair in budgets.windows(2) {
        if pair[1].amount() < pair[0].amount() {
            return Err(HardeningError::Invalid(format!("budgets must be ascending: {} before {}", pair[0], pair[1])));
        }
    }
    for b in budgets {
        if b.amount().is_nan() || b.amount() < 0.0 {
            return Err(HardeningError::Invalid(format!("budget must be nonnegative, got {b}")));
        }
    }
    let commitment = Commitment::all_on(net.generators.len(), econ.horizon());
    let rows = budgets
        .par_iter()
        .map(|&budget| {
            let e = EconParams { budget, ..econ.clone() };
            match solve_hardening(net, scenarios, &e, &commitment) {
                Ok(plan) => SweepRow {
                    budget,
                    curtailment_mwh: plan.scenarios.iter().map(|s| s.curtailment_mwh).collect(),
                    total_curtailment_mwh: plan.total_curtailment_mwh,
                    average_unserved_cost: plan.average_unserved_cost,
                    invest_used: plan.invest_cost,
                    objective: plan.objective,
                    error: None,
                },
                Err(err) => {
                    log::warn!("budget {budget}: {err}");
                    SweepRow {
                        budget,
                        curtailment_mwh: vec![],
                        total_curtailment_mwh: f64::NAN,
                        average_unserved_cost: f64::NAN,
                        invest_used: f64::NAN,
                        objective: f64::NAN,
                        error: Some(err.to_string()),
                    }
                }
            }
        })
        .collect();
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], contingencies: usize) -> String {
    let mut s = String::from("budget");
    for k in 1..=contingencies {
        let _ = write!(s, ",curtail_path_{k}_mwh");
    }
    s.push_str(",avg_unserved_cost,invest_used,error\n");
    for r in rows {
        let _ = write!(s, "{}", r.budget);
        for k in 0..contingencies {
            match r.curtailment_mwh.get(k) {
                Some(v) => {
                    let _ = write!(s, ",{v:.3}");
                }
                None => s.push(','),
            }
        }
        if r.error.is_some() {
            let _ = writeln!(s, ",,,{}", r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"));
        } else {
            let _ = writeln!(s, ",{:.0},{:.0},", r.average_unserved_cost, r.invest_used);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Branch, Bus, Generator};
    use std::collections::BTreeSet;

    fn gen(id: u32, bus: BusId, p_max: f64, cost: f64) -> Generator {
        Generator { id, bus, p_min: 0.0, p_max, cost_linear: cost, cost_noload: 0.0, ramp_dev: p_max }
    }

    fn two_bus() -> Network {
        Network {
            name: "two".into(),
            base_mva: 100.0,
            buses: vec![
                Bus { id: 1, base_load: 0.0, is_reference: true },
                Bus { id: 2, base_load: 10.0, is_reference: false },
            ],
            generators: vec![gen(1, 1, 100.0, 10.0)],
            branches: vec![Branch { id: 1, from_bus: 1, to_bus: 2, reactance: 0.1, flow_limit: 100.0 }],
        }
    }

    #[test]
    fn budget_parsing() {
        assert_eq!("unlimited".parse::<Budget>().unwrap(), Budget::Unlimited);
        assert_eq!("1e6".parse::<Budget>().unwrap(), Budget::Limited(1e6));
        assert!("-1".parse::<Budget>().is_err());
        let j = serde_json::to_string(&Budget::Unlimited).unwrap();
        assert_eq!(serde_json::from_str::<Budget>(&j).unwrap(), Budget::Unlimited);
        assert_eq!(serde_json::from_str::<Budget>("250").unwrap(), Budget::Limited(250.0));
    }

    #[test]
    fn islanded_load_gets_dg() {
        let net = two_bus();
        let sc = ScenarioSet::from_contingencies(
            vec![("cut".into(), BTreeSet::new(), BTreeSet::from([1]))],
            crate::storm::Weighting::Uniform,
        );
        let econ = EconParams { load_multipliers: vec![1.0], ..Default::default() };
        let plan = solve_hardening(&net, &sc, &econ, &Commitment::all_on(1, 1)).unwrap();
        assert!((plan.dg_capacity[&2] - 10.0).abs() < 1e-6);
        assert!((plan.invest_cost - 500.0).abs() < 1e-6);
        assert!(plan.total_curtailment_mwh.abs() < 1e-6);
    }

    #[test]
    fn variable_count_formula() {
        let net = two_bus();
        let sc = ScenarioSet::base_only();
        let econ = EconParams { load_multipliers: vec![1.0, 0.5, 0.7], ..Default::default() };
        let m = build_model(&net, &sc, &econ, &Commitment::all_on(1, 3)).unwrap();
        assert_eq!(m.problem.num_vars(), 3 * (1 + 1 + 3 * 2) + 2);
    }

    #[test]
    fn unknown_component_rejected() {
        let net = two_bus();
        let sc = ScenarioSet::from_contingencies(
            vec![("x".into(), BTreeSet::from([7]), BTreeSet::new())],
            crate::storm::Weighting::Uniform,
        );
        let err = build_model(&net, &sc, &EconParams::default(), &Commitment::all_on(1, 24)).unwrap_err();
        assert!(matches!(err, HardeningError::Storm(StormError::UnknownComponent { id: 7, .. })));
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = vec![SweepRow {
            budget: Budget::Limited(0.0),
            curtailment_mwh: vec![1.5, 2.0],
            total_curtailment_mwh: 3.5,
            average_unserved_cost: 175.0,
            invest_used: 0.0,
            objective: 0.0,
            error: None,
        }];
        let csv = write_sweep_csv(&rows, 2);
        assert_eq!(
            csv,
            "budget,curtail_path_1_mwh,curtail_path_2_mwh,avg_unserved_cost,invest_used,error\n0,1.500,2.000,175,0,\n"
        );
    }
}
