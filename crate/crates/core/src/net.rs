//! Network data model, MATPOWER case subset reader/writer and planar layout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub type BusId = u32;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NetError {
    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("missing block mpc.{0}")]
    MissingBlock(&'static str),
    #[error("no reference bus")]
    NoReferenceBus,
    #[error("multiple reference buses: {0:?}")]
    MultipleReferenceBuses(Vec<BusId>),
    #[error("duplicate bus {0}")]
    DuplicateBus(BusId),
    #[error("missing bus {0}")]
    MissingBus(BusId),
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("branch {id}: reactance must be positive, got {value}")]
    NonPositiveReactance { id: u32, value: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("layout line {line}: {detail}")]
    Layout { line: usize, detail: String },
    #[error("json: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    /// MW
    pub base_load: f64,
    pub is_reference: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: u32,
    pub bus: BusId,
    pub p_min: f64,
    pub p_max: f64,
    /// currency/MWh
    pub cost_linear: f64,
    /// currency/h while committed
    pub cost_noload: f64,
    /// MW, largest allowed move between base dispatch and any contingency
    pub ramp_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: u32,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// per unit on the network base
    pub reactance: f64,
    /// MW
    pub flow_limit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
}

impl Network {
    pub fn bus_index(&self) -> HashMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
    }

    pub fn reference_bus(&self) -> Option<BusId> {
        self.buses.iter().find(|b| b.is_reference).map(|b| b.id)
    }

    pub fn total_load(&self) -> f64 {
        self.buses.iter().map(|b| b.base_load).sum()
    }

    pub fn generator(&self, id: u32) -> Option<&Generator> {
        self.generators.iter().find(|g| g.id == id)
    }

    pub fn branch(&self, id: u32) -> Option<&Branch> {
        self.branches.iter().find(|l| l.id == id)
    }

    /// Checks the structural invariants. Returns warnings for soft problems.
    pub fn validate(&self) -> Result<Vec<String>, NetError> {
        let mut seen = BTreeSet::new();
        for b in &self.buses {
            if !seen.insert(b.id) {
                return Err(NetError::DuplicateBus(b.id));
            }
            if b.base_load < 0.0 || !b.base_load.is_finite() {
                return Err(NetError::Invalid(format!(
                    "bus {}: base_load must be finite and nonnegative, got {}",
                    b.id, b.base_load
                )));
            }
        }
        let refs: Vec<BusId> = self.buses.iter().filter(|b| b.is_reference).map(|b| b.id).collect();
        match refs.len() {
            0 => return Err(NetError::NoReferenceBus),
            1 => {}
            _ => return Err(NetError::MultipleReferenceBuses(refs)),
        }
        if self.base_mva.is_nan() || self.base_mva <= 0.0 {
            return Err(NetError::Invalid(format!("base MVA must be positive, got {}", self.base_mva)));
        }
        let mut gen_ids = BTreeSet::new();
        for g in &self.generators {
            if !gen_ids.insert(g.id) {
                return Err(NetError::Invalid(format!("duplicate generator {}", g.id)));
            }
            if !seen.contains(&g.bus) {
                return Err(NetError::UnknownBus(g.bus));
            }
            let finite = [g.p_min, g.p_max, g.cost_linear, g.cost_noload, g.ramp_dev]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(NetError::Invalid(format!("generator {}: non-finite parameter", g.id)));
            }
            if g.p_min < 0.0 || g.p_min > g.p_max {
                return Err(NetError::Invalid(format!(
                    "generator {}: need 0 <= p_min <= p_max, got p_min {} p_max {}",
                    g.id, g.p_min, g.p_max
                )));
            }
            if g.cost_linear < 0.0 {
                return Err(NetError::Invalid(format!("generator {}: negative linear cost", g.id)));
            }
            if g.ramp_dev < 0.0 {
                return Err(NetError::Invalid(format!("generator {}: negative ramp_dev", g.id)));
            }
        }
        let mut br_ids = BTreeSet::new();
        for l in &self.branches {
            if !br_ids.insert(l.id) {
                return Err(NetError::Invalid(format!("duplicate branch {}", l.id)));
            }
            for end in [l.from_bus, l.to_bus] {
                if !seen.contains(&end) {
                    return Err(NetError::UnknownBus(end));
                }
            }
            if l.from_bus == l.to_bus {
                return Err(NetError::Invalid(format!("branch {}: from_bus equals to_bus", l.id)));
            }
            if l.reactance <= 0.0 || !l.reactance.is_finite() {
                return Err(NetError::NonPositiveReactance { id: l.id, value: l.reactance });
            }
            if l.flow_limit.is_nan() || l.flow_limit <= 0.0 {
                return Err(NetError::Invalid(format!(
                    "branch {}: flow_limit must be positive, got {}",
                    l.id, l.flow_limit
                )));
            }
        }
        let mut warnings = Vec::new();
        let islands = self.island_count();
        if islands > 1 {
            warnings.push(format!("network has {islands} islands with all branches in service"));
        }
        Ok(warnings)
    }

    fn island_count(&self) -> usize {
        let index = self.bus_index();
        let mut parent: Vec<usize> = (0..self.buses.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for l in &self.branches {
            if let (Some(&a), Some(&b)) = (index.get(&l.from_bus), index.get(&l.to_bus)) {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra] = rb;
                }
            }
        }
        (0..self.buses.len()).filter(|&i| find(&mut parent, i) == i).count()
    }

    /// Stable, pretty JSON dump. Field order follows the struct declarations.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Network, NetError> {
        let net: Network = serde_json::from_str(text).map_err(|e| NetError::Json(e.to_string()))?;
        net.validate()?;
        Ok(net)
    }
}

#[derive(Clone, Debug)]
pub struct ParseOptions {
    /// Used for ramp_dev when the case has no positive 30-minute ramp column.
    pub default_ramp_fraction: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { default_ramp_fraction: 0.5 }
    }
}

#[derive(Clone, Debug)]
pub struct ParsedCase {
    pub network: Network,
    pub warnings: Vec<String>,
}

struct Block {
    line: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

const BUS_COLS: usize = 13;
const GEN_COLS: usize = 10;
const BRANCH_COLS: usize = 11;

pub fn parse_matpower(text: &str) -> Result<Network, NetError> {
    parse_matpower_with(text, &ParseOptions::default()).map(|p| p.network)
}

pub fn parse_matpower_with(text: &str, opts: &ParseOptions) -> Result<ParsedCase, NetError> {
    let mut warnings = Vec::new();
    let mut name = String::from("case");
    let mut base_mva: Option<f64> = None;
    let mut blocks: BTreeMap<String, Block> = BTreeMap::new();

    let lines: Vec<&str> = text.lines().collect();
    let mut k = 0;
    while k < lines.len() {
        let lineno = k + 1;
        let line = strip_comment(lines[k]).trim();
        k += 1;
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("function") {
            if let Some((_, n)) = rest.split_once('=') {
                name = n.trim().trim_end_matches(';').trim().to_string();
            }
            continue;
        }
        let Some(rest) = line.strip_prefix("mpc.") else {
            continue;
        };
        let Some((key, value)) = rest.split_once('=') else {
            return Err(NetError::Malformed { line: lineno, detail: format!("expected assignment: {line}") });
        };
        let key = key.trim().to_string();
        let value = value.trim();
        if let Some(body) = value.strip_prefix('[') {
            let mut buf = String::new();
            let mut body = body.to_string();
            let mut row_lines: Vec<(usize, String)> = Vec::new();
            let mut cur_line = lineno;
            loop {
                if let Some(end) = body.find(']') {
                    buf.push_str(&body[..end]);
                    row_lines.push((cur_line, std::mem::take(&mut buf)));
                    break;
                }
                buf.push_str(&body);
                row_lines.push((cur_line, std::mem::take(&mut buf)));
                if k >= lines.len() {
                    return Err(NetError::Malformed { line: lineno, detail: format!("unterminated matrix mpc.{key}") });
                }
                cur_line = k + 1;
                body = strip_comment(lines[k]).to_string();
                k += 1;
            }
            if !is_known_block(&key) {
                warnings.push(format!("ignoring block mpc.{key}"));
                continue;
            }
            let rows = split_rows(&row_lines)?;
            blocks.insert(key, Block { line: lineno, rows });
        } else if key == "baseMVA" {
            let v = value.trim_end_matches(';').trim();
            base_mva = Some(v.parse().map_err(|_| NetError::Malformed {
                line: lineno,
                detail: format!("bad baseMVA {v}"),
            })?);
        } else if key == "version" {
            continue;
        } else {
            if value.starts_with('{') {
                // skip cell arrays, possibly spanning lines
                let mut depth = value.matches('{').count() as i64 - value.matches('}').count() as i64;
                while depth > 0 && k < lines.len() {
                    let l = strip_comment(lines[k]);
                    depth += l.matches('{').count() as i64 - l.matches('}').count() as i64;
                    k += 1;
                }
            }
            warnings.push(format!("ignoring field mpc.{key}"));
        }
    }

    let base_mva = base_mva.ok_or(NetError::MissingBlock("baseMVA"))?;
    let bus = blocks.remove("bus").ok_or(NetError::MissingBlock("bus"))?;
    let gen = blocks.remove("gen").ok_or(NetError::MissingBlock("gen"))?;
    let branch = blocks.remove("branch").ok_or(NetError::MissingBlock("branch"))?;
    let gencost = blocks.remove("gencost");

    check_width(&bus, BUS_COLS, "bus")?;
    check_width(&gen, GEN_COLS, "gen")?;
    check_width(&branch, BRANCH_COLS, "branch")?;

    let mut buses = Vec::with_capacity(bus.rows.len());
    let mut seen = BTreeSet::new();
    for (line, r) in &bus.rows {
        let id = to_id(r[0], *line)?;
        if !seen.insert(id) {
            return Err(NetError::DuplicateBus(id));
        }
        buses.push(Bus { id, base_load: r[2], is_reference: r[1] == 3.0 });
    }
    if !buses.iter().any(|b| b.is_reference) {
        return Err(NetError::NoReferenceBus);
    }

    let costs = match &gencost {
        Some(gc) => Some(parse_gencost(gc, gen.rows.len(), &mut warnings)?),
        None => {
            warnings.push("no gencost block; generator costs set to zero".into());
            None
        }
    };

    let mut generators = Vec::new();
    for (k, (line, r)) in gen.rows.iter().enumerate() {
        let status = r[7];
        if status <= 0.0 {
            continue;
        }
        let bus = to_id(r[0], *line)?;
        let p_max = r[8];
        let p_min = r[9];
        let ramp30 = r.get(18).copied().unwrap_or(0.0);
        let ramp_dev = if ramp30 > 0.0 { ramp30 } else { opts.default_ramp_fraction * p_max.max(0.0) };
        let (cost_linear, cost_noload) = costs.as_ref().map(|c| c[k]).unwrap_or((0.0, 0.0));
        generators.push(Generator { id: k as u32 + 1, bus, p_min, p_max, cost_linear, cost_noload, ramp_dev });
    }

    let mut branches = Vec::new();
    for (k, (line, r)) in branch.rows.iter().enumerate() {
        if r[10] <= 0.0 {
            continue;
        }
        let id = k as u32 + 1;
        let x = r[3];
        if x.is_nan() || x <= 0.0 {
            return Err(NetError::NonPositiveReactance { id, value: x });
        }
        let rate_a = r[5];
        let flow_limit = if rate_a > 0.0 { rate_a } else { PI * base_mva / x };
        branches.push(Branch {
            id,
            from_bus: to_id(r[0], *line)?,
            to_bus: to_id(r[1], *line)?,
            reactance: x,
            flow_limit,
        });
    }

    let network = Network { name, base_mva, buses, generators, branches };
    warnings.extend(network.validate()?);
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(ParsedCase { network, warnings })
}

fn is_known_block(key: &str) -> bool {
    matches!(key, "bus" | "gen" | "branch" | "gencost")
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn split_rows(row_lines: &[(usize, String)]) -> Result<Vec<(usize, Vec<f64>)>, NetError> {
    let mut rows = Vec::new();
    for (line, chunk) in row_lines {
        for piece in chunk.split(';') {
            let fields: Vec<&str> = piece
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            if fields.is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(fields.len());
            for f in fields {
                let v = parse_number(f).ok_or_else(|| NetError::Malformed {
                    line: *line,
                    detail: format!("not a number: {f}"),
                })?;
                row.push(v);
            }
            rows.push((*line, row));
        }
    }
    Ok(rows)
}

fn parse_number(s: &str) -> Option<f64> {
    match s {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

fn check_width(block: &Block, min: usize, name: &str) -> Result<(), NetError> {
    let Some((_, first)) = block.rows.first() else {
        return Err(NetError::Malformed { line: block.line, detail: format!("mpc.{name} is empty") });
    };
    let width = first.len();
    if width < min {
        return Err(NetError::Malformed {
            line: block.rows[0].0,
            detail: format!("mpc.{name} row has {width} columns, need at least {min}"),
        });
    }
    for (line, r) in &block.rows {
        if r.len() != width {
            return Err(NetError::Malformed {
                line: *line,
                detail: format!("mpc.{name} row has {} columns, expected {width}", r.len()),
            });
        }
    }
    Ok(())
}

fn to_id(v: f64, line: usize) -> Result<u32, NetError> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(NetError::Malformed { line, detail: format!("bad identifier {v}") })
    }
}

/// (linear, constant) per gen row.
fn parse_gencost(block: &Block, ngen: usize, warnings: &mut Vec<String>) -> Result<Vec<(f64, f64)>, NetError> {
    if block.rows.len() < ngen {
        return Err(NetError::Malformed {
            line: block.line,
            detail: format!("mpc.gencost has {} rows for {ngen} generators", block.rows.len()),
        });
    }
    let mut dropped_quadratic = 0;
    let mut out = Vec::with_capacity(ngen);
    for (line, r) in block.rows.iter().take(ngen) {
        if r.len() < 4 {
            return Err(NetError::Malformed { line: *line, detail: "gencost row too short".into() });
        }
        let model = r[0];
        let n = r[3] as usize;
        if model == 2.0 {
            if r.len() < 4 + n {
                return Err(NetError::Malformed {
                    line: *line,
                    detail: format!("gencost row declares {n} coefficients but has {}", r.len() - 4),
                });
            }
            let c = &r[4..4 + n];
            let constant = if n >= 1 { c[n - 1] } else { 0.0 };
            let linear = if n >= 2 { c[n - 2] } else { 0.0 };
            if n >= 3 && c[..n - 2].iter().any(|&v| v != 0.0) {
                dropped_quadratic += 1;
            }
            out.push((linear, constant));
        } else if model == 1.0 {
            if r.len() < 4 + 2 * n || n < 2 {
                return Err(NetError::Malformed { line: *line, detail: "bad piecewise-linear gencost row".into() });
            }
            let pts = &r[4..4 + 2 * n];
            let (p0, f0) = (pts[0], pts[1]);
            let (p1, f1) = (pts[2 * n - 2], pts[2 * n - 1]);
            let slope = if p1 > p0 { (f1 - f0) / (p1 - p0) } else { 0.0 };
            warnings.push(format!("line {line}: piecewise-linear cost replaced by its end-to-end secant"));
            out.push((slope, f0 - slope * p0));
        } else {
            return Err(NetError::Malformed { line: *line, detail: format!("unknown gencost model {model}") });
        }
    }
    if dropped_quadratic > 0 {
        warnings.push(format!("dropped quadratic and higher cost terms on {dropped_quadratic} generators"));
    }
    if block.rows.len() > ngen {
        warnings.push("ignoring reactive gencost rows".into());
    }
    Ok(out)
}

/// Writes the network as a MATPOWER case that `parse_matpower` reads back to
/// an identical network. Id gaps are filled with out-of-service rows.
pub fn to_matpower(net: &Network) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "function mpc = {}", net.name);
    let _ = writeln!(s, "mpc.version = '2';");
    let _ = writeln!(s, "mpc.baseMVA = {};", net.base_mva);
    let gen_buses: BTreeSet<BusId> = net.generators.iter().map(|g| g.bus).collect();
    let _ = writeln!(s, "%% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin");
    let _ = writeln!(s, "mpc.bus = [");
    for b in &net.buses {
        let ty = if b.is_reference {
            3
        } else if gen_buses.contains(&b.id) {
            2
        } else {
            1
        };
        let _ = writeln!(s, "\t{}\t{}\t{}\t0\t0\t0\t1\t1\t0\t0\t1\t1.06\t0.94;", b.id, ty, b.base_load);
    }
    let _ = writeln!(s, "];");

    let first_bus = net.buses.first().map(|b| b.id).unwrap_or(1);
    let second_bus = net.buses.get(1).map(|b| b.id).unwrap_or(first_bus);
    let gen_rows = fill_gaps(net.generators.iter().map(|g| (g.id, g)));
    let _ = writeln!(s, "%% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin Pc1 Pc2 Qc1min Qc1max Qc2min Qc2max ramp_agc ramp_10 ramp_30 ramp_q apf");
    let _ = writeln!(s, "mpc.gen = [");
    for g in &gen_rows {
        match g {
            Some(g) => {
                let _ = writeln!(
                    s,
                    "\t{}\t0\t0\t0\t0\t1\t{}\t1\t{}\t{}\t0\t0\t0\t0\t0\t0\t0\t0\t{}\t0\t0;",
                    g.bus, net.base_mva, g.p_max, g.p_min, g.ramp_dev
                );
            }
            None => {
                let _ = writeln!(s, "\t{first_bus}\t0\t0\t0\t0\t1\t{}\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0\t0;", net.base_mva);
            }
        }
    }
    let _ = writeln!(s, "];");

    let br_rows = fill_gaps(net.branches.iter().map(|l| (l.id, l)));
    let _ = writeln!(s, "%% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax");
    let _ = writeln!(s, "mpc.branch = [");
    for l in &br_rows {
        match l {
            Some(l) => {
                let _ = writeln!(
                    s,
                    "\t{}\t{}\t0\t{}\t0\t{}\t0\t0\t0\t0\t1\t-360\t360;",
                    l.from_bus, l.to_bus, l.reactance, l.flow_limit
                );
            }
            None => {
                let _ = writeln!(s, "\t{first_bus}\t{second_bus}\t0\t1\t0\t0\t0\t0\t0\t0\t0\t-360\t360;");
            }
        }
    }
    let _ = writeln!(s, "];");

    let _ = writeln!(s, "%% 2 startup shutdown n c1 c0");
    let _ = writeln!(s, "mpc.gencost = [");
    for g in &gen_rows {
        let (c1, c0) = g.map(|g| (g.cost_linear, g.cost_noload)).unwrap_or((0.0, 0.0));
        let _ = writeln!(s, "\t2\t0\t0\t2\t{c1}\t{c0};");
    }
    let _ = writeln!(s, "];");
    s
}

fn fill_gaps<'a, T>(items: impl Iterator<Item = (u32, &'a T)>) -> Vec<Option<&'a T>> {
    let mut by_id: BTreeMap<u32, &T> = BTreeMap::new();
    for (id, it) in items {
        by_id.insert(id, it);
    }
    let max = by_id.keys().next_back().copied().unwrap_or(0);
    (1..=max).map(|id| by_id.get(&id).copied()).collect()
}

/// One row of the branch-bus incidence matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct IncidenceRow {
    pub branch: u32,
    pub entries: [(BusId, f64); 2],
}

impl IncidenceRow {
    pub fn get(&self, bus: BusId) -> f64 {
        self.entries.iter().filter(|(b, _)| *b == bus).map(|(_, v)| v).sum()
    }
}

pub fn incidence(net: &Network) -> Vec<IncidenceRow> {
    net.branches
        .iter()
        .map(|l| IncidenceRow { branch: l.id, entries: [(l.from_bus, 1.0), (l.to_bus, -1.0)] })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum ComponentId {
    Generator(u32),
    Branch(u32),
}

impl ComponentId {
    pub fn kind(&self) -> &'static str {
        match self {
            ComponentId::Generator(_) => "generator",
            ComponentId::Branch(_) => "branch",
        }
    }

    pub fn id(&self) -> u32 {
        match *self {
            ComponentId::Generator(i) | ComponentId::Branch(i) => i,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeoLayout {
    pub bus_coords: BTreeMap<BusId, Point>,
    pub component_points: BTreeMap<ComponentId, Point>,
}

impl GeoLayout {
    pub fn point(&self, c: ComponentId) -> Option<Point> {
        self.component_points.get(&c).copied()
    }

    pub fn bus(&self, id: BusId) -> Option<Point> {
        self.bus_coords.get(&id).copied()
    }

    /// Builds derived generator and branch points from bus coordinates.
    pub fn from_bus_coords(net: &Network, bus_coords: BTreeMap<BusId, Point>) -> Result<GeoLayout, NetError> {
        for b in &net.buses {
            if !bus_coords.contains_key(&b.id) {
                return Err(NetError::MissingBus(b.id));
            }
        }
        let ids: BTreeSet<BusId> = net.buses.iter().map(|b| b.id).collect();
        if let Some(extra) = bus_coords.keys().find(|k| !ids.contains(k)) {
            return Err(NetError::UnknownBus(*extra));
        }
        let mut component_points = BTreeMap::new();
        for g in &net.generators {
            let p = *bus_coords.get(&g.bus).ok_or(NetError::MissingBus(g.bus))?;
            component_points.insert(ComponentId::Generator(g.id), p);
        }
        for l in &net.branches {
            let a = *bus_coords.get(&l.from_bus).ok_or(NetError::MissingBus(l.from_bus))?;
            let b = *bus_coords.get(&l.to_bus).ok_or(NetError::MissingBus(l.to_bus))?;
            component_points.insert(ComponentId::Branch(l.id), Point::new(0.5 * (a.x + b.x), 0.5 * (a.y + b.y)));
        }
        Ok(GeoLayout { bus_coords, component_points })
    }
}

pub fn load_geometry(text: &str, net: &Network) -> Result<GeoLayout, NetError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| NetError::Layout { line: 1, detail: e.to_string() })?;
    let expected = ["bus_id", "x_km", "y_km"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(NetError::Layout { line: 1, detail: "header must be bus_id,x_km,y_km".into() });
    }
    let mut coords = BTreeMap::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| NetError::Layout { line, detail: e.to_string() })?;
        let field = |i: usize, what: &str| -> Result<f64, NetError> {
            let raw = rec.get(i).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(NetError::Layout { line, detail: format!("non-numeric {what}: {raw:?}") }),
            }
        };
        let id_raw = rec.get(0).unwrap_or("");
        let id: BusId = id_raw
            .parse()
            .map_err(|_| NetError::Layout { line, detail: format!("bad bus id {id_raw:?}") })?;
        let p = Point::new(field(1, "x_km")?, field(2, "y_km")?);
        if coords.insert(id, p).is_some() {
            return Err(NetError::DuplicateBus(id));
        }
    }
    GeoLayout::from_bus_coords(net, coords)
}

pub fn write_geometry(layout: &GeoLayout) -> String {
    let mut s = String::from("bus_id,x_km,y_km\n");
    for (id, p) in &layout.bus_coords {
        let _ = writeln!(s, "{id},{},{}", p.x, p.y);
    }
    s
}
