//! Forecast storms to component states and contingency scenarios.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::net::{ComponentId, GeoLayout, Network, Point};
use crate::svm::SvmModel;
use crate::synth::{normalize_point, Label};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StormError {
    #[error("category {0} out of range 1..=5")]
    CategoryOutOfRange(i64),
    #[error("forecast {0:?} has no waypoints")]
    EmptyPath(String),
    #[error("forecast {0:?} has a non-finite waypoint")]
    NonFiniteWaypoint(String),
    #[error("component {0:?} has no point in the layout")]
    MissingComponent(ComponentId),
    #[error("model has no normalization bounds")]
    MissingBounds,
    #[error("no predictions to build scenarios from")]
    EmptyPredictions,
    #[error("window of {k} waypoints exceeds path {name:?} with {len} waypoints")]
    WindowTooLong { k: usize, len: usize, name: String },
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("scenario {label:?}: unknown {what} {id}")]
    UnknownComponent { label: String, what: &'static str, id: u32 },
    #[error("scenario {label:?}: {detail}")]
    InvalidScenario { label: String, detail: String },
    #[error("json: {0}")]
    Json(String),
}

/// Representative wind speed (mph) per Saffir-Simpson category.
pub const CATEGORY_WIND_MPH: [f64; 5] = [84.5, 103.0, 120.0, 143.0, 165.0];

pub fn category_to_wind(category: i64) -> Result<f64, StormError> {
    if (1..=5).contains(&category) {
        Ok(CATEGORY_WIND_MPH[category as usize - 1])
    } else {
        Err(StormError::CategoryOutOfRange(category))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StormForecast {
    pub name: String,
    pub category: i64,
    pub path: Vec<[f64; 2]>,
}

impl StormForecast {
    pub fn validate(&self) -> Result<(), StormError> {
        category_to_wind(self.category)?;
        if self.path.is_empty() {
            return Err(StormError::EmptyPath(self.name.clone()));
        }
        if self.path.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StormError::NonFiniteWaypoint(self.name.clone()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<StormForecast, StormError> {
        let f: StormForecast = serde_json::from_str(text).map_err(|e| StormError::Json(e.to_string()))?;
        f.validate()?;
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forecast serializes")
    }
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let proj = (p.x - a.x) * dx + (p.y - a.y) * dy;
    if proj <= 0.0 {
        return p.dist(a);
    }
    if proj >= len2 {
        return p.dist(b);
    }
    (dx * (p.y - a.y) - dy * (p.x - a.x)).abs() / len2.sqrt()
}

/// Minimum distance from `p` to the polyline through `path`.
pub fn polyline_distance(p: Point, path: &[[f64; 2]]) -> f64 {
    match path {
        [] => f64::INFINITY,
        [only] => p.dist(Point::new(only[0], only[1])),
        _ => path
            .windows(2)
            .map(|w| point_segment_distance(p, Point::new(w[0][0], w[0][1]), Point::new(w[1][0], w[1][1])))
            .fold(f64::INFINITY, f64::min),
    }
}

pub fn component_distance(geo: &GeoLayout, component: ComponentId, path: &[[f64; 2]]) -> Result<f64, StormError> {
    let p = geo.point(component).ok_or(StormError::MissingComponent(component))?;
    Ok(polyline_distance(p, path))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentState {
    pub component: ComponentId,
    pub predicted: Label,
    pub decision_value: f64,
    pub distance_km: f64,
    pub wind_mph: f64,
}

pub fn components(net: &Network) -> Vec<ComponentId> {
    net.generators
        .iter()
        .map(|g| ComponentId::Generator(g.id))
        .chain(net.branches.iter().map(|l| ComponentId::Branch(l.id)))
        .collect()
}

/// Classifies every generator and branch for a storm of `category` whose
/// center follows `path`.
pub fn predict_on_path(
    model: &SvmModel,
    net: &Network,
    geo: &GeoLayout,
    category: i64,
    path: &[[f64; 2]],
) -> Result<Vec<ComponentState>, StormError> {
    let wind = category_to_wind(category)?;
    let bounds = model.bounds.ok_or(StormError::MissingBounds)?;
    components(net)
        .par_iter()
        .map(|&c| {
            let d = component_distance(geo, c, path)?;
            let v = model.decision_value(normalize_point([wind, d], bounds));
            Ok(ComponentState {
                component: c,
                predicted: crate::svm::label_of(v),
                decision_value: v,
                distance_km: d,
                wind_mph: wind,
            })
        })
        .collect()
}

pub fn predict_states(
    model: &SvmModel,
    net: &Network,
    geo: &GeoLayout,
    forecast: &StormForecast,
) -> Result<Vec<ComponentState>, StormError> {
    forecast.validate()?;
    predict_on_path(model, net, geo, forecast.category, &forecast.path)
}

pub fn outage_count(states: &[ComponentState]) -> usize {
    states.iter().filter(|s| s.predicted == Label::Outage).count()
}

pub fn write_states_csv(states: &[ComponentState]) -> String {
    let mut s = String::from("component_id,kind,distance_km,wind_mph,decision_value,predicted\n");
    for st in states {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            st.component.id(),
            st.component.kind(),
            st.distance_km,
            st.wind_mph,
            st.decision_value,
            st.predicted.name()
        );
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioPolicy {
    PerPath,
    Windowed { k: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// 1 / number of contingency scenarios.
    #[default]
    Uniform,
    /// Weight 1 on every contingency scenario.
    Unweighted,
}

/// Predicted states for one stretch of storm track.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionWindow {
    pub label: String,
    pub states: Vec<ComponentState>,
}

/// Runs the classifier over each forecast (per-path) or over each run of
/// `k` consecutive waypoints (windowed).
pub fn prediction_windows(
    model: &SvmModel,
    net: &Network,
    geo: &GeoLayout,
    forecasts: &[StormForecast],
    policy: ScenarioPolicy,
) -> Result<Vec<PredictionWindow>, StormError> {
    let mut out = Vec::new();
    for f in forecasts {
        f.validate()?;
        match policy {
            ScenarioPolicy::PerPath => {
                out.push(PredictionWindow { label: f.name.clone(), states: predict_states(model, net, geo, f)? });
            }
            ScenarioPolicy::Windowed { k } => {
                if k == 0 {
                    return Err(StormError::ZeroWindow);
                }
                if k > f.path.len() {
                    return Err(StormError::WindowTooLong { k, len: f.path.len(), name: f.name.clone() });
                }
                for start in 0..=f.path.len() - k {
                    let states = predict_on_path(model, net, geo, f.category, &f.path[start..start + k])?;
                    out.push(PredictionWindow { label: format!("{}[{}..{}]", f.name, start, start + k), states });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub weight: f64,
    pub out_generators: BTreeSet<u32>,
    pub out_branches: BTreeSet<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub weighting: Weighting,
    /// Index 0 is the intact base case.
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn base_only() -> Self {
        ScenarioSet { weighting: Weighting::Uniform, scenarios: vec![base_scenario()] }
    }

    /// Base case plus the given contingencies, weighted by `weighting`.
    pub fn from_contingencies(contingencies: Vec<(String, BTreeSet<u32>, BTreeSet<u32>)>, weighting: Weighting) -> Self {
        let mut scenarios = vec![base_scenario()];
        for (label, g, l) in contingencies {
            scenarios.push(Scenario { label, weight: 1.0, out_generators: g, out_branches: l });
        }
        ScenarioSet { weighting: Weighting::Uniform, scenarios }.with_weighting(weighting)
    }

    pub fn contingency_count(&self) -> usize {
        self.scenarios.len().saturating_sub(1)
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        let n = self.contingency_count();
        let w = match weighting {
            Weighting::Uniform if n > 0 => 1.0 / n as f64,
            _ => 1.0,
        };
        for s in self.scenarios.iter_mut().skip(1) {
            s.weight = w;
        }
        self.weighting = weighting;
        self
    }

    pub fn validate(&self, net: &Network) -> Result<(), StormError> {
        let Some(base) = self.scenarios.first() else {
            return Err(StormError::InvalidScenario { label: String::new(), detail: "missing base scenario".into() });
        };
        if !base.out_generators.is_empty() || !base.out_branches.is_empty() {
            return Err(StormError::InvalidScenario {
                label: base.label.clone(),
                detail: "base scenario must have no outages".into(),
            });
        }
        let gens: BTreeSet<u32> = net.generators.iter().map(|g| g.id).collect();
        let brs: BTreeSet<u32> = net.branches.iter().map(|l| l.id).collect();
        for s in &self.scenarios {
            if s.weight <= 0.0 || !s.weight.is_finite() {
                return Err(StormError::InvalidScenario {
                    label: s.label.clone(),
                    detail: format!("weight must be positive, got {}", s.weight),
                });
            }
            if let Some(&id) = s.out_generators.iter().find(|i| !gens.contains(i)) {
                return Err(StormError::UnknownComponent { label: s.label.clone(), what: "generator", id });
            }
            if let Some(&id) = s.out_branches.iter().find(|i| !brs.contains(i)) {
                return Err(StormError::UnknownComponent { label: s.label.clone(), what: "branch", id });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenarios serialize")
    }

    pub fn from_json(text: &str) -> Result<ScenarioSet, StormError> {
        serde_json::from_str(text).map_err(|e| StormError::Json(e.to_string()))
    }
}

fn base_scenario() -> Scenario {
    Scenario { label: "base".into(), weight: 1.0, out_generators: BTreeSet::new(), out_branches: BTreeSet::new() }
}

/// One contingency per window holding every component predicted out in it.
pub fn build_scenarios(windows: &[PredictionWindow], weighting: Weighting) -> Result<ScenarioSet, StormError> {
    if windows.is_empty() {
        return Err(StormError::EmptyPredictions);
    }
    let contingencies = windows
        .iter()
        .map(|w| {
            let mut g = BTreeSet::new();
            let mut l = BTreeSet::new();
            for s in w.states.iter().filter(|s| s.predicted == Label::Outage) {
                match s.component {
                    ComponentId::Generator(i) => g.insert(i),
                    ComponentId::Branch(i) => l.insert(i),
                };
            }
            (w.label.clone(), g, l)
        })
        .collect();
    Ok(ScenarioSet::from_contingencies(contingencies, weighting))
}
