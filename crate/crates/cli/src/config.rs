use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stormgrid_core::hardening::default_profile;
use stormgrid_core::synth::DEFAULT_BOUNDS;
use stormgrid_core::{Budget, EconParams, SampleSpec, ScenarioPolicy, TrainParams, Weighting};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub svm: SvmConfig,
    pub grid: GridConfig,
    pub econ: EconConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            data: DataConfig::default(),
            svm: SvmConfig::default(),
            grid: GridConfig::default(),
            econ: EconConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_per_class: usize,
    /// (wind mph, distance km)
    pub mean_operational: [f64; 2],
    pub mean_outage: [f64; 2],
    pub std_dev: [f64; 2],
    /// Defaults to 2% of each bound.
    pub noise_std: Option<[f64; 2]>,
    pub bounds: [f64; 2],
    pub test_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = SampleSpec::default();
        DataConfig {
            n_per_class: s.n_per_class,
            mean_operational: s.mean_operational,
            mean_outage: s.mean_outage,
            std_dev: s.std_dev,
            noise_std: None,
            bounds: DEFAULT_BOUNDS,
            test_fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    /// Fixed penalty; skips the grid search when set.
    pub c: Option<f64>,
    pub c_grid: Vec<f64>,
    pub kkt_tolerance: f64,
    pub max_passes: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        let p = TrainParams::default();
        SvmConfig {
            c: None,
            c_grid: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            kkt_tolerance: p.kkt_tolerance,
            max_passes: p.max_passes,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyName {
    PerPath,
    Windowed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub case: PathBuf,
    pub geometry: PathBuf,
    pub forecasts: Vec<PathBuf>,
    pub policy: PolicyName,
    /// Waypoints per window for the windowed policy.
    pub window: usize,
    pub unweighted: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            case: PathBuf::from("data/case118.m"),
            geometry: PathBuf::from("data/case118_layout.csv"),
            forecasts: (1..=3).map(|k| PathBuf::from(format!("data/forecasts/path{k}.json"))).collect(),
            policy: PolicyName::PerPath,
            window: 2,
            unweighted: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconConfig {
    pub voll: f64,
    pub dg_invest_cost: f64,
    pub budget: Budget,
    pub hours: usize,
    /// Overrides the built-in daily profile; its length sets the horizon.
    pub load_multipliers: Option<Vec<f64>>,
    /// Buses allowed to host DG; all load buses when absent.
    pub dg_candidates: Option<Vec<u32>>,
    pub price_scenario_dispatch: bool,
    pub budgets: Vec<Budget>,
}

impl Default for EconConfig {
    fn default() -> Self {
        let e = EconParams::default();
        EconConfig {
            voll: e.voll,
            dg_invest_cost: e.dg_invest_cost,
            budget: e.budget,
            hours: e.horizon(),
            load_multipliers: None,
            dg_candidates: None,
            price_scenario_dispatch: false,
            budgets: vec![
                Budget::Limited(0.0),
                Budget::Limited(1e6),
                Budget::Limited(1e7),
                Budget::Limited(1e8),
                Budget::Unlimited,
            ],
        }
    }
}

impl RunConfig {
    /// Reads TOML or JSON (by extension). Relative input paths are taken
    /// from the config file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut cfg: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut cfg.grid.case);
        rebase(&mut cfg.grid.geometry);
        cfg.grid.forecasts.iter_mut().for_each(rebase);
        Ok(cfg)
    }

    pub fn sample_spec(&self) -> SampleSpec {
        let d = &self.data;
        SampleSpec {
            n_per_class: d.n_per_class,
            mean_operational: d.mean_operational,
            mean_outage: d.mean_outage,
            std_dev: d.std_dev,
            noise_std: d.noise_std.unwrap_or([0.02 * d.bounds[0], 0.02 * d.bounds[1]]),
            seed: self.seed,
        }
    }

    pub fn train_params(&self, c: f64) -> TrainParams {
        TrainParams { c, kkt_tolerance: self.svm.kkt_tolerance, max_passes: self.svm.max_passes, seed: self.seed }
    }

    pub fn policy(&self) -> ScenarioPolicy {
        match self.grid.policy {
            PolicyName::PerPath => ScenarioPolicy::PerPath,
            PolicyName::Windowed => ScenarioPolicy::Windowed { k: self.grid.window },
        }
    }

    pub fn weighting(&self) -> Weighting {
        if self.grid.unweighted {
            Weighting::Unweighted
        } else {
            Weighting::Uniform
        }
    }

    pub fn econ_params(&self) -> Result<EconParams, CliError> {
        let e = &self.econ;
        let load_multipliers = match &e.load_multipliers {
            Some(m) => m.clone(),
            None if e.hours == 0 => return Err(CliError::Input("hours must be at least 1".into())),
            None => default_profile(e.hours),
        };
        Ok(EconParams {
            voll: e.voll,
            dg_invest_cost: e.dg_invest_cost,
            budget: e.budget,
            load_multipliers,
            dg_candidates: e.dg_candidates.clone(),
            price_scenario_dispatch: e.price_scenario_dispatch,
            ..EconParams::default()
        })
    }
}
