//! File-based pipeline: gen-data, train, predict, plan, sweep.
//!
//! Every step reads its inputs from disk and writes its outputs plus a
//! `<step>.meta.json` sidecar into the output directory, so steps can be
//! rerun independently.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use stormgrid_core::storm::{outage_count, write_states_csv};
use stormgrid_core::synth::{read_dataset_csv, write_dataset_csv, DatasetMeta};
use stormgrid_core::{
    budget_sweep, build_scenarios, evaluate, generate_samples, load_geometry, normalize, parse_matpower,
    predict_states, select_penalty, solve_hardening, split, train, Budget, Commitment, HardeningError,
    HardeningPlan, Network, ScenarioSet, StormForecast, SvmModel,
};

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

fn input<E: std::fmt::Display>(ctx: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{ctx}: {e}"))
}

impl From<HardeningError> for CliError {
    fn from(e: HardeningError) -> Self {
        match e {
            HardeningError::Net(_) | HardeningError::Storm(_) | HardeningError::Invalid(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Internal(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "stormgrid", version, about = "Hurricane outage prediction and DG hardening planning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Draw the labeled storm dataset.
    GenData,
    /// Fit the outage classifier and report its confusion matrix.
    Train,
    /// Classify grid components along each forecast and build scenarios.
    Predict,
    /// Solve the hardening model for one budget.
    Plan,
    /// Solve the hardening model across a budget list.
    Sweep,
    /// gen-data, train, predict and plan in sequence.
    RunAll,
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n_per_class: Option<usize>,
    #[arg(long, global = true)]
    pub test_fraction: Option<f64>,
    /// Fixed SVM penalty (skips the grid search).
    #[arg(long, global = true)]
    pub c: Option<f64>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub c_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub case: Option<PathBuf>,
    #[arg(long, global = true)]
    pub geometry: Option<PathBuf>,
    /// Forecast JSON; repeat for several paths.
    #[arg(long = "forecast", global = true)]
    pub forecasts: Vec<PathBuf>,
    /// per-path or windowed
    #[arg(long, global = true)]
    pub policy: Option<String>,
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Weight 1 on every contingency scenario instead of 1/count.
    #[arg(long, global = true)]
    pub unweighted: bool,
    #[arg(long, global = true)]
    pub voll: Option<f64>,
    #[arg(long, global = true)]
    pub dg_invest_cost: Option<f64>,
    /// Amount or "unlimited".
    #[arg(long, global = true)]
    pub budget: Option<Budget>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub budgets: Option<Vec<Budget>>,
    #[arg(long, global = true)]
    pub hours: Option<usize>,
    /// Comma-separated bus ids, "all" (load buses) or "none".
    #[arg(long, global = true)]
    pub dg_candidates: Option<String>,
    #[arg(long, global = true)]
    pub price_scenario_dispatch: bool,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(self.seed => cfg.seed);
        set!(self.out_dir => cfg.out_dir);
        set!(self.n_per_class => cfg.data.n_per_class);
        set!(self.test_fraction => cfg.data.test_fraction);
        if self.c.is_some() {
            cfg.svm.c = self.c;
        }
        set!(self.c_grid => cfg.svm.c_grid);
        set!(self.case => cfg.grid.case);
        set!(self.geometry => cfg.grid.geometry);
        if !self.forecasts.is_empty() {
            cfg.grid.forecasts = self.forecasts.clone();
        }
        if let Some(p) = &self.policy {
            cfg.grid.policy = match p.as_str() {
                "per-path" => config::PolicyName::PerPath,
                "windowed" => config::PolicyName::Windowed,
                _ => return Err(CliError::Input(format!("unknown policy {p:?}; expected per-path or windowed"))),
            };
        }
        set!(self.window => cfg.grid.window);
        cfg.grid.unweighted |= self.unweighted;
        set!(self.voll => cfg.econ.voll);
        set!(self.dg_invest_cost => cfg.econ.dg_invest_cost);
        set!(self.budget => cfg.econ.budget);
        set!(self.budgets => cfg.econ.budgets);
        if let Some(h) = self.hours {
            cfg.econ.hours = h;
            cfg.econ.load_multipliers = None;
        }
        if let Some(list) = &self.dg_candidates {
            cfg.econ.dg_candidates = match list.trim() {
                "all" => None,
                "none" | "" => Some(Vec::new()),
                s => Some(
                    s.split(',')
                        .map(|t| t.trim().parse::<u32>())
                        .collect::<Result<_, _>>()
                        .map_err(input("--dg-candidates"))?,
                ),
            };
        }
        cfg.econ.price_scenario_dispatch |= self.price_scenario_dispatch;
        Ok(cfg)
    }
}

/// Sidecar written next to each step's outputs. Holds no timestamps so
/// reruns are byte-identical.
#[derive(Serialize)]
struct StepMeta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    inputs: Vec<String>,
    outputs: Vec<String>,
    details: serde_json::Value,
}

struct Step<'a> {
    cfg: &'a RunConfig,
    command: &'a str,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl<'a> Step<'a> {
    fn new(cfg: &'a RunConfig, command: &'a str) -> Self {
        Step { cfg, command, inputs: Vec::new(), outputs: Vec::new() }
    }

    fn read(&mut self, path: &Path) -> Result<String, CliError> {
        self.inputs.push(path.display().to_string());
        fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let dir = &self.cfg.out_dir;
        fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("output dir {}: {e}", dir.display())))?;
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self, details: serde_json::Value) -> Result<(), CliError> {
        let meta = StepMeta {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            seed: self.cfg.seed,
            inputs: std::mem::take(&mut self.inputs),
            outputs: std::mem::take(&mut self.outputs),
            details,
        };
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        self.write(&format!("{}.meta.json", self.command), &text)
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    match command {
        Command::GenData => cmd_gen_data(cfg),
        Command::Train => cmd_train(cfg),
        Command::Predict => cmd_predict(cfg),
        Command::Plan => cmd_plan(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::RunAll => {
            cmd_gen_data(cfg)?;
            cmd_train(cfg)?;
            cmd_predict(cfg)?;
            cmd_plan(cfg)
        }
    }
}

pub fn cmd_gen_data(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = cfg.sample_spec();
    let raw = generate_samples(&spec).map_err(input("sample spec"))?;
    let data = normalize(&raw, cfg.data.bounds).map_err(input("normalize"))?;
    let mut step = Step::new(cfg, "gen-data");
    step.write("dataset.csv", &write_dataset_csv(&data))?;
    let meta = DatasetMeta::new(&spec, cfg.data.bounds, data.len());
    step.write("dataset.meta.json", &serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
    println!("wrote {} samples to {}", data.len(), cfg.out_dir.join("dataset.csv").display());
    step.finish(json!({ "samples": data.len() }))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let mut step = Step::new(cfg, "train");
    let text = step.read(&cfg.out_dir.join("dataset.csv"))?;
    let data = read_dataset_csv(&text, Some(cfg.data.bounds)).map_err(input("dataset.csv"))?;
    let (train_set, test_set) = split(&data, cfg.data.test_fraction, cfg.seed).map_err(input("split"))?;

    let (model, per_c) = match cfg.svm.c {
        Some(c) => (train(&train_set, &cfg.train_params(c)).map_err(input("train"))?, Vec::new()),
        None => {
            let sel = select_penalty(&train_set, &test_set, &cfg.svm.c_grid, &cfg.train_params(1.0))
                .map_err(input("train"))?;
            (sel.model, sel.per_c)
        }
    };
    if !model.training.converged {
        log::warn!("training stopped after {} passes without meeting the KKT tolerance", model.training.iterations);
    }
    let cm = evaluate(&model, &test_set).map_err(input("evaluate"))?;

    let mut report = cm.report();
    report.push('\n');
    for r in &per_c {
        match r.accuracy {
            Some(a) => report.push_str(&format!("c = {:<8} accuracy {:.2}%\n", r.c, 100.0 * a)),
            None => report.push_str(&format!("c = {:<8} failed: {}\n", r.c, r.error.as_deref().unwrap_or(""))),
        }
    }
    report.push_str(&format!("selected c = {}\n", model.c));
    print!("{report}");

    step.write("model.json", &model.to_json())?;
    step.write("confusion.txt", &report)?;
    step.finish(json!({
        "c": model.c,
        "train_samples": train_set.len(),
        "test_samples": test_set.len(),
        "confusion": cm,
        "accuracy": cm.accuracy(),
        "penalty_grid": per_c,
        "converged": model.training.converged,
    }))
}

fn load_network(step: &mut Step, path: &Path) -> Result<Network, CliError> {
    let text = step.read(path)?;
    parse_matpower(&text).map_err(input(&path.display().to_string()))
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<(), CliError> {
    let mut step = Step::new(cfg, "predict");
    let model_text = step.read(&cfg.out_dir.join("model.json"))?;
    let model = SvmModel::from_json(&model_text).map_err(input("model.json"))?;
    let net = load_network(&mut step, &cfg.grid.case)?;
    let geo_text = step.read(&cfg.grid.geometry)?;
    let geo = load_geometry(&geo_text, &net).map_err(input("geometry"))?;
    if cfg.grid.forecasts.is_empty() {
        return Err(CliError::Input("no forecasts given".into()));
    }
    let mut forecasts = Vec::new();
    for p in &cfg.grid.forecasts {
        let text = step.read(p)?;
        forecasts.push(StormForecast::from_json(&text).map_err(input(&p.display().to_string()))?);
    }

    let mut counts = Vec::new();
    for f in &forecasts {
        let states = predict_states(&model, &net, &geo, f).map_err(input(&f.name))?;
        step.write(&format!("states_{}.csv", f.name), &write_states_csv(&states))?;
        println!("{}: {} of {} components predicted out", f.name, outage_count(&states), states.len());
        counts.push(json!({ "forecast": f.name, "outages": outage_count(&states) }));
    }
    let windows = stormgrid_core::prediction_windows(&model, &net, &geo, &forecasts, cfg.policy())
        .map_err(input("predict"))?;
    let scenarios = build_scenarios(&windows, cfg.weighting()).map_err(input("scenarios"))?;
    step.write("scenarios.json", &scenarios.to_json())?;
    println!("{} contingency scenarios", scenarios.contingency_count());
    step.finish(json!({
        "policy": cfg.policy(),
        "weighting": cfg.weighting(),
        "per_forecast": counts,
        "contingencies": scenarios.contingency_count(),
    }))
}

fn load_study(step: &mut Step, cfg: &RunConfig) -> Result<(Network, ScenarioSet), CliError> {
    let net = load_network(step, &cfg.grid.case)?;
    let text = step.read(&cfg.out_dir.join("scenarios.json"))?;
    let scenarios = ScenarioSet::from_json(&text).map_err(input("scenarios.json"))?;
    Ok((net, scenarios))
}

/// Money in whole currency units.
fn round_money(mut plan: HardeningPlan) -> HardeningPlan {
    for v in [
        &mut plan.invest_cost,
        &mut plan.base_operation_cost,
        &mut plan.scenario_operation_cost,
        &mut plan.unserved_energy_cost,
        &mut plan.average_unserved_cost,
        &mut plan.objective,
        &mut plan.annual_base_operation_cost,
        &mut plan.annual_average_unserved_cost,
    ] {
        *v = v.round();
    }
    for s in &mut plan.scenarios {
        s.unserved_cost = s.unserved_cost.round();
    }
    plan
}

pub fn cmd_plan(cfg: &RunConfig) -> Result<(), CliError> {
    let mut step = Step::new(cfg, "plan");
    let (net, scenarios) = load_study(&mut step, cfg)?;
    let econ = cfg.econ_params()?;
    let commitment = Commitment::all_on(net.generators.len(), econ.horizon());
    let plan = solve_hardening(&net, &scenarios, &econ, &commitment)?;
    println!(
        "budget {}: DG at {} buses, invest {:.0}, curtailment {:.3} MWh, average unserved cost {:.0}",
        plan.budget,
        plan.dg_capacity.len(),
        plan.invest_cost,
        plan.total_curtailment_mwh,
        plan.average_unserved_cost
    );
    step.write("plan.json", &round_money(plan).to_json())?;
    step.finish(json!({ "econ": econ }))
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let mut step = Step::new(cfg, "sweep");
    let (net, scenarios) = load_study(&mut step, cfg)?;
    let econ = cfg.econ_params()?;
    let rows = budget_sweep(&net, &scenarios, &econ, &cfg.econ.budgets)?;
    let csv = stormgrid_core::hardening::write_sweep_csv(&rows, scenarios.contingency_count());
    print!("{csv}");
    step.write("sweep.csv", &csv)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    step.finish(json!({ "econ": econ, "budgets": cfg.econ.budgets, "failed_rows": failed }))?;
    if failed > 0 {
        return Err(CliError::Internal(format!("{failed} budget rows failed to solve")));
    }
    Ok(())
}
