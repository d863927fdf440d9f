//! Storm outage prediction and distributed-generation hardening planning.
//!
//! The pipeline has three steps:
//! 1. [`synth`] draws labeled (wind, distance) samples and [`svm`] fits a
//!    linear soft-margin classifier to them.
//! 2. [`storm`] classifies every generator and branch of a [`net::Network`]
//!    for a forecast path and turns the predicted outages into scenarios.
//! 3. [`hardening`] solves a scenario DC power-flow LP choosing DG capacity
//!    per bus against load curtailment.

pub mod hardening;
pub mod net;
pub mod storm;
pub mod svm;
pub mod synth;

pub use hardening::{
    budget_sweep, build_model, evaluate_plan, solve_hardening, Budget, Commitment, EconParams, HardeningError,
    HardeningModel, HardeningPlan, SweepRow, VarLayout,
};
pub use net::{incidence, load_geometry, parse_matpower, ComponentId, GeoLayout, NetError, Network, Point};
pub use storm::{
    build_scenarios, category_to_wind, component_distance, predict_states, prediction_windows, ComponentState,
    ScenarioPolicy, ScenarioSet, StormError, StormForecast, Weighting,
};
pub use svm::{evaluate, select_penalty, train, ConfusionMatrix, SvmError, SvmModel, TrainParams};
pub use synth::{generate_samples, normalize, split, Label, LabeledDataset, SampleSpec};
