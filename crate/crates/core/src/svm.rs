//! Linear soft-margin SVM trained in the dual by sequential minimal
//! optimization with maximal-violating-pair selection.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::synth::{Label, LabeledDataset};

pub const MODEL_SCHEMA: &str = "stormgrid.svm-model/1";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SvmError {
    #[error("training set is empty")]
    Empty,
    #[error("training set has a single class ({0})")]
    SingleClass(&'static str),
    #[error("non-finite feature at sample {0}")]
    NonFinite(usize),
    #[error("penalty must be positive and finite, got {0}")]
    InvalidPenalty(f64),
    #[error("penalty grid is empty")]
    EmptyGrid,
    #[error("every penalty value failed: {0}")]
    AllFailed(String),
    #[error("model: {0}")]
    Model(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub c: f64,
    pub kkt_tolerance: f64,
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { c: 1.0, kkt_tolerance: 1e-3, max_passes: 200, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub kkt_tolerance: f64,
    pub max_passes: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    /// Final maximal pair violation m - M.
    pub max_violation: f64,
    pub dual_objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub schema: String,
    pub w: [f64; 2],
    pub g: f64,
    pub c: f64,
    pub support_vector_indices: Vec<usize>,
    /// Aligned with `support_vector_indices`; every other sample has alpha 0.
    pub dual_coefficients: Vec<f64>,
    /// Raw-unit bounds used to normalize features, when known.
    pub bounds: Option<[f64; 2]>,
    pub training: TrainingMeta,
}

impl SvmModel {
    /// A fixed hyperplane with no training history.
    pub fn from_hyperplane(w: [f64; 2], g: f64) -> Self {
        SvmModel {
            schema: MODEL_SCHEMA.into(),
            w,
            g,
            c: 0.0,
            support_vector_indices: vec![],
            dual_coefficients: vec![],
            bounds: None,
            training: TrainingMeta {
                kkt_tolerance: 0.0,
                max_passes: 0,
                seed: 0,
                iterations: 0,
                converged: true,
                max_violation: 0.0,
                dual_objective: 0.0,
            },
        }
    }

    pub fn decision_value(&self, x: [f64; 2]) -> f64 {
        self.w[0] * x[0] + self.w[1] * x[1] + self.g
    }

    pub fn predict(&self, x: [f64; 2]) -> Label {
        label_of(self.decision_value(x))
    }

    /// Dense alpha vector over the training set of size `n`.
    pub fn alphas(&self, n: usize) -> Vec<f64> {
        let mut a = vec![0.0; n];
        for (&i, &v) in self.support_vector_indices.iter().zip(&self.dual_coefficients) {
            a[i] = v;
        }
        a
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<SvmModel, SvmError> {
        let m: SvmModel = serde_json::from_str(text).map_err(|e| SvmError::Model(e.to_string()))?;
        if m.schema != MODEL_SCHEMA {
            return Err(SvmError::Model(format!("unsupported schema {:?}", m.schema)));
        }
        if m.w.iter().chain([&m.g]).any(|v| !v.is_finite()) {
            return Err(SvmError::Model("non-finite hyperplane".into()));
        }
        Ok(m)
    }
}

/// sgn with sgn(0) = +1 (outage).
pub fn label_of(value: f64) -> Label {
    if value >= 0.0 {
        Label::Outage
    } else {
        Label::Operational
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn check_input(data: &LabeledDataset) -> Result<(), SvmError> {
    if data.is_empty() {
        return Err(SvmError::Empty);
    }
    if let Some(i) = data.features.iter().position(|x| !x[0].is_finite() || !x[1].is_finite()) {
        return Err(SvmError::NonFinite(i));
    }
    let pos = data.count(Label::Outage);
    if pos == 0 {
        return Err(SvmError::SingleClass(Label::Operational.name()));
    }
    if pos == data.len() {
        return Err(SvmError::SingleClass(Label::Outage.name()));
    }
    Ok(())
}

pub fn train(data: &LabeledDataset, params: &TrainParams) -> Result<SvmModel, SvmError> {
    check_input(data)?;
    let c = params.c;
    if c <= 0.0 || !c.is_finite() {
        return Err(SvmError::InvalidPenalty(c));
    }
    let n = data.len();
    let x = &data.features;
    let y: Vec<f64> = data.labels.iter().map(|l| l.sign()).collect();
    let mut alpha = vec![0.0; n];
    let mut w = [0.0; 2];

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));

    let tol = params.kkt_tolerance;
    let budget = params.max_passes.saturating_mul(n).max(1);
    let mut iterations = 0;
    let mut violation;
    loop {
        let (pair, gap) = select_pair(&order, x, &y, &alpha, w, c);
        violation = gap;
        let Some((i, j)) = pair else { break };
        if gap <= tol || iterations >= budget {
            break;
        }
        take_step(i, j, x, &y, &mut alpha, &mut w, c);
        iterations += 1;
        if iterations % n == 0 {
            w = rebuild_w(x, &y, &alpha);
        }
    }
    w = rebuild_w(x, &y, &alpha);
    let (_, gap) = select_pair(&order, x, &y, &alpha, w, c);
    violation = violation.max(gap);
    let converged = violation <= tol;
    if !converged {
        log::warn!("svm training stopped after {iterations} iterations with violation {violation:.3e} (c = {c})");
    }

    let g = bias(x, &y, &alpha, w, c);
    let mut support_vector_indices = Vec::new();
    let mut dual_coefficients = Vec::new();
    for (i, &a) in alpha.iter().enumerate() {
        if a > 0.0 {
            support_vector_indices.push(i);
            dual_coefficients.push(a);
        }
    }
    let dual_objective = alpha.iter().sum::<f64>() - 0.5 * dot(w, w);
    Ok(SvmModel {
        schema: MODEL_SCHEMA.into(),
        w,
        g,
        c,
        support_vector_indices,
        dual_coefficients,
        bounds: data.normalization_bounds,
        training: TrainingMeta {
            kkt_tolerance: tol,
            max_passes: params.max_passes,
            seed: params.seed,
            iterations,
            converged,
            max_violation: violation,
            dual_objective,
        },
    })
}

fn in_up(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(y: f64, a: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Returns the maximal violating pair and m - M. Ties go to the earliest
/// index in `order`.
fn select_pair(order: &[usize], x: &[[f64; 2]], y: &[f64], alpha: &[f64], w: [f64; 2], c: f64) -> (Option<(usize, usize)>, f64) {
    let mut best_up: Option<(usize, f64)> = None;
    let mut best_low: Option<(usize, f64)> = None;
    for &k in order {
        // -y G = y - w.x
        let v = y[k] - dot(w, x[k]);
        if in_up(y[k], alpha[k], c) && best_up.is_none_or(|(_, b)| v > b) {
            best_up = Some((k, v));
        }
        if in_low(y[k], alpha[k], c) && best_low.is_none_or(|(_, b)| v < b) {
            best_low = Some((k, v));
        }
    }
    match (best_up, best_low) {
        (Some((i, m)), Some((j, mm))) => (Some((i, j)), m - mm),
        _ => (None, f64::NEG_INFINITY),
    }
}

fn take_step(i: usize, j: usize, x: &[[f64; 2]], y: &[f64], alpha: &mut [f64], w: &mut [f64; 2], c: f64) {
    let (a1, a2) = (alpha[i], alpha[j]);
    let (y1, y2) = (y[i], y[j]);
    let (lo, hi) = if y1 != y2 {
        ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
    } else {
        ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
    };
    let d = [x[i][0] - x[j][0], x[i][1] - x[j][1]];
    let eta = dot(d, d).max(1e-12);
    let e1 = dot(*w, x[i]) - y1;
    let e2 = dot(*w, x[j]) - y2;
    let mut a2_new = (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi);
    let snap = 1e-12 * c;
    if a2_new < snap {
        a2_new = 0.0;
    } else if a2_new > c - snap {
        a2_new = c;
    }
    let s = y1 * y2;
    let mut a1_new = a1 + s * (a2 - a2_new);
    if a1_new < snap {
        a1_new = 0.0;
    } else if a1_new > c - snap {
        a1_new = c;
    }
    let (d1, d2) = ((a1_new - a1) * y1, (a2_new - a2) * y2);
    w[0] += d1 * x[i][0] + d2 * x[j][0];
    w[1] += d1 * x[i][1] + d2 * x[j][1];
    alpha[i] = a1_new;
    alpha[j] = a2_new;
}

fn rebuild_w(x: &[[f64; 2]], y: &[f64], alpha: &[f64]) -> [f64; 2] {
    let mut w = [0.0; 2];
    for k in 0..x.len() {
        if alpha[k] != 0.0 {
            w[0] += alpha[k] * y[k] * x[k][0];
            w[1] += alpha[k] * y[k] * x[k][1];
        }
    }
    w
}

fn bias(x: &[[f64; 2]], y: &[f64], alpha: &[f64], w: [f64; 2], c: f64) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..x.len() {
        if alpha[k] > 0.0 && alpha[k] < c {
            sum += y[k] - dot(w, x[k]);
            count += 1;
        }
    }
    if count > 0 {
        return sum / count as f64;
    }
    let mut m = f64::NEG_INFINITY;
    let mut mm = f64::INFINITY;
    for k in 0..x.len() {
        let v = y[k] - dot(w, x[k]);
        if in_up(y[k], alpha[k], c) {
            m = m.max(v);
        }
        if in_low(y[k], alpha[k], c) {
            mm = mm.min(v);
        }
    }
    match (m.is_finite(), mm.is_finite()) {
        (true, true) => 0.5 * (m + mm),
        (true, false) => m,
        (false, true) => mm,
        (false, false) => 0.0,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyResult {
    pub c: f64,
    pub accuracy: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct PenaltySelection {
    pub best_c: f64,
    pub per_c: Vec<PenaltyResult>,
    pub model: SvmModel,
}

/// Trains one model per grid value and keeps the one with the best
/// validation accuracy, preferring the smaller penalty on ties.
pub fn select_penalty(
    train_set: &LabeledDataset,
    validation: &LabeledDataset,
    grid: &[f64],
    params: &TrainParams,
) -> Result<PenaltySelection, SvmError> {
    if grid.is_empty() {
        return Err(SvmError::EmptyGrid);
    }
    let fits: Vec<Result<(SvmModel, f64), SvmError>> = grid
        .par_iter()
        .map(|&c| {
            let model = train(train_set, &TrainParams { c, ..params.clone() })?;
            let acc = evaluate(&model, validation)?.accuracy();
            Ok((model, acc))
        })
        .collect();
    let mut per_c = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64, &SvmModel)> = None;
    for (&c, fit) in grid.iter().zip(&fits) {
        match fit {
            Ok((model, acc)) => {
                per_c.push(PenaltyResult { c, accuracy: Some(*acc), converged: model.training.converged, error: None });
                let better = match best {
                    None => true,
                    Some((bc, ba, _)) => *acc > ba || (*acc == ba && c < bc),
                };
                if better {
                    best = Some((c, *acc, model));
                }
            }
            Err(e) => {
                log::warn!("penalty {c}: {e}");
                per_c.push(PenaltyResult { c, accuracy: None, converged: false, error: Some(e.to_string()) });
            }
        }
    }
    match best {
        Some((best_c, _, model)) => Ok(PenaltySelection { best_c, per_c, model: model.clone() }),
        None => {
            let msgs: Vec<String> = per_c.iter().filter_map(|r| r.error.clone()).collect();
            Err(SvmError::AllFailed(msgs.join("; ")))
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_operational_pred_operational: usize,
    pub true_operational_pred_outage: usize,
    pub true_outage_pred_operational: usize,
    pub true_outage_pred_outage: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_operational_pred_operational
            + self.true_operational_pred_outage
            + self.true_outage_pred_operational
            + self.true_outage_pred_outage
    }

    pub fn correct(&self) -> usize {
        self.true_operational_pred_operational + self.true_outage_pred_outage
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.correct() as f64 / t as f64,
        }
    }

    pub fn add(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Operational, Label::Operational) => self.true_operational_pred_operational += 1,
            (Label::Operational, Label::Outage) => self.true_operational_pred_outage += 1,
            (Label::Outage, Label::Operational) => self.true_outage_pred_operational += 1,
            (Label::Outage, Label::Outage) => self.true_outage_pred_outage += 1,
        }
    }

    /// Row percentage truncated to two decimals, e.g. 4 of 60 -> "6.66".
    pub fn row_percent(count: usize, row_total: usize) -> String {
        if row_total == 0 {
            return "0.00".into();
        }
        let hundredths = count * 10_000 / row_total;
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }

    pub fn report(&self) -> String {
        let op = self.true_operational_pred_operational + self.true_operational_pred_outage;
        let out = self.true_outage_pred_operational + self.true_outage_pred_outage;
        let cell = |n: usize, t: usize| format!("{n} ({}%)", Self::row_percent(n, t));
        let mut s = String::new();
        let _ = writeln!(s, "{:<8}{:<13}Predicted", "", "");
        let _ = writeln!(s, "{:<8}{:<13}{:<17}Outage", "", "", "Operational");
        let _ = writeln!(
            s,
            "{:<8}{:<13}{:<17}{}",
            "Actual",
            "Operational",
            cell(self.true_operational_pred_operational, op),
            cell(self.true_operational_pred_outage, op)
        );
        let _ = writeln!(
            s,
            "{:<8}{:<13}{:<17}{}",
            "",
            "Outage",
            cell(self.true_outage_pred_operational, out),
            cell(self.true_outage_pred_outage, out)
        );
        let total = self.total();
        let pct = if total == 0 { 0.0 } else { 100.0 * self.correct() as f64 / total as f64 };
        let _ = writeln!(s, "Overall accuracy: {pct:.2}% ({}/{total})", self.correct());
        s
    }
}

pub fn evaluate(model: &SvmModel, test: &LabeledDataset) -> Result<ConfusionMatrix, SvmError> {
    if test.is_empty() {
        return Err(SvmError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (x, &l) in test.features.iter().zip(&test.labels) {
        cm.add(l, model.predict(*x));
    }
    Ok(cm)
}
