//! Synthetic two-feature storm samples (wind speed, distance to storm center).

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Name of the sampler recorded in dataset metadata.
pub const PRNG_NAME: &str = "ChaCha8Rng::seed_from_u64 + rand_distr::Normal (rand 0.9)";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DataError {
    #[error("invalid sample spec: {0}")]
    InvalidSpec(String),
    #[error("normalization bound must be positive, got {0}")]
    NonPositiveBound(f64),
    #[error("dataset already normalized with bounds {0:?}")]
    AlreadyNormalized([f64; 2]),
    #[error("split: {0}")]
    Split(String),
    #[error("dataset line {line}: {detail}")]
    Csv { line: usize, detail: String },
    #[error("dataset is empty")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Operational,
    Outage,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Outage => 1.0,
            Label::Operational => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Outage => "+1",
            Label::Operational => "-1",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Outage => "outage",
            Label::Operational => "operational",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s.trim() {
            "+1" | "1" | "1.0" | "+1.0" => Some(Label::Outage),
            "-1" | "-1.0" => Some(Label::Operational),
            _ => None,
        }
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign() as i8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Label::Outage),
            -1 => Ok(Label::Operational),
            v => Err(serde::de::Error::custom(format!("label must be +1 or -1, got {v}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub n_per_class: usize,
    /// (wind mph, distance km)
    pub mean_operational: [f64; 2],
    pub mean_outage: [f64; 2],
    pub std_dev: [f64; 2],
    pub noise_std: [f64; 2],
    pub seed: u64,
}

pub const DEFAULT_BOUNDS: [f64; 2] = [160.0, 240.0];

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            n_per_class: 300,
            mean_operational: [72.0, 145.0],
            mean_outage: [115.0, 75.0],
            std_dev: [20.0, 35.0],
            noise_std: [0.02 * DEFAULT_BOUNDS[0], 0.02 * DEFAULT_BOUNDS[1]],
            seed: 0,
        }
    }
}

impl SampleSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_per_class == 0 {
            return Err(DataError::InvalidSpec("n_per_class must be positive".into()));
        }
        let all = self.mean_operational.iter().chain(&self.mean_outage).chain(&self.std_dev).chain(&self.noise_std);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(DataError::InvalidSpec("non-finite parameter".into()));
        }
        if self.std_dev.iter().chain(&self.noise_std).any(|&v| v < 0.0) {
            return Err(DataError::InvalidSpec("standard deviations must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct LabeledDataset {
    pub features: Vec<[f64; 2]>,
    pub labels: Vec<Label>,
    pub normalization_bounds: Option<[f64; 2]>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: idx.iter().map(|&i| self.features[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            normalization_bounds: self.normalization_bounds,
        }
    }
}

/// Draws `n_per_class` operational samples followed by `n_per_class` outage
/// samples, in raw units.
pub fn generate_samples(spec: &SampleSpec) -> Result<LabeledDataset, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = LabeledDataset::default();
    for (label, mean) in [(Label::Operational, spec.mean_operational), (Label::Outage, spec.mean_outage)] {
        for _ in 0..spec.n_per_class {
            let mut x = [0.0; 2];
            for k in 0..2 {
                let a: f64 = std_normal.sample(&mut rng);
                let b: f64 = std_normal.sample(&mut rng);
                x[k] = mean[k] + spec.std_dev[k] * a + spec.noise_std[k] * b;
            }
            out.features.push(x);
            out.labels.push(label);
        }
    }
    Ok(out)
}

fn check_bounds(bounds: [f64; 2]) -> Result<(), DataError> {
    for b in bounds {
        if b <= 0.0 || !b.is_finite() {
            return Err(DataError::NonPositiveBound(b));
        }
    }
    Ok(())
}

pub fn normalize_point(x: [f64; 2], bounds: [f64; 2]) -> [f64; 2] {
    [x[0].clamp(0.0, bounds[0]) / bounds[0], x[1].clamp(0.0, bounds[1]) / bounds[1]]
}

/// Clips raw features into `[0, bound]` and divides by the bound. A dataset
/// already normalized with the same bounds is returned unchanged.
pub fn normalize(data: &LabeledDataset, bounds: [f64; 2]) -> Result<LabeledDataset, DataError> {
    check_bounds(bounds)?;
    if let Some(b) = data.normalization_bounds {
        if b == bounds {
            return Ok(data.clone());
        }
        return Err(DataError::AlreadyNormalized(b));
    }
    Ok(LabeledDataset {
        features: data.features.iter().map(|&x| normalize_point(x, bounds)).collect(),
        labels: data.labels.clone(),
        normalization_bounds: Some(bounds),
    })
}

/// Maps normalized features back to raw units. Raw datasets pass through.
pub fn denormalize(data: &LabeledDataset) -> LabeledDataset {
    match data.normalization_bounds {
        None => data.clone(),
        Some(b) => LabeledDataset {
            features: data.features.iter().map(|x| [x[0] * b[0], x[1] * b[1]]).collect(),
            labels: data.labels.clone(),
            normalization_bounds: None,
        },
    }
}

/// Stratified split. Each class puts `round(fraction * class size)` samples in
/// the test set; both sides keep the input order.
pub fn split(data: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Split(format!("test fraction must be in (0, 1), got {test_fraction}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_mask = vec![false; data.len()];
    for label in [Label::Operational, Label::Outage] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == label).collect();
        let n = idx.len();
        let n_test = (test_fraction * n as f64).round() as usize;
        if n_test == 0 || n_test >= n {
            return Err(DataError::Split(format!(
                "class {} with {n} samples gives {n_test} test samples",
                label.name()
            )));
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..n_test] {
            test_mask[i] = true;
        }
    }
    let test: Vec<usize> = (0..data.len()).filter(|&i| test_mask[i]).collect();
    let train: Vec<usize> = (0..data.len()).filter(|&i| !test_mask[i]).collect();
    Ok((data.subset(&train), data.subset(&test)))
}

pub fn write_dataset_csv(data: &LabeledDataset) -> String {
    let mut s = String::from("wind_norm,dist_norm,label\n");
    for (x, l) in data.features.iter().zip(&data.labels) {
        let _ = writeln!(s, "{},{},{}", x[0], x[1], l.as_str());
    }
    s
}

/// Reads a normalized dataset written by [`write_dataset_csv`].
pub fn read_dataset_csv(text: &str, bounds: Option<[f64; 2]>) -> Result<LabeledDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| DataError::Csv { line: 1, detail: e.to_string() })?;
    if headers.iter().collect::<Vec<_>>() != ["wind_norm", "dist_norm", "label"] {
        return Err(DataError::Csv { line: 1, detail: "header must be wind_norm,dist_norm,label".into() });
    }
    let mut out = LabeledDataset { normalization_bounds: bounds, ..Default::default() };
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| DataError::Csv { line, detail: e.to_string() })?;
        let num = |i: usize| -> Result<f64, DataError> {
            let raw = rec.get(i).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(DataError::Csv { line, detail: format!("bad number {raw:?}") }),
            }
        };
        let x = [num(0)?, num(1)?];
        let raw = rec.get(2).unwrap_or("");
        let label = Label::parse(raw).ok_or_else(|| DataError::Csv { line, detail: format!("bad label {raw:?}") })?;
        out.features.push(x);
        out.labels.push(label);
    }
    if out.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub spec: SampleSpec,
    pub bounds: [f64; 2],
    pub seed: u64,
    pub prng: String,
    pub samples: usize,
}

impl DatasetMeta {
    pub fn new(spec: &SampleSpec, bounds: [f64; 2], samples: usize) -> Self {
        DatasetMeta { spec: spec.clone(), bounds, seed: spec.seed, prng: PRNG_NAME.into(), samples }
    }
}
