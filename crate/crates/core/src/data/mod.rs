//! Sensor data model: schemas, events, samples, pools, and labeled sets.
//!
//! A sensor emits timestamped events carrying typed attribute values for a
//! case. Events from several sensors sharing a (case, timestamp) key are
//! joined into one feature vector. Per round, the available feature vectors
//! form a pool; the vectors picked and labeled so far form the labeled set.

mod assemble;
mod ingest;
mod synth;

pub use assemble::{assemble_samples, impute, Assembled, PartialSample};
pub use ingest::{ingest_sensor_csv, ingest_sensor_events};
pub use synth::{
    default_pareto_partition, feature_names as synth_feature_names, synth_pool_stream, Holdout,
    SynthConfig, SynthOracle, SynthStream,
};

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrKind {
    Numeric,
    Binary,
    Categorical,
}

/// Declared value domain of an attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrDomain {
    /// Closed interval for numeric attributes.
    Interval { lo: f64, hi: f64 },
    /// Admissible values for categorical attributes.
    Values(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttrKind,
    pub domain: Option<AttrDomain>,
}

impl AttributeSpec {
    pub fn numeric(name: &str, lo: f64, hi: f64) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttrKind::Numeric,
            domain: Some(AttrDomain::Interval { lo, hi }),
        }
    }

    pub fn numeric_open(name: &str) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttrKind::Numeric,
            domain: None,
        }
    }

    pub fn binary(name: &str) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttrKind::Binary,
            domain: None,
        }
    }

    pub fn categorical(name: &str, values: &[&str]) -> Self {
        AttributeSpec {
            name: name.to_string(),
            kind: AttrKind::Categorical,
            domain: Some(AttrDomain::Values(
                values.iter().map(|v| v.to_string()).collect(),
            )),
        }
    }
}

/// Attribute layout of one sensor type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSchema {
    sensor_name: String,
    attributes: Vec<AttributeSpec>,
}

impl SensorSchema {
    /// Validates: unique attribute names, non-empty numeric intervals, and a
    /// declared value set for every categorical attribute (the encoder needs
    /// it to lay out one-hot columns).
    pub fn new(sensor_name: &str, attributes: Vec<AttributeSpec>) -> Result<Self> {
        if sensor_name.is_empty() {
            return Err(Error::Schema("sensor name must be non-empty".into()));
        }
        let mut seen = HashSet::new();
        for attr in &attributes {
            if !seen.insert(attr.name.clone()) {
                return Err(Error::Schema(format!(
                    "duplicate attribute `{}` in sensor `{}`",
                    attr.name, sensor_name
                )));
            }
            match (&attr.kind, &attr.domain) {
                (AttrKind::Numeric, Some(AttrDomain::Interval { lo, hi })) => {
                    if !(lo <= hi) {
                        return Err(Error::Schema(format!(
                            "attribute `{}`: empty interval [{lo}, {hi}]",
                            attr.name
                        )));
                    }
                }
                (AttrKind::Numeric, Some(AttrDomain::Values(_))) => {
                    return Err(Error::Schema(format!(
                        "attribute `{}`: numeric attribute cannot take a value set",
                        attr.name
                    )));
                }
                (AttrKind::Categorical, Some(AttrDomain::Values(vs))) => {
                    if vs.is_empty() {
                        return Err(Error::Schema(format!(
                            "attribute `{}`: empty category set",
                            attr.name
                        )));
                    }
                }
                (AttrKind::Categorical, _) => {
                    return Err(Error::Schema(format!(
                        "attribute `{}`: categorical attribute requires a declared value set",
                        attr.name
                    )));
                }
                _ => {}
            }
        }
        Ok(SensorSchema {
            sensor_name: sensor_name.to_string(),
            attributes,
        })
    }

    pub fn sensor_name(&self) -> &str {
        &self.sensor_name
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }
}

/// One observed value; the kind mirrors the owning attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Number(f64),
    Flag(bool),
    Category(String),
}

/// One sensor reading. `values` maps every schema attribute to either a
/// conforming value or `None` for an explicitly missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorEvent {
    pub event_id: String,
    pub case_id: String,
    pub timestamp: u64,
    pub values: BTreeMap<String, Option<AttrValue>>,
}

/// A fully imputed feature vector for one (case, timestamp).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub case_id: String,
    pub timestamp: u64,
    pub features: Vec<f64>,
    pub feature_names: Arc<[String]>,
}

impl Sample {
    pub fn new(
        case_id: impl Into<String>,
        timestamp: u64,
        features: Vec<f64>,
        feature_names: Arc<[String]>,
    ) -> Self {
        debug_assert_eq!(features.len(), feature_names.len());
        Sample {
            case_id: case_id.into(),
            timestamp,
            features,
            feature_names,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn key(&self) -> (String, u64) {
        (self.case_id.clone(), self.timestamp)
    }
}

/// Builds an anonymous feature-name list `x0, x1, ...` for tests and ad-hoc
/// vectors.
pub fn anon_features(dim: usize) -> Arc<[String]> {
    (0..dim).map(|j| format!("x{j}")).collect::<Vec<_>>().into()
}

/// The samples available for labeling at one round.
#[derive(Debug, Clone)]
pub struct Pool {
    round: usize,
    samples: Vec<Sample>,
}

impl Pool {
    pub fn new(round: usize, samples: Vec<Sample>) -> Result<Self> {
        if round == 0 {
            return Err(Error::Config("pool rounds are numbered from 1".into()));
        }
        if samples.is_empty() {
            return Err(Error::Config(format!("pool for round {round} is empty")));
        }
        let d = samples[0].dim();
        if samples.iter().any(|s| s.dim() != d) {
            return Err(Error::Config(format!(
                "pool for round {round} mixes feature dimensions"
            )));
        }
        Ok(Pool { round, samples })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].dim()
    }
}

/// Checks that a stream covers rounds 1..=T consecutively with a uniform
/// feature dimension.
pub fn validate_stream(pools: &[Pool]) -> Result<()> {
    if pools.is_empty() {
        return Err(Error::Config("pool stream is empty".into()));
    }
    let d = pools[0].dim();
    for (i, pool) in pools.iter().enumerate() {
        if pool.round() != i + 1 {
            return Err(Error::Config(format!(
                "pool stream has round {} at position {}; rounds must be consecutive from 1",
                pool.round(),
                i + 1
            )));
        }
        if pool.dim() != d {
            return Err(Error::Config(format!(
                "pool for round {} has dimension {} but the stream started with {}",
                pool.round(),
                pool.dim(),
                d
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LabeledSample {
    pub sample: Sample,
    pub label: f64,
    pub round: usize,
}

/// Accumulated (sample, label) pairs, tagged by acquisition round.
///
/// Append-only; a (case_id, timestamp) key may appear at most once.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    entries: Vec<LabeledSample>,
    keys: HashSet<(String, u64)>,
}

impl LabeledSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: Sample, label: f64, round: usize) -> Result<()> {
        if !label.is_finite() {
            return Err(Error::Config(format!(
                "label for ({}, t={}) is not finite",
                sample.case_id, sample.timestamp
            )));
        }
        if !self.keys.insert(sample.key()) {
            return Err(Error::DuplicateLabel {
                case_id: sample.case_id.clone(),
                timestamp: sample.timestamp,
            });
        }
        self.entries.push(LabeledSample {
            sample,
            label,
            round,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LabeledSample] {
        &self.entries
    }

    pub fn labels(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn feature_rows(&self) -> Vec<&[f64]> {
        self.entries
            .iter()
            .map(|e| e.sample.features.as_slice())
            .collect()
    }

    pub fn contains_key(&self, case_id: &str, timestamp: u64) -> bool {
        self.keys.contains(&(case_id.to_string(), timestamp))
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.first().map(|e| e.sample.dim())
    }
}
