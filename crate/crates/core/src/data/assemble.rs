//! Joining per-sensor event streams into feature vectors and filling the
//! gaps.
//!
//! Encoding: numeric and binary attributes take one column each (binary as
//! 0/1); a categorical attribute takes one 0/1 column per declared category,
//! in lexicographic category order. Column names are `sensor.attr` and
//! `sensor.attr=category`.
//!
//! Imputation fills each missing entry with the most recent earlier value of
//! the same case and column, falling back to the column mean over all
//! observed values.

use std::collections::HashMap;
use std::sync::Arc;

use super::{AttrDomain, AttrKind, AttrValue, Sample, SensorEvent, SensorSchema};
use crate::error::{Error, Result};

/// A joined feature vector that may still contain missing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSample {
    pub case_id: String,
    pub timestamp: u64,
    pub features: Vec<Option<f64>>,
}

/// Output of [`assemble_samples`]: the shared column layout plus one partial
/// vector per (case, timestamp), sorted by case then timestamp.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub feature_names: Arc<[String]>,
    pub samples: Vec<PartialSample>,
}

struct ColumnLayout {
    names: Vec<String>,
    // per sensor: (attr columns) in schema order
    sensor_offsets: Vec<usize>,
}

fn layout(schemas: &[&SensorSchema]) -> Result<ColumnLayout> {
    let mut names = Vec::new();
    let mut sensor_offsets = Vec::with_capacity(schemas.len());
    let mut seen = std::collections::HashSet::new();
    for schema in schemas {
        if !seen.insert(schema.sensor_name().to_string()) {
            return Err(Error::Schema(format!(
                "duplicate sensor `{}` in schema set",
                schema.sensor_name()
            )));
        }
        sensor_offsets.push(names.len());
        for attr in schema.attributes() {
            match (attr.kind, &attr.domain) {
                (AttrKind::Categorical, Some(AttrDomain::Values(vs))) => {
                    let mut cats: Vec<&String> = vs.iter().collect();
                    cats.sort();
                    for cat in cats {
                        names.push(format!("{}.{}={}", schema.sensor_name(), attr.name, cat));
                    }
                }
                _ => names.push(format!("{}.{}", schema.sensor_name(), attr.name)),
            }
        }
    }
    Ok(ColumnLayout {
        names,
        sensor_offsets,
    })
}

fn encode_event(
    schema: &SensorSchema,
    event: &SensorEvent,
    out: &mut [Option<f64>],
) {
    let mut col = 0usize;
    for attr in schema.attributes() {
        let value = event.values.get(&attr.name).and_then(|v| v.as_ref());
        match (attr.kind, &attr.domain) {
            (AttrKind::Categorical, Some(AttrDomain::Values(vs))) => {
                let mut cats: Vec<&String> = vs.iter().collect();
                cats.sort();
                match value {
                    Some(AttrValue::Category(c)) => {
                        for cat in &cats {
                            out[col] = Some(if *cat == c { 1.0 } else { 0.0 });
                            col += 1;
                        }
                    }
                    _ => {
                        for _ in &cats {
                            out[col] = None;
                            col += 1;
                        }
                    }
                }
            }
            _ => {
                out[col] = match value {
                    Some(AttrValue::Number(v)) => Some(*v),
                    Some(AttrValue::Flag(b)) => Some(if *b { 1.0 } else { 0.0 }),
                    _ => None,
                };
                col += 1;
            }
        }
    }
}

/// Joins per-sensor streams on (case_id, timestamp). A key present in any
/// stream yields one output vector; sensors without an event at that key
/// contribute missing entries. Two events of one sensor sharing a key is a
/// conflict.
pub fn assemble_samples(streams: &[(SensorSchema, Vec<SensorEvent>)]) -> Result<Assembled> {
    let schemas: Vec<&SensorSchema> = streams.iter().map(|(s, _)| s).collect();
    let layout = layout(&schemas)?;
    let dim = layout.names.len();

    // (case, ts) -> per-sensor event index
    let mut keyed: HashMap<(String, u64), Vec<Option<usize>>> = HashMap::new();
    for (si, (schema, events)) in streams.iter().enumerate() {
        for (ei, event) in events.iter().enumerate() {
            let slot = keyed
                .entry((event.case_id.clone(), event.timestamp))
                .or_insert_with(|| vec![None; streams.len()]);
            if let Some(prev) = slot[si] {
                return Err(Error::EventConflict {
                    sensor: schema.sensor_name().to_string(),
                    case_id: event.case_id.clone(),
                    timestamp: event.timestamp,
                    first_event: events[prev].event_id.clone(),
                    second_event: event.event_id.clone(),
                });
            }
            slot[si] = Some(ei);
        }
    }

    let mut keys: Vec<(String, u64)> = keyed.keys().cloned().collect();
    keys.sort();

    let mut samples = Vec::with_capacity(keys.len());
    for key in keys {
        let slot = &keyed[&key];
        let mut features: Vec<Option<f64>> = vec![None; dim];
        for (si, (schema, events)) in streams.iter().enumerate() {
            if let Some(ei) = slot[si] {
                let off = layout.sensor_offsets[si];
                let width = if si + 1 < layout.sensor_offsets.len() {
                    layout.sensor_offsets[si + 1] - off
                } else {
                    dim - off
                };
                encode_event(schema, &events[ei], &mut features[off..off + width]);
            }
        }
        samples.push(PartialSample {
            case_id: key.0,
            timestamp: key.1,
            features,
        });
    }

    Ok(Assembled {
        feature_names: layout.names.into(),
        samples,
    })
}

/// Fills missing entries: most recent earlier value of the same case and
/// column first, column mean over all observed values otherwise.
///
/// Assumes the input is in per-case chronological order, as produced by
/// [`assemble_samples`]. A column with no observed value anywhere is an
/// error.
pub fn impute(assembled: &Assembled) -> Result<Vec<Sample>> {
    let dim = assembled.feature_names.len();
    let mut sums = vec![0.0; dim];
    let mut counts = vec![0usize; dim];
    for s in &assembled.samples {
        for (j, v) in s.features.iter().enumerate() {
            if let Some(v) = v {
                sums[j] += v;
                counts[j] += 1;
            }
        }
    }
    let mut means = vec![0.0; dim];
    for j in 0..dim {
        if counts[j] == 0 {
            return Err(Error::UnimputableFeature(
                assembled.feature_names[j].clone(),
            ));
        }
        means[j] = sums[j] / counts[j] as f64;
    }

    let mut last_seen: HashMap<&str, Vec<Option<f64>>> = HashMap::new();
    let mut out = Vec::with_capacity(assembled.samples.len());
    for s in &assembled.samples {
        let history = last_seen
            .entry(s.case_id.as_str())
            .or_insert_with(|| vec![None; dim]);
        let mut features = Vec::with_capacity(dim);
        for (j, v) in s.features.iter().enumerate() {
            let filled = match v {
                Some(v) => *v,
                None => history[j].unwrap_or(means[j]),
            };
            history[j] = Some(match v {
                Some(v) => *v,
                // carried values propagate forward too
                None => filled,
            });
            features.push(filled);
        }
        out.push(Sample::new(
            s.case_id.clone(),
            s.timestamp,
            features,
            assembled.feature_names.clone(),
        ));
    }
    Ok(out)
}
