//! CSV ingestion of sensor event streams.
//!
//! Expected layout: UTF-8, comma-separated, header row. The header must name
//! `event_id`, `case_id`, `timestamp` and every schema attribute; extra
//! columns are ignored. `NA` or an empty cell means missing. Cells that fail
//! to parse or fall outside the declared domain are kept as missing rather
//! than dropping the row.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use super::{AttrDomain, AttrKind, AttrValue, SensorEvent, SensorSchema};
use crate::error::{Error, Result};

const MISSING_TOKENS: [&str; 2] = ["", "NA"];

fn is_missing(cell: &str) -> bool {
    MISSING_TOKENS.contains(&cell.trim())
}

fn parse_cell(spec_kind: AttrKind, domain: Option<&AttrDomain>, cell: &str) -> Option<AttrValue> {
    let cell = cell.trim();
    if is_missing(cell) {
        return None;
    }
    match spec_kind {
        AttrKind::Numeric => {
            let v: f64 = cell.parse().ok()?;
            if !v.is_finite() {
                return None;
            }
            if let Some(AttrDomain::Interval { lo, hi }) = domain {
                if v < *lo || v > *hi {
                    return None;
                }
            }
            Some(AttrValue::Number(v))
        }
        AttrKind::Binary => match cell.to_ascii_lowercase().as_str() {
            "1" | "true" | "t" | "yes" => Some(AttrValue::Flag(true)),
            "0" | "false" | "f" | "no" => Some(AttrValue::Flag(false)),
            _ => None,
        },
        AttrKind::Categorical => {
            if let Some(AttrDomain::Values(vs)) = domain {
                if vs.iter().any(|v| v == cell) {
                    Some(AttrValue::Category(cell.to_string()))
                } else {
                    None
                }
            } else {
                None
            }
        }
    }
}

/// Reads one sensor's event stream from a CSV file.
pub fn ingest_sensor_csv(path: &Path, schema: &SensorSchema) -> Result<Vec<SensorEvent>> {
    let file = std::fs::File::open(path)?;
    ingest_sensor_events(file, schema)
}

/// Reader-based variant of [`ingest_sensor_csv`].
pub fn ingest_sensor_events<R: Read>(reader: R, schema: &SensorSchema) -> Result<Vec<SensorEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let col_of: HashMap<&str, usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim(), i))
        .collect();

    let mut mandatory: Vec<&str> = vec!["event_id", "case_id", "timestamp"];
    mandatory.extend(schema.attributes().iter().map(|a| a.name.as_str()));
    for col in &mandatory {
        if !col_of.contains_key(col) {
            return Err(Error::Schema(format!(
                "sensor `{}`: missing mandatory column `{}`",
                schema.sensor_name(),
                col
            )));
        }
    }

    let id_col = col_of["event_id"];
    let case_col = col_of["case_id"];
    let ts_col = col_of["timestamp"];

    let mut events = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // 1-based, after the header row
        let record = record?;
        let event_id = record.get(id_col).unwrap_or("").trim().to_string();
        if event_id.is_empty() {
            return Err(Error::Row {
                line,
                message: "empty event_id".into(),
            });
        }
        if !seen_ids.insert(event_id.clone()) {
            return Err(Error::Row {
                line,
                message: format!("duplicate event_id `{event_id}`"),
            });
        }
        let case_id = record.get(case_col).unwrap_or("").trim().to_string();
        if case_id.is_empty() {
            return Err(Error::Row {
                line,
                message: "empty case_id".into(),
            });
        }
        let ts_cell = record.get(ts_col).unwrap_or("").trim();
        let timestamp: u64 = ts_cell.parse().map_err(|_| Error::Row {
            line,
            message: format!("unparseable timestamp `{ts_cell}`"),
        })?;

        let mut values = BTreeMap::new();
        for attr in schema.attributes() {
            let cell = record.get(col_of[attr.name.as_str()]).unwrap_or("");
            values.insert(
                attr.name.clone(),
                parse_cell(attr.kind, attr.domain.as_ref(), cell),
            );
        }
        events.push(SensorEvent {
            event_id,
            case_id,
            timestamp,
            values,
        });
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::AttributeSpec;

    fn spectro_schema() -> SensorSchema {
        SensorSchema::new(
            "spectrometer",
            vec![
                AttributeSpec::numeric("fat", 0.0, 10.0),
                AttributeSpec::numeric("casein", 1.5, 3.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn well_formed_file_yields_all_events() {
        let csv = "event_id,case_id,timestamp,fat,casein\n\
                   e1,c1,1,3.5,2.0\n\
                   e2,c1,2,3.6,2.1\n\
                   e3,c2,1,4.0,1.9\n";
        let events = ingest_sensor_events(csv.as_bytes(), &spectro_schema()).unwrap();
        assert_eq!(events.len(), 3);
        let missing: usize = events
            .iter()
            .flat_map(|e| e.values.values())
            .filter(|v| v.is_none())
            .count();
        assert_eq!(missing, 0);
        assert_eq!(
            events[0].values["fat"],
            Some(AttrValue::Number(3.5)),
        );
    }

    #[test]
    fn empty_cell_is_flagged_missing() {
        let csv = "event_id,case_id,timestamp,fat,casein\ne1,c1,1,3.5,\n";
        let events = ingest_sensor_events(csv.as_bytes(), &spectro_schema()).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].values["casein"], None);
        assert!(events[0].values["fat"].is_some());
    }

    #[test]
    fn na_and_malformed_cells_are_missing_not_dropped() {
        let csv = "event_id,case_id,timestamp,fat,casein\n\
                   e1,c1,1,NA,abc\n\
                   e2,c1,2,3.0,9.9\n"; // 9.9 outside [1.5, 3.0]
        let events = ingest_sensor_events(csv.as_bytes(), &spectro_schema()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].values["fat"], None);
        assert_eq!(events[0].values["casein"], None);
        assert_eq!(events[1].values["casein"], None);
    }

    #[test]
    fn missing_mandatory_column_is_schema_error() {
        let csv = "event_id,timestamp,fat,casein\ne1,1,3.5,2.0\n";
        let err = ingest_sensor_events(csv.as_bytes(), &spectro_schema()).unwrap_err();
        match err {
            Error::Schema(msg) => assert!(msg.contains("case_id"), "{msg}"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn bad_timestamp_is_row_error_with_line() {
        let csv = "event_id,case_id,timestamp,fat,casein\n\
                   e1,c1,1,3.5,2.0\n\
                   e2,c1,xyz,3.5,2.0\n";
        let err = ingest_sensor_events(csv.as_bytes(), &spectro_schema()).unwrap_err();
        match err {
            Error::Row { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("xyz"));
            }
            other => panic!("expected row error, got {other}"),
        }
    }

    #[test]
    fn duplicate_event_id_is_rejected() {
        let csv = "event_id,case_id,timestamp,fat,casein\n\
                   e1,c1,1,3.5,2.0\n\
                   e1,c2,2,3.5,2.0\n";
        assert!(ingest_sensor_events(csv.as_bytes(), &spectro_schema()).is_err());
    }

    #[test]
    fn binary_and_categorical_cells_parse() {
        let schema = SensorSchema::new(
            "status",
            vec![
                AttributeSpec::binary("sick"),
                AttributeSpec::categorical("gyn", &["fresh", "open", "pregnant"]),
            ],
        )
        .unwrap();
        let csv = "event_id,case_id,timestamp,sick,gyn\n\
                   e1,c1,1,true,open\n\
                   e2,c1,2,0,unknown\n";
        let events = ingest_sensor_events(csv.as_bytes(), &schema).unwrap();
        assert_eq!(events[0].values["sick"], Some(AttrValue::Flag(true)));
        assert_eq!(
            events[0].values["gyn"],
            Some(AttrValue::Category("open".into()))
        );
        assert_eq!(events[1].values["sick"], Some(AttrValue::Flag(false)));
        // out-of-domain category becomes missing
        assert_eq!(events[1].values["gyn"], None);
    }
}
