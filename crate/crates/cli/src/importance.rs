//! Permutation importance on a finished run: how much does holdout MSE rise
//! when one feature column is shuffled?

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;

use poolal::data::{Holdout, Sample};
use poolal::metrics::mse;
use poolal::regressors::Regressor;
use poolal::{seeds, Error, Result};

pub fn write_holdout_csv(path: &Path, holdout: &Holdout, names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["case_id".to_string(), "timestamp".to_string()];
    header.extend(names.iter().cloned());
    header.push("label".into());
    w.write_record(&header)?;
    for (s, y) in holdout.samples.iter().zip(&holdout.labels) {
        let mut record = vec![s.case_id.clone(), s.timestamp.to_string()];
        record.extend(s.features.iter().map(|v| format!("{v}")));
        record.push(format!("{y}"));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn read_holdout_csv(path: &Path) -> Result<(Holdout, Vec<String>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let cols: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    if cols.len() < 4 || cols[0] != "case_id" || cols[1] != "timestamp" || cols.last().unwrap() != "label" {
        return Err(Error::Config(format!(
            "`{}` is not a holdout file (case_id, timestamp, features..., label)",
            path.display()
        )));
    }
    let names: Vec<String> = cols[2..cols.len() - 1].to_vec();
    let names_arc: Arc<[String]> = names.clone().into();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Row {
                line,
                message: format!("unparseable number `{s}`"),
            })
        };
        let ts: u64 = record.get(1).unwrap_or("").trim().parse().map_err(|_| Error::Row {
            line,
            message: "unparseable timestamp".into(),
        })?;
        let features: Vec<f64> = (2..cols.len() - 1)
            .map(|j| parse(record.get(j).unwrap_or("")))
            .collect::<Result<_>>()?;
        labels.push(parse(record.get(cols.len() - 1).unwrap_or(""))?);
        samples.push(Sample::new(
            record.get(0).unwrap_or("").to_string(),
            ts,
            features,
            names_arc.clone(),
        ));
    }
    Ok((Holdout { samples, labels }, names))
}

fn holdout_mse(model: &Regressor, holdout: &Holdout) -> Result<f64> {
    let preds: Vec<f64> = holdout
        .samples
        .iter()
        .map(|s| model.predict(s))
        .collect::<Result<_>>()?;
    mse(&holdout.labels, &preds)
}

/// Mean MSE increase per feature over seeded column permutations,
/// descending.
pub fn permutation_importance(
    model: &Regressor,
    holdout: &Holdout,
    names: &[String],
    repeats: usize,
    seed: u64,
) -> Result<Vec<(String, f64)>> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let base = holdout_mse(model, holdout)?;
    let mut table = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let mut total = 0.0;
        for r in 0..repeats {
            let mut column: Vec<f64> = holdout.samples.iter().map(|s| s.features[j]).collect();
            column.shuffle(&mut seeds::rng(seeds::mix(
                seed,
                (j as u64) << 20 | r as u64,
            )));
            let mut permuted = holdout.clone();
            for (s, v) in permuted.samples.iter_mut().zip(&column) {
                s.features[j] = *v;
            }
            total += holdout_mse(model, &permuted)? - base;
        }
        table.push((name.clone(), total / repeats as f64));
    }
    table.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(table)
}

fn find_default_model(run_dir: &Path) -> Result<PathBuf> {
    let models_dir = run_dir.join("models");
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&models_dir)
        .map_err(|e| Error::Io(e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    entries.sort();
    entries.into_iter().next().ok_or_else(|| {
        Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no model dumps under {}", models_dir.display()),
        ))
    })
}

pub fn cmd_importance(
    run_dir: &Path,
    model: Option<PathBuf>,
    repeats: usize,
    seed: u64,
) -> Result<()> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let model_path = match model {
        Some(p) => p,
        None => find_default_model(run_dir)?,
    };
    let model_json = std::fs::read_to_string(&model_path).map_err(Error::Io)?;
    let model = Regressor::from_json(&model_json)?;
    let (holdout, names) = read_holdout_csv(&run_dir.join("holdout.csv"))?;

    let table = permutation_importance(&model, &holdout, &names, repeats, seed)?;

    let mut w = csv::Writer::from_path(run_dir.join("importance.csv"))?;
    w.write_record(["feature", "mse_increase"])?;
    for (name, delta) in &table {
        w.write_record([name.clone(), format!("{delta}")])?;
    }
    w.flush()?;

    println!(
        "permutation importance of {} ({repeats} repeats)",
        model_path.display()
    );
    println!("{:<24} {:>12}", "feature", "mse_increase");
    for (name, delta) in &table {
        println!("{name:<24} {delta:>12.5}");
    }
    Ok(())
}
