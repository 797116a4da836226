//! Materializes a synthetic stream: one CSV per round plus a label file.

use std::path::{Path, PathBuf};

use poolal::data::synth_pool_stream;
use poolal::{Error, Result};

use crate::config::load_harness_config;

pub fn cmd_synth(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let harness = load_harness_config(config_path)?;
    let synth = harness.data.synthetic.clone();
    synth.validate()?;
    let seed = seed.unwrap_or_else(|| harness.seeds.first().copied().unwrap_or(42));

    std::fs::create_dir_all(out)
        .map_err(|e| Error::Config(format!("output directory `{}`: {e}", out.display())))?;

    let stream = synth_pool_stream(&synth, seed)?;
    let names: Vec<String> = stream.feature_names.to_vec();

    let width = stream.pools.len().to_string().len().max(3);
    let mut labels = csv::Writer::from_path(out.join("labels.csv"))?;
    labels.write_record(["case_id", "timestamp", "label"])?;
    for pool in &stream.pools {
        let path: PathBuf = out.join(format!("pool_{:0width$}.csv", pool.round()));
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["case_id".to_string(), "timestamp".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for s in pool.samples() {
            let mut record = vec![s.case_id.clone(), s.timestamp.to_string()];
            record.extend(s.features.iter().map(|v| format!("{v}")));
            w.write_record(&record)?;
            labels.write_record([
                s.case_id.clone(),
                s.timestamp.to_string(),
                format!("{}", stream.oracle.label(s)),
            ])?;
        }
        w.flush()?;
    }
    labels.flush()?;
    println!(
        "wrote {} pool files of {} rows and labels.csv to {}",
        stream.pools.len(),
        synth.pool_size,
        out.display()
    );
    Ok(())
}
