//! CSV artifacts. Four kinds land under the output directory: one run-level
//! row per run (`runs.csv`), a per-round curve per run (`curves/`), the
//! cross-config table with significance (`comparison.csv`), and the pick
//! schedule per run (`schedules/`). Model dumps go to `models/` as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use poolal::metrics::RunReport;
use poolal::scheduler::{Comparison, RunOutcome, RunRecord};
use poolal::Result;

pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn prepare(root: &Path) -> Result<Self> {
        for sub in ["curves", "schedules", "models"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(OutputLayout {
            root: root.to_path_buf(),
        })
    }

    pub fn run_stem(record: &RunRecord) -> String {
        format!("{}_{}", record.config_name, record.data_seed)
    }

    /// Per-run artifacts, written as each run finishes.
    pub fn write_run_artifacts(
        &self,
        record: &RunRecord,
        outcome: &RunOutcome,
        dump_model: bool,
    ) -> Result<()> {
        let stem = Self::run_stem(record);
        let report = &outcome.report;

        let mut curve = csv::Writer::from_path(self.root.join("curves").join(format!("{stem}.csv")))?;
        curve.write_record(["round", "mse"])?;
        for (i, v) in report.curve.values().iter().enumerate() {
            curve.write_record([
                (report.first_eval_round + i).to_string(),
                format!("{v}"),
            ])?;
        }
        curve.flush()?;

        let mut schedule =
            csv::Writer::from_path(self.root.join("schedules").join(format!("{stem}.csv")))?;
        schedule.write_record(["round", "case_id", "timestamp"])?;
        for entry in &outcome.schedule {
            schedule.write_record([
                entry.round.to_string(),
                entry.case_id.clone(),
                entry.timestamp.to_string(),
            ])?;
        }
        schedule.flush()?;

        if dump_model {
            fs::write(
                self.root.join("models").join(format!("{stem}.json")),
                outcome.final_model.to_json()?,
            )?;
        }
        Ok(())
    }

    pub fn write_runs_table(&self, records: &[RunRecord]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.root.join("runs.csv"))?;
        w.write_record([
            "config",
            "data_seed",
            "config_fingerprint",
            "model_fingerprint",
            "first_eval_round",
            "final_mse",
            "mse_auc",
            "log_auc",
            "asd",
            "wasd",
            "ftc",
        ])?;
        for r in records {
            let rep: &RunReport = &r.report;
            w.write_record([
                rep.config_name.clone(),
                r.data_seed.to_string(),
                rep.config_fingerprint.clone(),
                rep.model_fingerprint.clone(),
                rep.first_eval_round.to_string(),
                opt(rep.final_mse()),
                format!("{}", rep.auc),
                format!("{}", rep.log_auc),
                opt(rep.asd),
                opt(rep.wasd),
                rep.ftc.map(|t| t.to_string()).unwrap_or_else(|| "never".into()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_comparison(&self, comparison: &Comparison, checkpoints: &[usize]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.root.join("comparison.csv"))?;
        let mut header: Vec<String> = vec!["config".into(), "runs".into()];
        header.extend(checkpoints.iter().map(|c| format!("mse_{c}")));
        header.extend(
            [
                "mse_auc",
                "log_auc",
                "asd",
                "wasd",
                "ftc",
                "ftc_never",
                "p_vs_baseline",
                "significant",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        for row in &comparison.rows {
            let mut record: Vec<String> = vec![row.name.clone(), row.runs.to_string()];
            for (_, v) in &row.checkpoint_mse {
                record.push(opt(*v));
            }
            record.push(format!("{}", row.mean_auc));
            record.push(format!("{}", row.mean_log_auc));
            record.push(opt(row.mean_asd));
            record.push(opt(row.mean_wasd));
            record.push(opt(row.mean_ftc));
            record.push(row.ftc_never.to_string());
            match &row.vs_baseline {
                Some(t) => {
                    record.push(format!("{}", t.p_value));
                    record.push(if t.significant { "*".into() } else { String::new() });
                }
                None => {
                    record.push(String::new());
                    record.push(String::new());
                }
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Console summary: one line per config.
pub fn print_summary(comparison: &Comparison, checkpoints: &[usize]) {
    println!(
        "baseline: {} (alpha {}, {} pairwise comparisons)",
        comparison.baseline, comparison.alpha, comparison.bonferroni_m
    );
    let mut header = format!("{:<18} {:>5}", "config", "runs");
    for c in checkpoints {
        header.push_str(&format!(" {:>10}", format!("mse@{c}")));
    }
    header.push_str(&format!(" {:>10} {:>12} {:>6}", "log_auc", "p_vs_base", "sig"));
    println!("{header}");
    for row in &comparison.rows {
        let mut line = format!("{:<18} {:>5}", row.name, row.runs);
        for (_, v) in &row.checkpoint_mse {
            line.push_str(&format!(
                " {:>10}",
                v.map(|x| format!("{x:.3}")).unwrap_or_default()
            ));
        }
        line.push_str(&format!(" {:>10.3}", row.mean_log_auc));
        match &row.vs_baseline {
            Some(t) => line.push_str(&format!(
                " {:>12.3e} {:>6}",
                t.p_value,
                if t.significant { "*" } else { "" }
            )),
            None => line.push_str(&format!(" {:>12} {:>6}", "", "")),
        }
        println!("{line}");
    }
}
