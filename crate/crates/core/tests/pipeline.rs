//! End-to-end flows: CSV ingestion through the schedule, synthetic
//! comparisons, determinism, and the holdout isolation guarantee.

use std::collections::HashMap;
use std::io::Write;

use poolal::data::{
    assemble_samples, impute, ingest_sensor_csv, synth_pool_stream, AttributeSpec, Holdout, Pool,
    SensorSchema, SynthConfig,
};
use poolal::metrics::mse;
use poolal::regressors::RegressorKind;
use poolal::scheduler::{run_experiment, ExperimentConfig, MapOracle, Oracle};
use poolal::strategies::StrategyKind;

fn write_temp(content: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(content.as_bytes()).unwrap();
    f.flush().unwrap();
    f
}

fn milk_schema() -> SensorSchema {
    SensorSchema::new(
        "milk",
        vec![
            AttributeSpec::numeric_open("fat"),
            AttributeSpec::numeric_open("casein"),
        ],
    )
    .unwrap()
}

fn status_schema() -> SensorSchema {
    SensorSchema::new(
        "status",
        vec![AttributeSpec::numeric_open("dim")],
    )
    .unwrap()
}

/// Builds a small two-sensor dataset over 3 rounds x 4 cases, with a couple
/// of missing cells, and runs the full schedule on it.
#[test]
fn csv_to_schedule_end_to_end() {
    let mut milk_rows = String::from("event_id,case_id,timestamp,fat,casein\n");
    let mut status_rows = String::from("event_id,case_id,timestamp,dim\n");
    let mut labels: HashMap<(String, u64), f64> = HashMap::new();
    let mut eid = 0;
    for t in 1..=3u64 {
        for c in 0..4 {
            let case = format!("cow{c}");
            let fat = 3.0 + c as f64 * 0.3 + t as f64 * 0.05;
            let casein = 2.0 + c as f64 * 0.1;
            let dim = 50.0 * c as f64 + t as f64;
            // drop one fat cell to exercise imputation
            let fat_cell = if t == 2 && c == 1 {
                String::new()
            } else {
                format!("{fat}")
            };
            milk_rows.push_str(&format!("m{eid},{case},{t},{fat_cell},{casein}\n"));
            status_rows.push_str(&format!("s{eid},{case},{t},{dim}\n"));
            labels.insert((case, t), 2.0 * fat + casein - 0.01 * dim);
            eid += 1;
        }
    }
    let milk_file = write_temp(&milk_rows);
    let status_file = write_temp(&status_rows);

    let milk_events = ingest_sensor_csv(milk_file.path(), &milk_schema()).unwrap();
    let status_events = ingest_sensor_csv(status_file.path(), &status_schema()).unwrap();
    let assembled = assemble_samples(&[
        (milk_schema(), milk_events),
        (status_schema(), status_events),
    ])
    .unwrap();
    let samples = impute(&assembled).unwrap();
    assert_eq!(samples.len(), 12);
    assert!(samples.iter().all(|s| s.features.iter().all(|v| v.is_finite())));

    // group into per-round pools, holding one case out entirely
    let mut pools = Vec::new();
    let mut holdout_samples = Vec::new();
    for t in 1..=3u64 {
        let round: Vec<_> = samples
            .iter()
            .filter(|s| s.timestamp == t && s.case_id != "cow3")
            .cloned()
            .collect();
        holdout_samples.extend(
            samples
                .iter()
                .filter(|s| s.timestamp == t && s.case_id == "cow3")
                .cloned(),
        );
        pools.push(Pool::new(t as usize, round).unwrap());
    }
    let holdout = Holdout {
        labels: holdout_samples
            .iter()
            .map(|s| labels[&(s.case_id.clone(), s.timestamp)])
            .collect(),
        samples: holdout_samples,
    };
    let oracle = MapOracle::new(labels);
    oracle.validate_covers(&pools).unwrap();

    let cfg = ExperimentConfig {
        name: "csv".into(),
        horizon: 3,
        budget: 2,
        init_rounds: 1,
        init_strategy: StrategyKind::Di,
        select_strategy: StrategyKind::Umse,
        regressor: RegressorKind::Ridge,
        checkpoints: vec![3],
        seed: 5,
        ..ExperimentConfig::default()
    };
    let outcome = run_experiment(&pools, &oracle, &holdout, &cfg).unwrap();
    assert_eq!(outcome.schedule.len(), 6);
    assert_eq!(outcome.report.curve.len(), 3);
    // labeled keys stay inside the pools and never touch the holdout case
    assert!(outcome.schedule.iter().all(|e| e.case_id != "cow3"));
}

#[test]
fn feature_order_is_stable_across_all_rounds() {
    let cfg = SynthConfig {
        rounds: 6,
        pool_size: 25,
        dim: 12,
        ..SynthConfig::default()
    };
    let stream = synth_pool_stream(&cfg, 3).unwrap();
    let names = stream.pools[0].samples()[0].feature_names.clone();
    for pool in &stream.pools {
        for s in pool.samples() {
            assert_eq!(s.feature_names, names);
        }
    }
    for s in &stream.holdout.samples {
        assert_eq!(s.feature_names, names);
    }
}

fn small_run_cfg(name: &str, select: StrategyKind, seed: u64, horizon: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        name: name.into(),
        horizon,
        budget: 4,
        init_rounds: 2,
        init_strategy: StrategyKind::Di,
        select_strategy: select,
        regressor: RegressorKind::Tree,
        committee_size: 4,
        checkpoints: vec![3, 6],
        seed,
        ..ExperimentConfig::default()
    };
    cfg.params.forest_trees = 20;
    cfg
}

#[test]
fn identical_seeds_reproduce_identical_runs() {
    let synth = SynthConfig {
        rounds: 6,
        pool_size: 40,
        dim: 6,
        ..SynthConfig::default()
    };
    let stream = synth_pool_stream(&synth, 11).unwrap();
    let cfg = small_run_cfg("det", StrategyKind::QbcBoot, 99, 6);
    let a = run_experiment(&stream.pools, &stream.oracle, &stream.holdout, &cfg).unwrap();
    let b = run_experiment(&stream.pools, &stream.oracle, &stream.holdout, &cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&a.report).unwrap(),
        serde_json::to_string(&b.report).unwrap()
    );
    assert_eq!(a.schedule, b.schedule);
    assert_eq!(
        a.final_model.fingerprint().unwrap(),
        b.final_model.fingerprint().unwrap()
    );
}

/// Strategies only see (pool, labeled, model); scrambling holdout labels
/// must change the evaluation curve but never the schedule.
#[test]
fn permuting_holdout_labels_never_changes_the_schedule() {
    let synth = SynthConfig {
        rounds: 6,
        pool_size: 40,
        dim: 6,
        ..SynthConfig::default()
    };
    let stream = synth_pool_stream(&synth, 17).unwrap();
    for select in [
        StrategyKind::Umse,
        StrategyKind::QbcBoot,
        StrategyKind::Pr,
        StrategyKind::EmcmBoot,
    ] {
        let cfg = small_run_cfg("leak", select, 31, 6);
        let base =
            run_experiment(&stream.pools, &stream.oracle, &stream.holdout, &cfg).unwrap();
        let mut permuted = stream.holdout.clone();
        permuted.labels.rotate_left(7);
        let scrambled =
            run_experiment(&stream.pools, &stream.oracle, &permuted, &cfg).unwrap();
        assert_eq!(base.schedule, scrambled.schedule, "{select} leaked holdout data");
        assert_ne!(
            base.report.curve, scrambled.report.curve,
            "permuted labels should change the measured curve"
        );
    }
}

#[test]
fn degenerate_label_stream_falls_back_and_completes() {
    // constant oracle makes label binning degenerate every round
    struct Flat;
    impl Oracle for Flat {
        fn label(&self, _: &poolal::data::Sample) -> f64 {
            4.0
        }
    }
    let synth = SynthConfig {
        rounds: 5,
        pool_size: 30,
        dim: 5,
        ..SynthConfig::default()
    };
    let stream = synth_pool_stream(&synth, 23).unwrap();
    let holdout = Holdout {
        labels: vec![4.0; stream.holdout.len()],
        samples: stream.holdout.samples.clone(),
    };
    let cfg = small_run_cfg("flat", StrategyKind::Udi, 13, 5);
    let outcome = run_experiment(&stream.pools, &Flat, &holdout, &cfg).unwrap();
    assert_eq!(outcome.schedule.len(), 5 * 4);
    let final_mse = outcome.report.final_mse().unwrap();
    assert!(final_mse < 1e-12, "constant labels are easy: {final_mse}");
}

#[test]
fn run_report_survives_serialization() {
    let synth = SynthConfig {
        rounds: 5,
        pool_size: 30,
        dim: 5,
        ..SynthConfig::default()
    };
    let stream = synth_pool_stream(&synth, 29).unwrap();
    let cfg = small_run_cfg("serde", StrategyKind::Di, 3, 5);
    let outcome = run_experiment(&stream.pools, &stream.oracle, &stream.holdout, &cfg).unwrap();
    let json = serde_json::to_string(&outcome.report).unwrap();
    let back: poolal::metrics::RunReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, outcome.report);
}

#[test]
fn holdout_evaluation_matches_direct_mse() {
    let synth = SynthConfig {
        rounds: 4,
        pool_size: 30,
        dim: 5,
        ..SynthConfig::default()
    };
    let stream = synth_pool_stream(&synth, 41).unwrap();
    let cfg = small_run_cfg("mse", StrategyKind::Di, 8, 4);
    let outcome = run_experiment(&stream.pools, &stream.oracle, &stream.holdout, &cfg).unwrap();
    let preds: Vec<f64> = stream
        .holdout
        .samples
        .iter()
        .map(|s| outcome.final_model.predict(s).unwrap())
        .collect();
    let direct = mse(&stream.holdout.labels, &preds).unwrap();
    let last = outcome.report.final_mse().unwrap();
    assert!((direct - last).abs() < 1e-12);
}
