//! The data collection schedule: K initialization rounds of model-free
//! picking, then model-aware selection with retraining after every round,
//! evaluated against a fixed holdout.
//!
//! A selection strategy that reports itself unavailable or degenerate mid-run
//! is replaced by random picking for that round (with a warning); long
//! experiments finish rather than abort.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{validate_stream, Holdout, LabeledSet, Pool, Sample, SynthConfig, SynthOracle};
use crate::error::{Error, Result};
use crate::metrics::{mse, paired_ttest_log, MetricCurve, PairedTTest, RunReport};
use crate::regressors::{Hyperparams, Regressor, RegressorKind};
use crate::seeds;
use crate::strategies::{
    select, select_random, EmcmConfig, ParetoSpec, SelectionRequest, StrategyConfig, StrategyKind,
    UclConfig, UdiConfig,
};

/// Supplies the label for any pooled sample. Deterministic and total on the
/// pools it is paired with.
pub trait Oracle: Send + Sync {
    fn label(&self, sample: &Sample) -> f64;
}

impl Oracle for SynthOracle {
    fn label(&self, sample: &Sample) -> f64 {
        SynthOracle::label(self, sample)
    }
}

/// Label lookup keyed by (case_id, timestamp), for ingested data.
#[derive(Debug, Clone, Default)]
pub struct MapOracle {
    labels: HashMap<(String, u64), f64>,
}

impl MapOracle {
    pub fn new(labels: HashMap<(String, u64), f64>) -> Self {
        MapOracle { labels }
    }

    /// Errors unless every pool sample has a label.
    pub fn validate_covers(&self, pools: &[Pool]) -> Result<()> {
        for pool in pools {
            for s in pool.samples() {
                if !self.labels.contains_key(&(s.case_id.clone(), s.timestamp)) {
                    return Err(Error::Config(format!(
                        "no label for pooled sample ({}, t={})",
                        s.case_id, s.timestamp
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, case_id: &str, timestamp: u64) -> Option<f64> {
        self.labels.get(&(case_id.to_string(), timestamp)).copied()
    }
}

impl Oracle for MapOracle {
    fn label(&self, sample: &Sample) -> f64 {
        self.get(&sample.case_id, sample.timestamp)
            .unwrap_or_else(|| {
                panic!(
                    "oracle has no label for ({}, t={}); validate_covers must run first",
                    sample.case_id, sample.timestamp
                )
            })
    }
}

/// Full description of one experiment arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    /// Experiment horizon T.
    pub horizon: usize,
    /// Samples labeled per round.
    pub budget: usize,
    /// Rounds handled by the initialization strategy.
    pub init_rounds: usize,
    pub init_strategy: StrategyKind,
    pub select_strategy: StrategyKind,
    pub regressor: RegressorKind,
    pub params: Hyperparams,
    /// Bootstrap committee size.
    pub committee_size: usize,
    pub emcm: EmcmConfig,
    pub udi: UdiConfig,
    pub ucl: UclConfig,
    /// Cluster count for `cl` initialization.
    pub cl_clusters: usize,
    pub pareto: Option<ParetoSpec>,
    /// Convergence threshold for the first-to-converge measure.
    pub epsilon: f64,
    /// Rounds reported as fixed checkpoints.
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    /// Runs to average when this arm picks randomly.
    pub random_baseline_repeats: usize,
    /// Refit after every round, including initialization rounds. When off,
    /// the first fit happens once initialization ends.
    pub fit_every_round: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            horizon: 100,
            budget: 8,
            init_rounds: 15,
            init_strategy: StrategyKind::Di,
            select_strategy: StrategyKind::QbcBoot,
            regressor: RegressorKind::RandomForest,
            params: Hyperparams::default(),
            committee_size: 10,
            emcm: EmcmConfig::default(),
            udi: UdiConfig::default(),
            ucl: UclConfig::default(),
            cl_clusters: 20,
            pareto: None,
            epsilon: 0.01,
            checkpoints: vec![20, 50, 100],
            seed: 42,
            random_baseline_repeats: 15,
            fit_every_round: true,
        }
    }
}

impl ExperimentConfig {
    /// Structural checks; `init_rounds == horizon` is tolerated and runs as
    /// pure initialization.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("experiment name must be non-empty".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.init_rounds > self.horizon {
            return Err(Error::Config(format!(
                "init_rounds {} exceeds horizon {}",
                self.init_rounds, self.horizon
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.random_baseline_repeats == 0 {
            return Err(Error::Config(
                "random_baseline_repeats must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn strategy_config(&self) -> StrategyConfig {
        StrategyConfig {
            pareto: self.pareto.clone(),
            cl_clusters: self.cl_clusters,
            udi: self.udi,
            ucl: self.ucl,
            emcm: self.emcm,
            committee_size: self.committee_size,
            base_kind: self.regressor,
            params: self.params.clone(),
        }
    }

    /// Stable digest of every field that shapes a run.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", seeds::hash_str(&canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub round: usize,
    pub case_id: String,
    pub timestamp: u64,
}

/// Everything one run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub schedule: Vec<ScheduleEntry>,
    pub final_model: Regressor,
}

fn holdout_mse(model: &Regressor, holdout: &Holdout) -> Result<f64> {
    let preds: Vec<f64> = holdout
        .samples
        .par_iter()
        .map(|s| model.predict(s))
        .collect::<Result<_>>()?;
    mse(&holdout.labels, &preds)
}

/// Runs the schedule over a pool stream: initialization rounds, then
/// model-aware selection, labeling, accumulation, and retraining, recording
/// holdout MSE after every fit.
pub fn run_experiment(
    pools: &[Pool],
    oracle: &dyn Oracle,
    holdout: &Holdout,
    cfg: &ExperimentConfig,
) -> Result<RunOutcome> {
    cfg.validate()?;
    validate_stream(pools)?;
    if pools.len() != cfg.horizon {
        return Err(Error::Config(format!(
            "stream has {} pools but the horizon is {}",
            pools.len(),
            cfg.horizon
        )));
    }
    if holdout.samples.len() != holdout.labels.len() {
        return Err(Error::LengthMismatch {
            left: holdout.samples.len(),
            right: holdout.labels.len(),
        });
    }
    if holdout.is_empty() {
        return Err(Error::Config("holdout is empty".into()));
    }
    let holdout_keys: HashSet<(String, u64)> =
        holdout.samples.iter().map(|s| s.key()).collect();
    for pool in pools {
        for s in pool.samples() {
            if holdout_keys.contains(&s.key()) {
                return Err(Error::Config(format!(
                    "holdout sample ({}, t={}) also appears in the round-{} pool",
                    s.case_id,
                    s.timestamp,
                    pool.round()
                )));
            }
        }
    }

    let strategy_cfg = cfg.strategy_config();
    let mut labeled = LabeledSet::new();
    let mut model: Option<Regressor> = None;
    let mut schedule = Vec::with_capacity(cfg.horizon * cfg.budget);
    let mut curve = Vec::new();
    let mut first_eval_round = 0usize;

    for t in 1..=cfg.horizon {
        let pool = &pools[t - 1];
        let kind = if t <= cfg.init_rounds {
            cfg.init_strategy
        } else {
            cfg.select_strategy
        };
        let req = SelectionRequest {
            pool,
            labeled: &labeled,
            model: model.as_ref(),
            budget: cfg.budget,
            seed: seeds::mix(cfg.seed, t as u64),
        };
        let picks = match select(kind, &req, &strategy_cfg) {
            Ok(picks) => picks,
            Err(e) if e.is_strategy_fallback() => {
                log::warn!("round {t}: {kind} unavailable ({e}); picking randomly");
                select_random(&req)?
            }
            Err(e) => return Err(e),
        };
        for idx in picks {
            let sample = pool.samples()[idx].clone();
            let label = oracle.label(&sample);
            schedule.push(ScheduleEntry {
                round: t,
                case_id: sample.case_id.clone(),
                timestamp: sample.timestamp,
            });
            labeled.push(sample, label, t)?;
        }

        let due = if cfg.fit_every_round {
            true
        } else {
            t >= cfg.init_rounds.max(1)
        };
        if due && labeled.len() >= 2 {
            let mut fresh = Regressor::with_params(cfg.regressor, cfg.params.clone());
            fresh.fit(&labeled, seeds::mix(seeds::mix(cfg.seed, 0xF17), t as u64))?;
            let err = holdout_mse(&fresh, holdout)?;
            if curve.is_empty() {
                first_eval_round = t;
            }
            curve.push(err);
            model = Some(fresh);
            log::debug!("round {t}/{}: {kind}, holdout mse {err:.4}", cfg.horizon);
        } else {
            log::debug!("round {t}/{}: {kind}, no model yet", cfg.horizon);
        }
    }

    let final_model = model.ok_or_else(|| {
        Error::Config("the schedule never accumulated enough samples to train".into())
    })?;
    let report = RunReport::derive(
        cfg.name.clone(),
        cfg.fingerprint(),
        cfg.seed,
        first_eval_round,
        cfg.epsilon,
        MetricCurve::new(curve)?,
        &cfg.checkpoints,
        final_model.fingerprint()?,
    );
    Ok(RunOutcome {
        report,
        schedule,
        final_model,
    })
}

/// One stream of pools plus its oracle and holdout, shareable across runs.
#[derive(Clone)]
pub struct DataBundle {
    pub pools: Arc<Vec<Pool>>,
    pub oracle: Arc<dyn Oracle>,
    pub holdout: Arc<Holdout>,
}

/// Builds the data for a given data seed. Synthetic sources derive fresh
/// streams per seed; fixed datasets may ignore the seed.
pub trait StreamFactory: Sync {
    fn make(&self, data_seed: u64) -> Result<DataBundle>;
}

/// Synthetic stream factory.
pub struct SynthFactory(pub SynthConfig);

impl StreamFactory for SynthFactory {
    fn make(&self, data_seed: u64) -> Result<DataBundle> {
        let stream = crate::data::synth_pool_stream(&self.0, data_seed)?;
        Ok(DataBundle {
            pools: Arc::new(stream.pools),
            oracle: Arc::new(stream.oracle),
            holdout: Arc::new(stream.holdout),
        })
    }
}

/// A finished run within a comparison.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_name: String,
    pub data_seed: u64,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub config_a: String,
    pub config_b: String,
    pub test: PairedTTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub runs: usize,
    pub mean_curve: Vec<f64>,
    pub mean_auc: f64,
    pub mean_log_auc: f64,
    pub mean_asd: Option<f64>,
    pub mean_wasd: Option<f64>,
    /// Mean converged round over the runs that converged.
    pub mean_ftc: Option<f64>,
    pub ftc_never: usize,
    pub checkpoint_mse: Vec<(usize, Option<f64>)>,
    pub vs_baseline: Option<PairedTTest>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub pairwise: Vec<PairwiseResult>,
    pub bonferroni_m: usize,
    pub baseline: String,
    pub alpha: f64,
}

/// Aggregates per-config run reports and tests every pair of mean curves,
/// with the significance threshold split across all pairs. The baseline for
/// the per-row column is the first randomly-selecting config, else the
/// first config.
pub fn compare(
    groups: &[(String, Vec<&RunReport>)],
    checkpoints: &[usize],
    baseline_index: usize,
    alpha: f64,
) -> Result<Comparison> {
    if groups.is_empty() {
        return Err(Error::Config("nothing to compare".into()));
    }
    if groups.iter().any(|(_, rs)| rs.is_empty()) {
        return Err(Error::Config("comparison group without runs".into()));
    }
    let grid = {
        let r = groups[0].1[0];
        (r.first_eval_round, r.curve.len())
    };
    for (name, reports) in groups {
        for r in *&reports {
            if (r.first_eval_round, r.curve.len()) != grid {
                return Err(Error::Config(format!(
                    "config `{name}` was evaluated on a different round grid; \
                     comparisons need matching horizons"
                )));
            }
        }
    }

    let mean_over = |values: Vec<Option<f64>>| -> Option<f64> {
        let xs: Vec<f64> = values.iter().flatten().copied().collect();
        if xs.len() == values.len() && !xs.is_empty() {
            Some(xs.iter().sum::<f64>() / xs.len() as f64)
        } else {
            None
        }
    };

    let mut rows: Vec<ComparisonRow> = groups
        .iter()
        .map(|(name, reports)| {
            let n = reports.len() as f64;
            let mut mean_curve = vec![0.0; grid.1];
            for r in reports {
                for (acc, v) in mean_curve.iter_mut().zip(r.curve.values()) {
                    *acc += v / n;
                }
            }
            let converged: Vec<f64> = reports
                .iter()
                .filter_map(|r| r.ftc.map(|t| t as f64))
                .collect();
            let checkpoint_mse = checkpoints
                .iter()
                .map(|&round| {
                    let v = round
                        .checked_sub(grid.0)
                        .and_then(|i| mean_curve.get(i).copied());
                    (round, v)
                })
                .collect();
            ComparisonRow {
                name: name.clone(),
                runs: reports.len(),
                mean_auc: reports.iter().map(|r| r.auc).sum::<f64>() / n,
                mean_log_auc: reports.iter().map(|r| r.log_auc).sum::<f64>() / n,
                mean_asd: mean_over(reports.iter().map(|r| r.asd).collect()),
                mean_wasd: mean_over(reports.iter().map(|r| r.wasd).collect()),
                mean_ftc: if converged.is_empty() {
                    None
                } else {
                    Some(converged.iter().sum::<f64>() / converged.len() as f64)
                },
                ftc_never: reports.iter().filter(|r| r.ftc.is_none()).count(),
                checkpoint_mse,
                mean_curve,
                vs_baseline: None,
            }
        })
        .collect();

    let pairs = rows.len() * rows.len().saturating_sub(1) / 2;
    let m = pairs.max(1);
    let mut pairwise = Vec::with_capacity(pairs);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let test = paired_ttest_log(&rows[i].mean_curve, &rows[j].mean_curve, alpha, m)?;
            pairwise.push(PairwiseResult {
                config_a: rows[i].name.clone(),
                config_b: rows[j].name.clone(),
                test,
            });
        }
    }

    let baseline = rows
        .get(baseline_index)
        .ok_or_else(|| Error::Config("baseline index out of range".into()))?
        .name
        .clone();
    for i in 0..rows.len() {
        if i == baseline_index {
            continue;
        }
        let test = paired_ttest_log(
            &rows[i].mean_curve,
            &rows[baseline_index].mean_curve,
            alpha,
            m,
        )?;
        rows[i].vs_baseline = Some(test);
    }

    Ok(Comparison {
        rows,
        pairwise,
        bonferroni_m: m,
        baseline,
        alpha,
    })
}

/// Seeds used for a randomly-selecting arm: the provided data seeds first,
/// then derived extras up to the configured repeat count.
pub fn baseline_seeds(repeats: usize, data_seeds: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = data_seeds.iter().copied().take(repeats).collect();
    let anchor = data_seeds.first().copied().unwrap_or(0);
    let mut extra = 0u64;
    while out.len() < repeats {
        out.push(seeds::mix(anchor, 0xBA5E + extra));
        extra += 1;
    }
    out
}

type RunSink<'a> = Option<&'a (dyn Fn(&RunRecord, &RunOutcome) -> Result<()> + Sync)>;

/// Runs every config over its seed list (randomly-selecting configs run
/// `random_baseline_repeats` times) on streams shared per data seed, then
/// aggregates. `sink` sees every finished run; results are independent of
/// completion order.
pub fn run_comparison(
    factory: &dyn StreamFactory,
    cfgs: &[ExperimentConfig],
    data_seeds: &[u64],
    alpha: f64,
    sink: RunSink<'_>,
) -> Result<(Vec<RunRecord>, Comparison)> {
    if cfgs.is_empty() || data_seeds.is_empty() {
        return Err(Error::Config(
            "comparison needs at least one config and one data seed".into(),
        ));
    }
    let horizon = cfgs[0].horizon;
    for cfg in cfgs {
        cfg.validate()?;
        if cfg.horizon != horizon {
            return Err(Error::Config(format!(
                "config `{}` has horizon {} but the comparison runs at {}",
                cfg.name, cfg.horizon, horizon
            )));
        }
    }
    {
        let mut names = HashSet::new();
        for cfg in cfgs {
            if !names.insert(cfg.name.clone()) {
                return Err(Error::Config(format!(
                    "duplicate experiment name `{}`",
                    cfg.name
                )));
            }
        }
    }

    let mut plan: Vec<(usize, u64)> = Vec::new();
    for (i, cfg) in cfgs.iter().enumerate() {
        let seeds_for_cfg = if cfg.select_strategy == StrategyKind::Random {
            baseline_seeds(cfg.random_baseline_repeats, data_seeds)
        } else {
            data_seeds.to_vec()
        };
        for s in seeds_for_cfg {
            plan.push((i, s));
        }
    }

    let needed: HashSet<u64> = plan.iter().map(|(_, s)| *s).collect();
    let mut bundles: HashMap<u64, DataBundle> = HashMap::new();
    for s in needed {
        bundles.insert(s, factory.make(s)?);
    }

    let records: Vec<RunRecord> = plan
        .par_iter()
        .map(|&(cfg_idx, data_seed)| {
            let cfg = &cfgs[cfg_idx];
            let bundle = &bundles[&data_seed];
            let run_cfg = ExperimentConfig {
                seed: seeds::mix(cfg.seed, data_seed),
                ..cfg.clone()
            };
            let outcome = run_experiment(
                &bundle.pools,
                bundle.oracle.as_ref(),
                &bundle.holdout,
                &run_cfg,
            )
            .map_err(|e| Error::Run {
                name: cfg.name.clone(),
                fingerprint: run_cfg.fingerprint(),
                source: Box::new(e),
            })?;
            log::info!(
                "finished {} (data seed {data_seed}): log-auc {:.2}",
                cfg.name,
                outcome.report.log_auc
            );
            let record = RunRecord {
                config_name: cfg.name.clone(),
                data_seed,
                report: outcome.report.clone(),
            };
            if let Some(sink) = sink {
                sink(&record, &outcome)?;
            }
            Ok(record)
        })
        .collect::<Result<_>>()?;

    let baseline_index = cfgs
        .iter()
        .position(|c| c.select_strategy == StrategyKind::Random)
        .unwrap_or(0);
    let groups: Vec<(String, Vec<&RunReport>)> = cfgs
        .iter()
        .map(|cfg| {
            let reports = records
                .iter()
                .filter(|r| r.config_name == cfg.name)
                .map(|r| &r.report)
                .collect();
            (cfg.name.clone(), reports)
        })
        .collect();
    let comparison = compare(&groups, &cfgs[0].checkpoints, baseline_index, alpha)?;
    Ok((records, comparison))
}
