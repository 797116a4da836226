//! Harness configuration: one TOML file describing the data source, the
//! output location, and the experiment arms. Every field has a default, so
//! a minimal file is a data source plus one experiment name.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use poolal::data::{
    assemble_samples, default_pareto_partition, impute, ingest_sensor_csv, AttrDomain, AttrKind,
    AttributeSpec, Holdout, Pool, Sample, SensorSchema, SynthConfig,
};
use poolal::regressors::{Hyperparams, RegressorKind};
use poolal::scheduler::{DataBundle, ExperimentConfig, MapOracle, StreamFactory, SynthFactory};
use poolal::strategies::{Binning, EmcmConfig, ParetoSpec, StrategyKind, UclConfig, UdiConfig};
use poolal::{seeds, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    /// Data seeds; every non-random experiment runs once per seed.
    pub seeds: Vec<u64>,
    /// Base significance level before the multiple-comparison split.
    pub alpha: f64,
    pub output: OutputConfig,
    pub data: DataConfig,
    #[serde(rename = "experiment")]
    pub experiments: Vec<ExperimentToml>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seeds: vec![42],
            alpha: 0.05,
            output: OutputConfig::default(),
            data: DataConfig::default(),
            experiments: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Worker threads for independent runs; 0 means all cores.
    pub parallelism: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            parallelism: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// `synthetic` or `csv`.
    pub source: String,
    pub synthetic: SynthConfig,
    pub csv: Option<CsvDataConfig>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            source: "synthetic".into(),
            synthetic: SynthConfig::default(),
            csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvDataConfig {
    pub sensors: Vec<SensorSource>,
    pub label_file: PathBuf,
    pub label_column: String,
    #[serde(default = "default_holdout_fraction")]
    pub holdout_fraction: f64,
}

fn default_holdout_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSource {
    pub path: PathBuf,
    pub schema: PathBuf,
}

/// Sensor schema file: a sensor name plus attribute entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaToml {
    pub sensor: String,
    #[serde(rename = "attribute")]
    pub attributes: Vec<AttributeToml>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeToml {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub interval: Option<[f64; 2]>,
    #[serde(default)]
    pub values: Option<Vec<String>>,
}

impl AttributeToml {
    fn to_spec(&self) -> Result<AttributeSpec> {
        let kind = match self.kind.as_str() {
            "numeric" => AttrKind::Numeric,
            "binary" => AttrKind::Binary,
            "categorical" => AttrKind::Categorical,
            other => {
                return Err(Error::Config(format!(
                    "attribute `{}`: unknown kind `{other}`",
                    self.name
                )))
            }
        };
        let domain = match (&self.interval, &self.values) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(format!(
                    "attribute `{}`: interval and values are mutually exclusive",
                    self.name
                )))
            }
            (Some([lo, hi]), None) => Some(AttrDomain::Interval { lo: *lo, hi: *hi }),
            (None, Some(vs)) => Some(AttrDomain::Values(vs.clone())),
            (None, None) => None,
        };
        Ok(AttributeSpec {
            name: self.name.clone(),
            kind,
            domain,
        })
    }
}

/// One experiment arm as written in the config file. Sub-strategy knobs are
/// flat keys; model hyperparameters live in an optional `params` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentToml {
    pub name: String,
    pub horizon: usize,
    pub budget: usize,
    pub init_rounds: usize,
    pub init: String,
    pub select: String,
    pub regressor: String,
    pub params: Hyperparams,
    pub committee_size: usize,
    pub emcm_mu: f64,
    pub udi_bins: usize,
    pub udi_binning: String,
    pub ucl_clusters: usize,
    pub ucl_top_clusters: usize,
    pub cl_clusters: usize,
    pub pareto_positive: Vec<String>,
    pub pareto_negative: Vec<String>,
    pub epsilon: f64,
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    pub random_baseline_repeats: usize,
    pub fit_every_round: bool,
}

impl Default for ExperimentToml {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        ExperimentToml {
            name: String::new(),
            horizon: base.horizon,
            budget: base.budget,
            init_rounds: base.init_rounds,
            init: base.init_strategy.to_string(),
            select: base.select_strategy.to_string(),
            regressor: base.regressor.to_string(),
            params: base.params,
            committee_size: base.committee_size,
            emcm_mu: base.emcm.learning_rate,
            udi_bins: base.udi.bins,
            udi_binning: "equal_frequency".into(),
            ucl_clusters: base.ucl.clusters,
            ucl_top_clusters: base.ucl.top_clusters,
            cl_clusters: base.cl_clusters,
            pareto_positive: Vec::new(),
            pareto_negative: Vec::new(),
            epsilon: base.epsilon,
            checkpoints: base.checkpoints,
            seed: base.seed,
            random_baseline_repeats: base.random_baseline_repeats,
            fit_every_round: base.fit_every_round,
        }
    }
}

impl ExperimentToml {
    /// Resolves strategy names and Pareto feature names against the data's
    /// feature list.
    pub fn to_config(&self, feature_names: &[String]) -> Result<ExperimentConfig> {
        let init_strategy: StrategyKind = self.init.parse()?;
        let select_strategy: StrategyKind = self.select.parse()?;
        let regressor: RegressorKind = self.regressor.parse()?;
        let binning = match self.udi_binning.as_str() {
            "equal_frequency" => Binning::EqualFrequency,
            "equal_width" => Binning::EqualWidth,
            other => {
                return Err(Error::Config(format!(
                    "experiment `{}`: unknown udi_binning `{other}`",
                    self.name
                )))
            }
        };

        let needs_pareto = init_strategy == StrategyKind::Pareto
            || select_strategy == StrategyKind::Pareto;
        let pareto = if !self.pareto_positive.is_empty() || !self.pareto_negative.is_empty() {
            let index_of = |name: &String| -> Result<usize> {
                feature_names
                    .iter()
                    .position(|f| f == name)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "experiment `{}`: pareto feature `{name}` is not a data feature",
                            self.name
                        ))
                    })
            };
            let spec = ParetoSpec {
                positive: self.pareto_positive.iter().map(index_of).collect::<Result<_>>()?,
                negative: self.pareto_negative.iter().map(index_of).collect::<Result<_>>()?,
            };
            spec.validate(feature_names.len())?;
            Some(spec)
        } else if needs_pareto {
            // fall back to the synthetic herd's built-in partition
            let (positive, negative) = default_pareto_partition(feature_names);
            let spec = ParetoSpec { positive, negative };
            spec.validate(feature_names.len()).map_err(|_| {
                Error::Config(format!(
                    "experiment `{}`: pareto strategy needs pareto_positive/pareto_negative",
                    self.name
                ))
            })?;
            Some(spec)
        } else {
            None
        };

        let cfg = ExperimentConfig {
            name: self.name.clone(),
            horizon: self.horizon,
            budget: self.budget,
            init_rounds: self.init_rounds,
            init_strategy,
            select_strategy,
            regressor,
            params: self.params.clone(),
            committee_size: self.committee_size,
            emcm: EmcmConfig {
                learning_rate: self.emcm_mu,
            },
            udi: UdiConfig {
                bins: self.udi_bins,
                binning,
            },
            ucl: UclConfig {
                clusters: self.ucl_clusters,
                top_clusters: self.ucl_top_clusters,
            },
            cl_clusters: self.cl_clusters,
            pareto,
            epsilon: self.epsilon,
            checkpoints: self.checkpoints.clone(),
            seed: self.seed,
            random_baseline_repeats: self.random_baseline_repeats,
            fit_every_round: self.fit_every_round,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_harness_config(path: &Path) -> Result<HarnessConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
    let cfg: HarnessConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(cfg)
}

pub fn load_schema(path: &Path) -> Result<SensorSchema> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
    let schema: SchemaToml =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let attrs = schema
        .attributes
        .iter()
        .map(|a| a.to_spec())
        .collect::<Result<Vec<_>>>()?;
    SensorSchema::new(&schema.sensor, attrs)
}

/// Validated, loadable data plus the per-experiment configs.
pub struct ResolvedHarness {
    pub harness: HarnessConfig,
    pub factory: Box<dyn StreamFactory + Send>,
    pub feature_names: Vec<String>,
    pub experiments: Vec<ExperimentConfig>,
}

/// A fixed dataset served identically for every data seed.
pub struct FixedFactory(pub DataBundle);

impl StreamFactory for FixedFactory {
    fn make(&self, _data_seed: u64) -> Result<DataBundle> {
        Ok(self.0.clone())
    }
}

fn load_csv_bundle(
    cfg: &CsvDataConfig,
    base_dir: &Path,
    split_seed: u64,
) -> Result<(DataBundle, Vec<String>)> {
    if cfg.sensors.is_empty() {
        return Err(Error::Config("data.csv.sensors must not be empty".into()));
    }
    if !(0.0..1.0).contains(&cfg.holdout_fraction) {
        return Err(Error::Config(
            "data.csv.holdout_fraction must be in [0, 1)".into(),
        ));
    }
    let resolve = |p: &Path| -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    };

    let mut streams = Vec::new();
    for sensor in &cfg.sensors {
        let schema = load_schema(&resolve(&sensor.schema))?;
        let events = ingest_sensor_csv(&resolve(&sensor.path), &schema)?;
        streams.push((schema, events));
    }
    let assembled = assemble_samples(&streams)?;
    let samples = impute(&assembled)?;
    if samples.is_empty() {
        return Err(Error::Config("csv data produced no samples".into()));
    }

    let labels = load_labels(&resolve(&cfg.label_file), &cfg.label_column)?;

    // seeded sample-level split; the holdout is never pooled
    let mut order: Vec<usize> = (0..samples.len()).collect();
    use rand::seq::SliceRandom;
    order.shuffle(&mut seeds::rng(seeds::mix(split_seed, 0x401D)));
    let holdout_n = (samples.len() as f64 * cfg.holdout_fraction).round() as usize;
    let holdout_idx: std::collections::HashSet<usize> =
        order[..holdout_n].iter().copied().collect();

    let mut holdout_samples = Vec::with_capacity(holdout_n);
    let mut holdout_labels = Vec::with_capacity(holdout_n);
    let mut by_round: HashMap<u64, Vec<Sample>> = HashMap::new();
    for (i, s) in samples.into_iter().enumerate() {
        if holdout_idx.contains(&i) {
            let y = labels
                .get(&(s.case_id.clone(), s.timestamp))
                .copied()
                .ok_or_else(|| {
                    Error::Config(format!(
                        "label file has no label for ({}, t={})",
                        s.case_id, s.timestamp
                    ))
                })?;
            holdout_labels.push(y);
            holdout_samples.push(s);
        } else {
            by_round.entry(s.timestamp).or_default().push(s);
        }
    }
    let mut timestamps: Vec<u64> = by_round.keys().copied().collect();
    timestamps.sort_unstable();
    let pools = timestamps
        .iter()
        .enumerate()
        .map(|(i, ts)| Pool::new(i + 1, by_round.remove(ts).unwrap()))
        .collect::<Result<Vec<_>>>()?;

    let oracle = MapOracle::new(labels);
    oracle.validate_covers(&pools)?;

    let feature_names: Vec<String> = assembled.feature_names.to_vec();
    Ok((
        DataBundle {
            pools: Arc::new(pools),
            oracle: Arc::new(oracle),
            holdout: Arc::new(Holdout {
                samples: holdout_samples,
                labels: holdout_labels,
            }),
        },
        feature_names,
    ))
}

fn load_labels(path: &Path, column: &str) -> Result<HashMap<(String, u64), f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| {
                Error::Config(format!(
                    "label file `{}`: missing column `{name}`",
                    path.display()
                ))
            })
    };
    let case_col = find("case_id")?;
    let ts_col = find("timestamp")?;
    let label_col = find(column)?;
    let mut labels = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let case = record.get(case_col).unwrap_or("").trim().to_string();
        let ts: u64 = record
            .get(ts_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Row {
                line,
                message: "unparseable timestamp in label file".into(),
            })?;
        let y: f64 = record
            .get(label_col)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| Error::Row {
                line,
                message: format!("unparseable `{column}` value in label file"),
            })?;
        labels.insert((case, ts), y);
    }
    Ok(labels)
}

/// Parses, loads, and cross-validates everything `run` needs. Every error
/// out of here is a configuration problem.
pub fn resolve(path: &Path) -> Result<ResolvedHarness> {
    let harness = load_harness_config(path)?;
    if harness.experiments.is_empty() {
        return Err(Error::Config("at least one [[experiment]] is required".into()));
    }
    if harness.seeds.is_empty() {
        return Err(Error::Config("seeds must not be empty".into()));
    }
    if !(0.0 < harness.alpha && harness.alpha < 1.0) {
        return Err(Error::Config("alpha must be in (0, 1)".into()));
    }
    {
        let mut names = std::collections::HashSet::new();
        for e in &harness.experiments {
            if e.name.is_empty() {
                return Err(Error::Config("every experiment needs a name".into()));
            }
            if !names.insert(e.name.clone()) {
                return Err(Error::Config(format!("duplicate experiment name `{}`", e.name)));
            }
        }
    }

    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let (factory, feature_names, min_pool, horizon): (
        Box<dyn StreamFactory + Send>,
        Vec<String>,
        usize,
        usize,
    ) = match harness.data.source.as_str() {
        "synthetic" => {
            let synth = harness.data.synthetic.clone();
            synth.validate()?;
            let names = poolal::data::synth_feature_names(synth.dim).to_vec();
            let (min_pool, horizon) = (synth.pool_size, synth.rounds);
            (Box::new(SynthFactory(synth)), names, min_pool, horizon)
        }
        "csv" => {
            let csv_cfg = harness
                .data
                .csv
                .as_ref()
                .ok_or_else(|| Error::Config("data.source is csv but [data.csv] is missing".into()))?;
            let (bundle, names) = load_csv_bundle(csv_cfg, &base_dir, harness.seeds[0])?;
            let min_pool = bundle.pools.iter().map(|p| p.len()).min().unwrap_or(0);
            let horizon = bundle.pools.len();
            (Box::new(FixedFactory(bundle)), names, min_pool, horizon)
        }
        other => {
            return Err(Error::Config(format!(
                "data.source must be `synthetic` or `csv`, got `{other}`"
            )))
        }
    };

    let mut experiments = Vec::with_capacity(harness.experiments.len());
    for exp in &harness.experiments {
        let cfg = exp.to_config(&feature_names)?;
        if cfg.horizon != horizon {
            return Err(Error::Config(format!(
                "experiment `{}`: horizon {} does not match the data stream's {} rounds",
                cfg.name, cfg.horizon, horizon
            )));
        }
        if cfg.init_rounds >= cfg.horizon {
            return Err(Error::Config(format!(
                "experiment `{}`: init_rounds {} must be below horizon {}",
                cfg.name, cfg.init_rounds, cfg.horizon
            )));
        }
        if cfg.budget > min_pool {
            return Err(Error::Config(format!(
                "experiment `{}`: budget {} exceeds the smallest pool ({min_pool})",
                cfg.name, cfg.budget
            )));
        }
        experiments.push(cfg);
    }

    Ok(ResolvedHarness {
        harness,
        factory,
        feature_names,
        experiments,
    })
}
