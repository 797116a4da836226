//! Trainable regression models and committee machinery.
//!
//! One facade type, [`Regressor`], wraps seven model kinds behind a common
//! fit/predict surface. Linear kinds and knn standardize features with the
//! training-set statistics internally; tree ensembles consume raw features.
//! Committees bundle several fitted regressors, either bootstrap resamples
//! of one kind or a fixed roster of different kinds.

mod knn;
mod linear;
mod tree;

pub use tree::{fit_class_forest, ClassForest, TreeParams};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, Sample};
use crate::error::{Error, Result};
use crate::seeds;
use crate::stats::{mean, population_variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    Ols,
    Ridge,
    Lasso,
    Knn,
    Tree,
    RandomForest,
    GradientBoosting,
}

impl RegressorKind {
    pub fn name(&self) -> &'static str {
        match self {
            RegressorKind::Ols => "ols",
            RegressorKind::Ridge => "ridge",
            RegressorKind::Lasso => "lasso",
            RegressorKind::Knn => "knn",
            RegressorKind::Tree => "tree",
            RegressorKind::RandomForest => "random_forest",
            RegressorKind::GradientBoosting => "gradient_boosting",
        }
    }
}

impl std::str::FromStr for RegressorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ols" | "linear" => RegressorKind::Ols,
            "ridge" => RegressorKind::Ridge,
            "lasso" => RegressorKind::Lasso,
            "knn" => RegressorKind::Knn,
            "tree" => RegressorKind::Tree,
            "random_forest" => RegressorKind::RandomForest,
            "gradient_boosting" => RegressorKind::GradientBoosting,
            other => {
                return Err(Error::Config(format!("unknown regressor kind `{other}`")));
            }
        })
    }
}

impl std::fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Hyperparameters for all kinds; defaults are the fixed settings used
/// throughout the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub ridge_lambda: f64,
    pub lasso_lambda: f64,
    pub lasso_tol: f64,
    pub lasso_max_sweeps: usize,
    pub knn_k: usize,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    /// Features per split in the forest; default is ceil(d / 3).
    pub forest_features: Option<usize>,
    pub boost_stages: usize,
    pub boost_depth: usize,
    pub boost_learning_rate: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            ridge_lambda: 1.0,
            lasso_lambda: 0.1,
            lasso_tol: 1e-6,
            lasso_max_sweeps: 10_000,
            knn_k: 5,
            tree_max_depth: 10,
            tree_min_leaf: 2,
            forest_trees: 100,
            forest_features: None,
            boost_stages: 100,
            boost_depth: 3,
            boost_learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum FittedState {
    Linear(linear::LinearModel),
    Knn(knn::KnnModel),
    Tree(tree::RegressionTree),
    Forest(tree::ForestModel),
    Boost(tree::BoostModel),
}

/// A regression model; `fit` populates the state, `predict` is defined only
/// afterwards and is deterministic given the fitted state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Regressor {
    kind: RegressorKind,
    params: Hyperparams,
    dim: Option<usize>,
    state: Option<FittedState>,
}

impl Regressor {
    pub fn new(kind: RegressorKind) -> Self {
        Regressor {
            kind,
            params: Hyperparams::default(),
            dim: None,
            state: None,
        }
    }

    pub fn with_params(kind: RegressorKind, params: Hyperparams) -> Self {
        Regressor {
            kind,
            params,
            dim: None,
            state: None,
        }
    }

    pub fn kind(&self) -> RegressorKind {
        self.kind
    }

    pub fn params(&self) -> &Hyperparams {
        &self.params
    }

    pub fn is_fitted(&self) -> bool {
        self.state.is_some()
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn fit(&mut self, data: &LabeledSet, seed: u64) -> Result<()> {
        let xs: Vec<Vec<f64>> = data
            .entries()
            .iter()
            .map(|e| e.sample.features.clone())
            .collect();
        self.fit_xy(&xs, &data.labels(), seed)
    }

    /// Fits on a raw design matrix. Training is deterministic given the row
    /// order and seed; tree ensembles are additionally row-order invariant.
    pub fn fit_xy(&mut self, xs: &[Vec<f64>], ys: &[f64], seed: u64) -> Result<()> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                left: xs.len(),
                right: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                have: xs.len(),
            });
        }
        let d = xs[0].len();
        if xs.iter().any(|r| r.len() != d) {
            return Err(Error::Config("training rows mix dimensions".into()));
        }
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::Config("training labels must be finite".into()));
        }

        let p = &self.params;
        let tree_params = TreeParams {
            max_depth: p.tree_max_depth,
            min_leaf: p.tree_min_leaf,
            features_per_split: None,
        };
        let state = match self.kind {
            RegressorKind::Ols => FittedState::Linear(linear::fit_ols(xs, ys)?),
            RegressorKind::Ridge => {
                FittedState::Linear(linear::fit_ridge(xs, ys, p.ridge_lambda)?)
            }
            RegressorKind::Lasso => FittedState::Linear(linear::fit_lasso(
                xs,
                ys,
                p.lasso_lambda,
                p.lasso_tol,
                p.lasso_max_sweeps,
            )?),
            RegressorKind::Knn => FittedState::Knn(knn::fit_knn(xs, ys, p.knn_k)),
            RegressorKind::Tree => FittedState::Tree(tree::fit_tree(xs, ys, tree_params, None)),
            RegressorKind::RandomForest => {
                let per_split = p.forest_features.unwrap_or_else(|| d.div_ceil(3));
                let params = TreeParams {
                    features_per_split: Some(per_split.clamp(1, d)),
                    ..tree_params
                };
                FittedState::Forest(tree::fit_forest(xs, ys, p.forest_trees, params, seed)?)
            }
            RegressorKind::GradientBoosting => FittedState::Boost(tree::fit_boost(
                xs,
                ys,
                p.boost_stages,
                p.boost_depth,
                p.boost_learning_rate,
                p.tree_min_leaf,
            )),
        };
        self.dim = Some(d);
        self.state = Some(state);
        Ok(())
    }

    pub fn predict(&self, sample: &Sample) -> Result<f64> {
        self.predict_features(&sample.features)
    }

    pub fn predict_features(&self, x: &[f64]) -> Result<f64> {
        let state = self.state.as_ref().ok_or(Error::NotFitted)?;
        let expected = self.dim.unwrap_or(0);
        if x.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: x.len(),
            });
        }
        Ok(match state {
            FittedState::Linear(m) => m.predict(x),
            FittedState::Knn(m) => m.predict(x),
            FittedState::Tree(m) => m.predict(x),
            FittedState::Forest(m) => m.predict(x),
            FittedState::Boost(m) => m.predict(x),
        })
    }

    /// Coefficients and intercept in raw feature units; `None` for
    /// non-linear kinds or unfitted models.
    pub fn coefficients(&self) -> Option<(Vec<f64>, f64)> {
        match &self.state {
            Some(FittedState::Linear(m)) => Some(m.raw_coefficients()),
            _ => None,
        }
    }

    /// Inspection dump; layout is not a stability guarantee.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// Short stable digest of the fitted state.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(format!("{:016x}", seeds::hash_str(&self.to_json()?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitteeMode {
    /// Same kind, each member fitted on an independent bootstrap resample.
    Bootstrap,
    /// One member per roster kind, all fitted on the full data.
    Model,
}

/// The fixed roster used by model committees.
pub const MODEL_ROSTER: [RegressorKind; 6] = [
    RegressorKind::Ridge,
    RegressorKind::Lasso,
    RegressorKind::Ols,
    RegressorKind::RandomForest,
    RegressorKind::GradientBoosting,
    RegressorKind::Knn,
];

#[derive(Debug, Clone)]
pub struct Committee {
    mode: CommitteeMode,
    members: Vec<Regressor>,
}

impl Committee {
    /// Wraps already-fitted members, for callers that assemble their own
    /// ensembles (built committees enforce at least two members; this
    /// accepts any non-empty set).
    pub fn from_members(mode: CommitteeMode, members: Vec<Regressor>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("committee needs at least one member".into()));
        }
        if members.iter().any(|m| !m.is_fitted()) {
            return Err(Error::NotFitted);
        }
        Ok(Committee { mode, members })
    }

    pub fn mode(&self) -> CommitteeMode {
        self.mode
    }

    pub fn members(&self) -> &[Regressor] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Builds a fitted committee. Bootstrap mode honors `base_kind` and `c`;
/// model mode ignores both and fits the six-kind roster. Members consume
/// index-derived sub-seeds, so the result is independent of fit order.
pub fn build_committee(
    mode: CommitteeMode,
    base_kind: RegressorKind,
    c: usize,
    params: &Hyperparams,
    data: &LabeledSet,
    seed: u64,
) -> Result<Committee> {
    if data.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: data.len(),
        });
    }
    let xs: Vec<Vec<f64>> = data
        .entries()
        .iter()
        .map(|e| e.sample.features.clone())
        .collect();
    let ys = data.labels();

    let members: Vec<Regressor> = match mode {
        CommitteeMode::Bootstrap => {
            if c < 2 {
                return Err(Error::Config(format!(
                    "bootstrap committee needs at least 2 members, got {c}"
                )));
            }
            (0..c)
                .into_par_iter()
                .map(|i| {
                    let mut rng = seeds::rng(seeds::mix(seed, 2 * i as u64));
                    let n = xs.len();
                    let mut bx = Vec::with_capacity(n);
                    let mut by = Vec::with_capacity(n);
                    for _ in 0..n {
                        let j = rand::Rng::gen_range(&mut rng, 0..n);
                        bx.push(xs[j].clone());
                        by.push(ys[j]);
                    }
                    let mut member = Regressor::with_params(base_kind, params.clone());
                    member.fit_xy(&bx, &by, seeds::mix(seed, 2 * i as u64 + 1))?;
                    Ok(member)
                })
                .collect::<Result<_>>()?
        }
        CommitteeMode::Model => MODEL_ROSTER
            .into_par_iter()
            .enumerate()
            .map(|(i, kind)| {
                let mut member = Regressor::with_params(kind, params.clone());
                member.fit_xy(&xs, &ys, seeds::mix(seed, i as u64))?;
                Ok(member)
            })
            .collect::<Result<_>>()?,
    };
    Ok(Committee { mode, members })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitteeStats {
    pub mean: f64,
    pub variance: f64,
    pub member_predictions: Vec<f64>,
}

/// Member predictions on one sample with their mean and population variance.
pub fn committee_stats(committee: &Committee, sample: &Sample) -> Result<CommitteeStats> {
    let preds: Vec<f64> = committee
        .members()
        .iter()
        .map(|m| m.predict(sample))
        .collect::<Result<_>>()?;
    Ok(CommitteeStats {
        mean: mean(&preds),
        variance: population_variance(&preds),
        member_predictions: preds,
    })
}
