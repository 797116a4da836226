//! Budgeted sample selection.
//!
//! Every strategy answers the same question: given this round's pool, the
//! labeled set accumulated so far, and (when available) the current model,
//! which `budget` pool samples should be labeled next? Strategies are pure
//! given the request and seed and return pool indices in pick order.
//!
//! The model-free strategies (`random`, `pareto`, `di`, `cl`) work from the
//! first round; the model-aware ones (`pr`, `udi`, `ucl`, `umse`, `qbc_*`,
//! `emcm_*`) report themselves unavailable until they have what they need,
//! letting the caller fall back.

pub mod init;
pub mod select;

pub use init::{
    non_dominated_set, pareto_dominates, select_clustering, select_distance, select_pareto,
    select_random, Direction, ParetoSpec,
};
pub use select::{
    emcm_scores, entropy, qbc_scores, select_emcm, select_pr, select_qbc, select_ucl, select_udi,
    select_umse, udi_scores, umse_scores, Binning, EmcmConfig, UclConfig, UdiConfig,
};

use serde::{Deserialize, Serialize};

use crate::data::{LabeledSet, Pool};
use crate::error::{Error, Result};
use crate::regressors::{Hyperparams, Regressor, RegressorKind};
use crate::stats::Scaler;

/// Everything a strategy may look at. Holdout data is structurally absent.
#[derive(Clone, Copy)]
pub struct SelectionRequest<'a> {
    pub pool: &'a Pool,
    pub labeled: &'a LabeledSet,
    pub model: Option<&'a Regressor>,
    pub budget: usize,
    pub seed: u64,
}

impl<'a> SelectionRequest<'a> {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 || self.budget > self.pool.len() {
            return Err(Error::Budget {
                budget: self.budget,
                pool_size: self.pool.len(),
            });
        }
        if let Some(d) = self.labeled.dim() {
            if d != self.pool.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.pool.dim(),
                    actual: d,
                });
            }
        }
        Ok(())
    }

    /// Model reference or a strategy-unavailable error.
    pub(crate) fn fitted_model(&self) -> Result<&'a Regressor> {
        match self.model {
            Some(m) if m.is_fitted() => Ok(m),
            _ => Err(Error::StrategyUnavailable(
                "no fitted model available yet".into(),
            )),
        }
    }

    /// z-scoring statistics over pool and labeled samples together.
    pub(crate) fn joint_scaler(&self) -> Scaler {
        let d = self.pool.dim();
        let rows = self
            .pool
            .samples()
            .iter()
            .map(|s| s.features.as_slice())
            .chain(
                self.labeled
                    .entries()
                    .iter()
                    .map(|e| e.sample.features.as_slice()),
            );
        // Scaler::fit needs a cloneable iterator; collect once instead
        let collected: Vec<&[f64]> = rows.collect();
        Scaler::fit(collected.iter().copied(), d)
    }
}

/// The selectable strategies, one name per configuration key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Pareto,
    Di,
    Cl,
    Pr,
    Udi,
    Ucl,
    Umse,
    QbcBoot,
    QbcModel,
    EmcmBoot,
    EmcmModel,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 12] = [
        StrategyKind::Random,
        StrategyKind::Pareto,
        StrategyKind::Di,
        StrategyKind::Cl,
        StrategyKind::Pr,
        StrategyKind::Udi,
        StrategyKind::Ucl,
        StrategyKind::Umse,
        StrategyKind::QbcBoot,
        StrategyKind::QbcModel,
        StrategyKind::EmcmBoot,
        StrategyKind::EmcmModel,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Pareto => "pareto",
            StrategyKind::Di => "di",
            StrategyKind::Cl => "cl",
            StrategyKind::Pr => "pr",
            StrategyKind::Udi => "udi",
            StrategyKind::Ucl => "ucl",
            StrategyKind::Umse => "umse",
            StrategyKind::QbcBoot => "qbc_boot",
            StrategyKind::QbcModel => "qbc_model",
            StrategyKind::EmcmBoot => "emcm_boot",
            StrategyKind::EmcmModel => "emcm_model",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-strategy knobs with the defaults used throughout the experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyConfig {
    pub pareto: Option<ParetoSpec>,
    /// Cluster count for `cl` initialization.
    pub cl_clusters: usize,
    pub udi: UdiConfig,
    pub ucl: UclConfig,
    pub emcm: EmcmConfig,
    /// Bootstrap committee size.
    pub committee_size: usize,
    /// Model kind for bootstrap committees, normally the main regressor.
    pub base_kind: RegressorKind,
    /// Hyperparameters for committee members and surrogates.
    pub params: Hyperparams,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            pareto: None,
            cl_clusters: 20,
            udi: UdiConfig::default(),
            ucl: UclConfig::default(),
            emcm: EmcmConfig::default(),
            committee_size: 10,
            base_kind: RegressorKind::RandomForest,
            params: Hyperparams::default(),
        }
    }
}

/// Dispatches a request to the named strategy.
pub fn select(
    kind: StrategyKind,
    req: &SelectionRequest<'_>,
    cfg: &StrategyConfig,
) -> Result<Vec<usize>> {
    match kind {
        StrategyKind::Random => select_random(req),
        StrategyKind::Pareto => {
            let spec = cfg.pareto.as_ref().ok_or_else(|| {
                Error::Config("pareto strategy needs a positive/negative feature split".into())
            })?;
            select_pareto(req, spec)
        }
        StrategyKind::Di => select_distance(req),
        StrategyKind::Cl => select_clustering(req, cfg.cl_clusters),
        StrategyKind::Pr => select_pr(req),
        StrategyKind::Udi => select_udi(req, &cfg.udi, &cfg.params),
        StrategyKind::Ucl => select_ucl(req, &cfg.ucl),
        StrategyKind::Umse => select_umse(req),
        StrategyKind::QbcBoot => select_qbc(
            req,
            crate::regressors::CommitteeMode::Bootstrap,
            cfg.base_kind,
            cfg.committee_size,
            &cfg.params,
        ),
        StrategyKind::QbcModel => select_qbc(
            req,
            crate::regressors::CommitteeMode::Model,
            cfg.base_kind,
            cfg.committee_size,
            &cfg.params,
        ),
        StrategyKind::EmcmBoot => select_emcm(
            req,
            crate::regressors::CommitteeMode::Bootstrap,
            cfg.base_kind,
            cfg.committee_size,
            &cfg.emcm,
            &cfg.params,
        ),
        StrategyKind::EmcmModel => select_emcm(
            req,
            crate::regressors::CommitteeMode::Model,
            cfg.base_kind,
            cfg.committee_size,
            &cfg.emcm,
            &cfg.params,
        ),
    }
}

/// Indices of the `b` highest scores; ties break to the lowest index.
pub(crate) fn top_b_by_score(scores: &[f64], b: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx.truncate(b);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_names_round_trip() {
        for kind in StrategyKind::ALL {
            let parsed: StrategyKind = kind.name().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("nope".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn top_b_breaks_ties_to_lowest_index() {
        assert_eq!(top_b_by_score(&[1.0, 3.0, 3.0, 2.0], 2), vec![1, 2]);
        assert_eq!(top_b_by_score(&[5.0, 5.0, 5.0], 3), vec![0, 1, 2]);
        assert_eq!(top_b_by_score(&[0.0, 1.0], 1), vec![1]);
    }
}
