//! Model-aware selection: prediction novelty, discretized-label entropy,
//! cluster-variance screening, inverse-distance-weighted error, committee
//! disagreement, and estimated model change.

use serde::{Deserialize, Serialize};

use super::{top_b_by_score, SelectionRequest};
use crate::clustering::kmeans;
use crate::error::{Error, Result};
use crate::regressors::{
    build_committee, committee_stats, fit_class_forest, Committee, CommitteeMode, Hyperparams,
    RegressorKind, TreeParams,
};
use crate::seeds;
use crate::stats::{euclidean, population_variance, Scaler};

/// Picks samples whose predicted value is far from every known label.
/// Sequential: each pick's prediction joins the reference label set so one
/// round does not fill up with near-duplicates.
pub fn select_pr(req: &SelectionRequest<'_>) -> Result<Vec<usize>> {
    req.validate()?;
    let model = req.fitted_model()?;
    if req.labeled.is_empty() {
        return Err(Error::StrategyUnavailable(
            "prediction-novelty picking needs at least one known label".into(),
        ));
    }
    let preds: Vec<f64> = req
        .pool
        .samples()
        .iter()
        .map(|s| model.predict(s))
        .collect::<Result<_>>()?;
    let mut min_gap: Vec<f64> = preds
        .iter()
        .map(|p| {
            req.labeled
                .labels()
                .iter()
                .map(|y| (p - y).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let n = preds.len();
    let mut taken = vec![false; n];
    let mut picks = Vec::with_capacity(req.budget);
    for _ in 0..req.budget {
        let mut best = usize::MAX;
        let mut best_gap = f64::NEG_INFINITY;
        for i in 0..n {
            if !taken[i] && min_gap[i] > best_gap {
                best_gap = min_gap[i];
                best = i;
            }
        }
        taken[best] = true;
        picks.push(best);
        for i in 0..n {
            if !taken[i] {
                min_gap[i] = min_gap[i].min((preds[i] - preds[best]).abs());
            }
        }
    }
    Ok(picks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    EqualWidth,
    EqualFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UdiConfig {
    pub bins: usize,
    pub binning: Binning,
}

impl Default for UdiConfig {
    fn default() -> Self {
        UdiConfig {
            bins: 5,
            binning: Binning::EqualFrequency,
        }
    }
}

/// Shannon entropy in nats; zero terms contribute nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| p * p.ln())
        .sum::<f64>()
}

fn bin_labels(labels: &[f64], cfg: &UdiConfig) -> Result<Vec<usize>> {
    let b = cfg.bins;
    if b < 2 {
        return Err(Error::Config("label binning needs at least 2 bins".into()));
    }
    let classes: Vec<usize> = match cfg.binning {
        Binning::EqualWidth => {
            let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let width = (hi - lo) / b as f64;
            labels
                .iter()
                .map(|y| {
                    if width == 0.0 {
                        0
                    } else {
                        (((y - lo) / width) as usize).min(b - 1)
                    }
                })
                .collect()
        }
        Binning::EqualFrequency => {
            let mut sorted = labels.to_vec();
            sorted.sort_by(f64::total_cmp);
            let n = sorted.len();
            let edges: Vec<f64> = (1..b).map(|j| sorted[j * n / b]).collect();
            labels
                .iter()
                .map(|y| edges.iter().filter(|e| *y >= **e).count())
                .collect()
        }
    };
    let distinct = {
        let mut present = vec![false; b];
        for &c in &classes {
            present[c] = true;
        }
        present.iter().filter(|p| **p).count()
    };
    if distinct < 2 {
        return Err(Error::StrategyDegenerate(
            "all labels fall into one bin".into(),
        ));
    }
    Ok(classes)
}

/// Classification entropy of a forest surrogate fitted on binned labels.
pub fn udi_scores(
    req: &SelectionRequest<'_>,
    cfg: &UdiConfig,
    params: &Hyperparams,
) -> Result<Vec<f64>> {
    req.validate()?;
    if req.labeled.len() < 2 {
        return Err(Error::StrategyUnavailable(
            "label discretization needs at least two labeled samples".into(),
        ));
    }
    let classes = bin_labels(&req.labeled.labels(), cfg)?;
    let xs: Vec<Vec<f64>> = req
        .labeled
        .entries()
        .iter()
        .map(|e| e.sample.features.clone())
        .collect();
    let d = xs[0].len();
    let tree_params = TreeParams {
        max_depth: params.tree_max_depth,
        min_leaf: params.tree_min_leaf,
        features_per_split: Some(
            params
                .forest_features
                .unwrap_or_else(|| d.div_ceil(3))
                .clamp(1, d),
        ),
    };
    let surrogate = fit_class_forest(
        &xs,
        &classes,
        cfg.bins,
        params.forest_trees,
        tree_params,
        seeds::mix(req.seed, 0x0D1),
    )?;
    Ok(req
        .pool
        .samples()
        .iter()
        .map(|s| entropy(&surrogate.predict_proba(&s.features)))
        .collect())
}

pub fn select_udi(
    req: &SelectionRequest<'_>,
    cfg: &UdiConfig,
    params: &Hyperparams,
) -> Result<Vec<usize>> {
    Ok(top_b_by_score(&udi_scores(req, cfg, params)?, req.budget))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct UclConfig {
    /// Cluster count over the pool.
    pub clusters: usize,
    /// How many of the highest prediction-variance clusters to keep.
    pub top_clusters: usize,
}

impl Default for UclConfig {
    fn default() -> Self {
        UclConfig {
            clusters: 20,
            top_clusters: 5,
        }
    }
}

/// Clusters the pool, keeps the clusters where model predictions vary most,
/// and inside them picks the samples with the lowest silhouette. Falls back
/// to random picking (with a warning) when the pool cannot be clustered.
pub fn select_ucl(req: &SelectionRequest<'_>, cfg: &UclConfig) -> Result<Vec<usize>> {
    req.validate()?;
    let model = req.fitted_model()?;
    if cfg.clusters < 2 || cfg.top_clusters == 0 || cfg.top_clusters > cfg.clusters {
        return Err(Error::Config(format!(
            "cluster screening needs 2 <= clusters and 1 <= top_clusters <= clusters, got {} and {}",
            cfg.clusters, cfg.top_clusters
        )));
    }
    if req.pool.len() < cfg.clusters {
        log::warn!(
            "pool of {} too small for {} clusters; using random picking",
            req.pool.len(),
            cfg.clusters
        );
        return super::select_random(req);
    }
    let clustering = kmeans(req.pool.samples(), cfg.clusters, seeds::mix(req.seed, 0x0C1))?;
    let preds: Vec<f64> = req
        .pool
        .samples()
        .iter()
        .map(|s| model.predict(s))
        .collect::<Result<_>>()?;

    let mut variances: Vec<(f64, usize)> = (0..cfg.clusters)
        .map(|c| {
            let member_preds: Vec<f64> = clustering.members(c).iter().map(|&i| preds[i]).collect();
            (population_variance(&member_preds), c)
        })
        .collect();
    variances.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let chosen: Vec<usize> = variances[..cfg.top_clusters].iter().map(|(_, c)| *c).collect();

    let mut ranked: Vec<(f64, usize)> = Vec::new();
    for &c in &chosen {
        for i in clustering.members(c) {
            ranked.push((clustering.silhouette(i)?, i));
        }
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut picks: Vec<usize> = ranked.iter().take(req.budget).map(|(_, i)| *i).collect();

    if picks.len() < req.budget {
        // tiny chosen clusters: extend by silhouette over the rest of the pool
        let in_picks: std::collections::HashSet<usize> = picks.iter().copied().collect();
        let mut rest: Vec<(f64, usize)> = (0..req.pool.len())
            .filter(|i| !in_picks.contains(i))
            .map(|i| Ok((clustering.silhouette(i)?, i)))
            .collect::<Result<_>>()?;
        rest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        picks.extend(rest.iter().take(req.budget - picks.len()).map(|(_, i)| *i));
    }
    Ok(picks)
}

/// Inverse-distance-weighted mean of labeled squared errors; distances are
/// Euclidean on z-scored features (pool and labeled statistics together).
/// A candidate coinciding with labeled samples takes the mean of exactly
/// those samples' squared errors, matching the limit of the weighted form.
pub fn umse_scores(req: &SelectionRequest<'_>) -> Result<Vec<f64>> {
    req.validate()?;
    let model = req.fitted_model()?;
    if req.labeled.is_empty() {
        return Err(Error::StrategyUnavailable(
            "error-weighted picking needs labeled samples".into(),
        ));
    }
    let scaler = req.joint_scaler();
    let labeled_z: Vec<Vec<f64>> = req
        .labeled
        .entries()
        .iter()
        .map(|e| scaler.transform(&e.sample.features))
        .collect();
    let sq_errors: Vec<f64> = req
        .labeled
        .entries()
        .iter()
        .map(|e| {
            let r = e.label - model.predict(&e.sample)?;
            Ok(r * r)
        })
        .collect::<Result<_>>()?;

    req.pool
        .samples()
        .iter()
        .map(|s| {
            let z = scaler.transform(&s.features);
            let mut coincident_sum = 0.0;
            let mut coincident_n = 0usize;
            let mut num = 0.0;
            let mut den = 0.0;
            for (lz, e2) in labeled_z.iter().zip(&sq_errors) {
                let d = euclidean(&z, lz);
                if d == 0.0 {
                    coincident_sum += e2;
                    coincident_n += 1;
                } else {
                    num += e2 / d;
                    den += 1.0 / d;
                }
            }
            Ok(if coincident_n > 0 {
                coincident_sum / coincident_n as f64
            } else {
                num / den
            })
        })
        .collect()
}

pub fn select_umse(req: &SelectionRequest<'_>) -> Result<Vec<usize>> {
    Ok(top_b_by_score(&umse_scores(req)?, req.budget))
}

/// Committee disagreement: population variance of member predictions.
pub fn qbc_scores(req: &SelectionRequest<'_>, committee: &Committee) -> Result<Vec<f64>> {
    req.validate()?;
    req.pool
        .samples()
        .iter()
        .map(|s| Ok(committee_stats(committee, s)?.variance))
        .collect()
}

pub fn select_qbc(
    req: &SelectionRequest<'_>,
    mode: CommitteeMode,
    base_kind: RegressorKind,
    committee_size: usize,
    params: &Hyperparams,
) -> Result<Vec<usize>> {
    req.validate()?;
    if req.labeled.len() < 2 {
        return Err(Error::StrategyUnavailable(
            "committee disagreement needs at least two labeled samples".into(),
        ));
    }
    let committee = build_committee(
        mode,
        base_kind,
        committee_size,
        params,
        req.labeled,
        seeds::mix(req.seed, 0x9BC),
    )?;
    Ok(top_b_by_score(&qbc_scores(req, &committee)?, req.budget))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmcmConfig {
    /// Gradient-step learning rate in the model-change estimate.
    pub learning_rate: f64,
}

impl Default for EmcmConfig {
    fn default() -> Self {
        EmcmConfig {
            learning_rate: 0.01,
        }
    }
}

/// Estimated squared model change if the candidate were labeled: the
/// committee supplies label guesses, the main model the current prediction,
/// and the gradient direction is the standardized feature vector with an
/// intercept coordinate (labeled-set statistics).
pub fn emcm_scores(
    req: &SelectionRequest<'_>,
    committee: &Committee,
    learning_rate: f64,
) -> Result<Vec<f64>> {
    req.validate()?;
    let model = req.fitted_model()?;
    if learning_rate <= 0.0 {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let d = req.pool.dim();
    let scaler = {
        let rows: Vec<&[f64]> = req
            .labeled
            .entries()
            .iter()
            .map(|e| e.sample.features.as_slice())
            .collect();
        Scaler::fit(rows.iter().copied(), d)
    };
    req.pool
        .samples()
        .iter()
        .map(|s| {
            let mut x = scaler.transform(&s.features);
            x.push(1.0);
            let main = model.predict(s)?;
            let mut total = 0.0;
            for member in committee.members() {
                let delta = main - member.predict(s)?;
                let step = 2.0 * learning_rate * delta;
                total += x.iter().map(|v| (step * v) * (step * v)).sum::<f64>();
            }
            Ok(total / committee.size() as f64)
        })
        .collect()
}

pub fn select_emcm(
    req: &SelectionRequest<'_>,
    mode: CommitteeMode,
    base_kind: RegressorKind,
    committee_size: usize,
    cfg: &EmcmConfig,
    params: &Hyperparams,
) -> Result<Vec<usize>> {
    req.validate()?;
    req.fitted_model()?;
    if req.labeled.len() < 2 {
        return Err(Error::StrategyUnavailable(
            "model-change estimation needs at least two labeled samples".into(),
        ));
    }
    let committee = build_committee(
        mode,
        base_kind,
        committee_size,
        params,
        req.labeled,
        seeds::mix(req.seed, 0xECC),
    )?;
    Ok(top_b_by_score(
        &emcm_scores(req, &committee, cfg.learning_rate)?,
        req.budget,
    ))
}
