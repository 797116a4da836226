//! Model-free selection: random, Pareto non-dominance, max-min distance,
//! and cluster-representative picking.

use rand::seq::index::sample as index_sample;
use serde::{Deserialize, Serialize};

use super::SelectionRequest;
use crate::clustering::kmeans;
use crate::data::Pool;
use crate::error::{Error, Result};
use crate::seeds;
use crate::stats::euclidean;

/// Uniform without replacement, seeded.
pub fn select_random(req: &SelectionRequest<'_>) -> Result<Vec<usize>> {
    req.validate()?;
    let mut rng = seeds::rng(req.seed);
    Ok(index_sample(&mut rng, req.pool.len(), req.budget).into_vec())
}

/// Split of the feature indices into positively and negatively acting sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParetoSpec {
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

impl ParetoSpec {
    /// The two sets must partition 0..dim.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let mut seen = vec![false; dim];
        for &j in self.positive.iter().chain(&self.negative) {
            if j >= dim {
                return Err(Error::Config(format!(
                    "pareto feature index {j} out of range for dimension {dim}"
                )));
            }
            if seen[j] {
                return Err(Error::Config(format!(
                    "pareto feature index {j} listed twice"
                )));
            }
            seen[j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config(
                "pareto split must cover every feature".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
}

/// Pareto dominance of `x` over `x_prime`. Positive direction: at least as
/// high on every positive feature, at least as low on every negative one,
/// strictly better somewhere. Negative direction flips all inequalities.
pub fn pareto_dominates(x: &[f64], x_prime: &[f64], spec: &ParetoSpec, dir: Direction) -> bool {
    let (ge_set, le_set) = match dir {
        Direction::Positive => (&spec.positive, &spec.negative),
        Direction::Negative => (&spec.negative, &spec.positive),
    };
    let mut strict = false;
    for &j in ge_set {
        if x[j] < x_prime[j] {
            return false;
        }
        if x[j] > x_prime[j] {
            strict = true;
        }
    }
    for &j in le_set {
        if x[j] > x_prime[j] {
            return false;
        }
        if x[j] < x_prime[j] {
            strict = true;
        }
    }
    strict
}

/// Pool indices not dominated by any other pool sample in either direction.
pub fn non_dominated_set(pool: &Pool, spec: &ParetoSpec) -> Vec<usize> {
    let samples = pool.samples();
    (0..samples.len())
        .filter(|&i| {
            !samples.iter().enumerate().any(|(j, other)| {
                j != i
                    && (pareto_dominates(&other.features, &samples[i].features, spec, Direction::Positive)
                        || pareto_dominates(
                            &other.features,
                            &samples[i].features,
                            spec,
                            Direction::Negative,
                        ))
            })
        })
        .collect()
}

/// Non-dominated samples first; a budget overflow is resolved by a seeded
/// uniform draw from the non-dominated set, a shortfall by a seeded uniform
/// top-up from the dominated remainder.
pub fn select_pareto(req: &SelectionRequest<'_>, spec: &ParetoSpec) -> Result<Vec<usize>> {
    req.validate()?;
    spec.validate(req.pool.dim())?;
    let frontier = non_dominated_set(req.pool, spec);
    let b = req.budget;
    let mut rng = seeds::rng(req.seed);
    if frontier.len() >= b {
        let mut picked: Vec<usize> = index_sample(&mut rng, frontier.len(), b)
            .into_iter()
            .map(|i| frontier[i])
            .collect();
        picked.sort_unstable();
        Ok(picked)
    } else {
        let in_frontier: std::collections::HashSet<usize> = frontier.iter().copied().collect();
        let rest: Vec<usize> = (0..req.pool.len())
            .filter(|i| !in_frontier.contains(i))
            .collect();
        let mut fill: Vec<usize> = index_sample(&mut rng, rest.len(), b - frontier.len())
            .into_iter()
            .map(|i| rest[i])
            .collect();
        fill.sort_unstable();
        let mut picked = frontier;
        picked.extend(fill);
        Ok(picked)
    }
}

/// Sequential max-min distance picking on z-scored features (statistics of
/// pool and labeled samples together). Each pick maximizes the minimum
/// distance to the labeled samples plus the picks so far; with nothing to
/// refer to, the first pick is the sample farthest from the pool centroid.
/// Ties break to the lowest pool index.
pub fn select_distance(req: &SelectionRequest<'_>) -> Result<Vec<usize>> {
    req.validate()?;
    let scaler = req.joint_scaler();
    let pool_z: Vec<Vec<f64>> = req
        .pool
        .samples()
        .iter()
        .map(|s| scaler.transform(&s.features))
        .collect();
    let labeled_z: Vec<Vec<f64>> = req
        .labeled
        .entries()
        .iter()
        .map(|e| scaler.transform(&e.sample.features))
        .collect();

    let n = pool_z.len();
    let mut min_dist: Vec<f64> = vec![f64::INFINITY; n];
    for (i, p) in pool_z.iter().enumerate() {
        for l in &labeled_z {
            let d = euclidean(p, l);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
        }
    }

    let mut taken = vec![false; n];
    let mut picks = Vec::with_capacity(req.budget);
    for step in 0..req.budget {
        let pick = if step == 0 && labeled_z.is_empty() {
            let d = req.pool.dim();
            let mut centroid = vec![0.0; d];
            for p in &pool_z {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v;
                }
            }
            for c in centroid.iter_mut() {
                *c /= n as f64;
            }
            argmax_free(&taken, |i| euclidean(&pool_z[i], &centroid))
        } else {
            argmax_free(&taken, |i| min_dist[i])
        };
        taken[pick] = true;
        picks.push(pick);
        for i in 0..n {
            if !taken[i] {
                let d = euclidean(&pool_z[i], &pool_z[pick]);
                if d < min_dist[i] {
                    min_dist[i] = d;
                }
            }
        }
    }
    Ok(picks)
}

fn argmax_free(taken: &[bool], score: impl Fn(usize) -> f64) -> usize {
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..taken.len() {
        if taken[i] {
            continue;
        }
        let s = score(i);
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best
}

/// Clusters the pool, takes each cluster's medoid as its representative,
/// and runs max-min distance picking over the representatives. Falls back
/// to plain distance picking (with a warning) when the pool is too small to
/// cluster or the budget exceeds the representative count.
pub fn select_clustering(req: &SelectionRequest<'_>, k: usize) -> Result<Vec<usize>> {
    req.validate()?;
    if k == 0 {
        return Err(Error::Config("cluster count must be positive".into()));
    }
    if req.pool.len() < k || req.budget > k {
        log::warn!(
            "cluster selection infeasible (pool {}, k {k}, budget {}); using distance picking",
            req.pool.len(),
            req.budget
        );
        return select_distance(req);
    }
    let clustering = kmeans(req.pool.samples(), k, seeds::mix(req.seed, 0xC1))?;
    let mut reps = Vec::with_capacity(k);
    for cluster in 0..k {
        reps.push(clustering.medoid(cluster)?);
    }
    reps.sort_unstable();

    let rep_samples: Vec<_> = reps.iter().map(|&i| req.pool.samples()[i].clone()).collect();
    let rep_pool = Pool::new(req.pool.round(), rep_samples)?;
    let sub_req = SelectionRequest {
        pool: &rep_pool,
        labeled: req.labeled,
        model: req.model,
        budget: req.budget,
        seed: req.seed,
    };
    Ok(select_distance(&sub_req)?
        .into_iter()
        .map(|i| reps[i])
        .collect())
}
