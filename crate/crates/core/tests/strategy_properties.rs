//! Property tests over every selection strategy, plus small-scale
//! brute-force oracles for the distance and frontier pickers.

use std::collections::HashSet;

use proptest::prelude::*;

use poolal::data::{anon_features, LabeledSet, Pool, Sample};
use poolal::regressors::{Hyperparams, Regressor, RegressorKind};
use poolal::strategies::{
    non_dominated_set, select, select_distance, umse_scores, ParetoSpec, SelectionRequest,
    StrategyConfig, StrategyKind,
};

fn build_pool(vectors: &[Vec<f64>]) -> Pool {
    let names = anon_features(vectors[0].len());
    let samples = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| Sample::new(format!("p{i}"), 1, v.clone(), names.clone()))
        .collect();
    Pool::new(1, samples).unwrap()
}

fn build_labeled(points: &[(Vec<f64>, f64)]) -> LabeledSet {
    let mut set = LabeledSet::new();
    if points.is_empty() {
        return set;
    }
    let names = anon_features(points[0].0.len());
    for (i, (x, y)) in points.iter().enumerate() {
        set.push(
            Sample::new(format!("l{i}"), 0, x.clone(), names.clone()),
            *y,
            0,
        )
        .unwrap();
    }
    set
}

fn fast_config(dim: usize) -> StrategyConfig {
    let mut params = Hyperparams::default();
    params.forest_trees = 10;
    params.boost_stages = 10;
    StrategyConfig {
        pareto: Some(ParetoSpec {
            positive: (0..dim / 2).collect(),
            negative: (dim / 2..dim).collect(),
        }),
        cl_clusters: 4,
        committee_size: 3,
        base_kind: RegressorKind::Tree,
        params,
        ..StrategyConfig::default()
    }
}

fn fixture(dim: usize, pool_n: usize, labeled_n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<(Vec<f64>, f64)>) {
    // simple deterministic pseudo-random fixture
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let pool: Vec<Vec<f64>> = (0..pool_n)
        .map(|_| (0..dim).map(|_| next() * 10.0).collect())
        .collect();
    let labeled: Vec<(Vec<f64>, f64)> = (0..labeled_n)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| next() * 10.0).collect();
            let y = x.iter().sum::<f64>() + next();
            (x, y)
        })
        .collect();
    (pool, labeled)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every strategy returns exactly `budget` distinct pool indices and is
    /// deterministic under a fixed seed.
    #[test]
    fn strategies_return_b_distinct_deterministic_picks(
        seed in 0u64..1000,
        dim in 2usize..5,
        pool_n in 6usize..24,
        budget_frac in 0.1f64..1.0,
    ) {
        let (pool_vecs, labeled_pts) = fixture(dim, pool_n, 8, seed);
        let pool = build_pool(&pool_vecs);
        let labeled = build_labeled(&labeled_pts);
        let mut model = Regressor::new(RegressorKind::Tree);
        model.fit(&labeled, seed).unwrap();
        let budget = ((pool_n as f64 * budget_frac) as usize).clamp(1, pool_n);
        let cfg = fast_config(dim);
        let req = SelectionRequest {
            pool: &pool,
            labeled: &labeled,
            model: Some(&model),
            budget,
            seed,
        };
        for kind in StrategyKind::ALL {
            let picks = match select(kind, &req, &cfg) {
                Ok(p) => p,
                Err(e) if e.is_strategy_fallback() => continue,
                Err(e) => return Err(TestCaseError::fail(format!("{kind}: {e}"))),
            };
            prop_assert_eq!(picks.len(), budget, "{} returned wrong count", kind);
            let distinct: HashSet<usize> = picks.iter().copied().collect();
            prop_assert_eq!(distinct.len(), budget, "{} returned duplicates", kind);
            prop_assert!(picks.iter().all(|&i| i < pool_n));
            let again = select(kind, &req, &cfg).unwrap();
            prop_assert_eq!(picks, again, "{} is not deterministic", kind);
        }
    }

    /// The sequential distance picker agrees with a brute-force greedy
    /// oracle that recomputes every max-min distance from scratch.
    #[test]
    fn distance_picker_matches_greedy_oracle(
        seed in 0u64..500,
        dim in 1usize..6,
        pool_n in 2usize..40,
        labeled_n in 0usize..6,
        budget in 1usize..6,
    ) {
        let budget = budget.min(pool_n);
        let (pool_vecs, labeled_pts) = fixture(dim, pool_n, labeled_n, seed);
        let pool = build_pool(&pool_vecs);
        let labeled = build_labeled(&labeled_pts);
        let req = SelectionRequest {
            pool: &pool,
            labeled: &labeled,
            model: None,
            budget,
            seed,
        };
        let picks = select_distance(&req).unwrap();
        let expected = greedy_distance_oracle(
            &pool_vecs,
            &labeled_pts.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>(),
            budget,
        );
        prop_assert_eq!(picks, expected);
    }

    /// The frontier matches an independently written pairwise scan.
    #[test]
    fn frontier_matches_independent_scan(
        seed in 0u64..500,
        dim in 2usize..5,
        pool_n in 1usize..60,
    ) {
        let (pool_vecs, _) = fixture(dim, pool_n, 0, seed);
        // quantize to provoke ties and exact comparabilities
        let pool_vecs: Vec<Vec<f64>> = pool_vecs
            .iter()
            .map(|v| v.iter().map(|x| (x * 0.5).round()).collect())
            .collect();
        let pool = build_pool(&pool_vecs);
        let spec = ParetoSpec {
            positive: (0..dim / 2).collect(),
            negative: (dim / 2..dim).collect(),
        };
        let got = non_dominated_set(&pool, &spec);
        let expected = frontier_scan_oracle(&pool_vecs, dim / 2);
        prop_assert_eq!(got, expected);
    }

    /// Weighted-error scores agree with a naive double loop.
    #[test]
    fn umse_matches_double_loop(
        seed in 0u64..500,
        dim in 1usize..5,
        pool_n in 2usize..30,
        labeled_n in 2usize..12,
    ) {
        let (pool_vecs, labeled_pts) = fixture(dim, pool_n, labeled_n, seed);
        let pool = build_pool(&pool_vecs);
        let labeled = build_labeled(&labeled_pts);
        let mut model = Regressor::new(RegressorKind::Tree);
        model.fit(&labeled, seed).unwrap();
        let req = SelectionRequest {
            pool: &pool,
            labeled: &labeled,
            model: Some(&model),
            budget: 1,
            seed,
        };
        let got = umse_scores(&req).unwrap();
        let expected = umse_double_loop(&pool, &labeled, &model);
        for (g, e) in got.iter().zip(&expected) {
            prop_assert!((g - e).abs() <= 1e-9, "{g} vs {e}");
        }
    }
}

/// Greedy max-min oracle sharing only the z-scoring convention (population
/// sd over pool and labeled rows together), recomputed from scratch.
fn greedy_distance_oracle(pool: &[Vec<f64>], labeled: &[Vec<f64>], budget: usize) -> Vec<usize> {
    let dim = pool[0].len();
    let all: Vec<&Vec<f64>> = pool.iter().chain(labeled.iter()).collect();
    let n = all.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in &all {
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; dim];
    for row in &all {
        for j in 0..dim {
            sd[j] += (row[j] - mean[j]).powi(2) / n;
        }
    }
    let sd: Vec<f64> = sd
        .iter()
        .map(|v| {
            let s = v.sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let z = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - mean[j]) / sd[j])
            .collect()
    };
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    };

    let pool_z: Vec<Vec<f64>> = pool.iter().map(|r| z(r)).collect();
    let mut refs: Vec<Vec<f64>> = labeled.iter().map(|r| z(r)).collect();
    let mut picked: Vec<usize> = Vec::new();
    for _ in 0..budget {
        let choice = if refs.is_empty() {
            let mut centroid = vec![0.0; dim];
            for p in &pool_z {
                for (c, v) in centroid.iter_mut().zip(p) {
                    *c += v / pool_z.len() as f64;
                }
            }
            best_by(&pool_z, &picked, |p| dist(p, &centroid))
        } else {
            best_by(&pool_z, &picked, |p| {
                refs.iter().map(|r| dist(p, r)).fold(f64::INFINITY, f64::min)
            })
        };
        refs.push(pool_z[choice].clone());
        picked.push(choice);
    }
    picked
}

fn best_by(pool_z: &[Vec<f64>], picked: &[usize], score: impl Fn(&[f64]) -> f64) -> usize {
    let mut best = usize::MAX;
    let mut best_score = f64::NEG_INFINITY;
    for (i, p) in pool_z.iter().enumerate() {
        if picked.contains(&i) {
            continue;
        }
        let s = score(p);
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best
}

/// Pairwise scan written against the dominance conditions directly.
fn frontier_scan_oracle(pool: &[Vec<f64>], split: usize) -> Vec<usize> {
    let dominates = |a: &[f64], b: &[f64], flip: bool| -> bool {
        let mut any_strict = false;
        for (j, (va, vb)) in a.iter().zip(b).enumerate() {
            let positive_feature = j < split;
            let want_ge = positive_feature != flip;
            if want_ge {
                if va < vb {
                    return false;
                }
                if va > vb {
                    any_strict = true;
                }
            } else {
                if va > vb {
                    return false;
                }
                if va < vb {
                    any_strict = true;
                }
            }
        }
        any_strict
    };
    (0..pool.len())
        .filter(|&i| {
            !(0..pool.len()).any(|j| {
                j != i
                    && (dominates(&pool[j], &pool[i], false) || dominates(&pool[j], &pool[i], true))
            })
        })
        .collect()
}

/// Literal translation of the weighted-error formula.
fn umse_double_loop(pool: &Pool, labeled: &LabeledSet, model: &Regressor) -> Vec<f64> {
    let dim = pool.dim();
    let rows: Vec<&[f64]> = pool
        .samples()
        .iter()
        .map(|s| s.features.as_slice())
        .chain(labeled.entries().iter().map(|e| e.sample.features.as_slice()))
        .collect();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for r in &rows {
        for j in 0..dim {
            mean[j] += r[j] / n;
        }
    }
    let mut sd = vec![0.0; dim];
    for r in &rows {
        for j in 0..dim {
            sd[j] += (r[j] - mean[j]).powi(2) / n;
        }
    }
    let sd: Vec<f64> = sd
        .iter()
        .map(|v| if v.sqrt() > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    let z = |r: &[f64]| -> Vec<f64> {
        r.iter().enumerate().map(|(j, v)| (v - mean[j]) / sd[j]).collect()
    };

    pool.samples()
        .iter()
        .map(|s| {
            let sz = z(&s.features);
            let mut num = 0.0;
            let mut den = 0.0;
            let mut zero_err = Vec::new();
            for e in labeled.entries() {
                let lz = z(&e.sample.features);
                let d = sz
                    .iter()
                    .zip(&lz)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let resid = e.label - model.predict(&e.sample).unwrap();
                let sq = resid * resid;
                if d == 0.0 {
                    zero_err.push(sq);
                } else {
                    num += sq / d;
                    den += 1.0 / d;
                }
            }
            if !zero_err.is_empty() {
                zero_err.iter().sum::<f64>() / zero_err.len() as f64
            } else {
                num / den
            }
        })
        .collect()
}
