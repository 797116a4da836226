//! K-means with silhouette scoring and medoid extraction.
//!
//! Distances are Euclidean on z-scored features, with the statistics taken
//! from the clustered set itself. Seeding is k-means++; Lloyd iterations run
//! to an assignment fixed point (at most 300 rounds); an empty cluster is
//! repaired by stealing the point farthest from its own centroid.

use rand::Rng;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::seeds;
use crate::stats::{euclidean, Scaler};

const MAX_ITERS: usize = 300;

#[derive(Debug, Clone)]
pub struct Clustering {
    k: usize,
    points: Vec<Vec<f64>>, // z-scored
    centroids: Vec<Vec<f64>>,
    assignment: Vec<usize>,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Member indices of one cluster, ascending.
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn centroid(&self, cluster: usize) -> &[f64] {
        &self.centroids[cluster]
    }

    /// The member closest to its cluster centroid; ties break to the lowest
    /// sample index.
    pub fn medoid(&self, cluster: usize) -> Result<usize> {
        if cluster >= self.k {
            return Err(Error::Config(format!(
                "cluster {cluster} out of range (k = {})",
                self.k
            )));
        }
        let centroid = &self.centroids[cluster];
        self.members(cluster)
            .into_iter()
            .map(|i| (euclidean(&self.points[i], centroid), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, i)| i)
            .ok_or_else(|| Error::Config(format!("cluster {cluster} is empty")))
    }

    /// Silhouette coefficient of one sample: (b - a) / max(a, b), where a is
    /// the mean distance to the rest of its own cluster (0 for a singleton)
    /// and b the smallest mean distance to another cluster. Needs k >= 2.
    pub fn silhouette(&self, index: usize) -> Result<f64> {
        if self.k < 2 {
            return Err(Error::UndefinedMeasure(
                "silhouette needs at least two clusters".into(),
            ));
        }
        let own = self.assignment[index];
        let mut sums = vec![0.0f64; self.k];
        let mut counts = vec![0usize; self.k];
        for (j, point) in self.points.iter().enumerate() {
            if j == index {
                continue;
            }
            let c = self.assignment[j];
            sums[c] += euclidean(&self.points[index], point);
            counts[c] += 1;
        }
        let a = if counts[own] == 0 {
            0.0
        } else {
            sums[own] / counts[own] as f64
        };
        let b = (0..self.k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .min_by(|x, y| x.total_cmp(y))
            .ok_or_else(|| {
                Error::UndefinedMeasure("no other non-empty cluster for silhouette".into())
            })?;
        let denom = a.max(b);
        Ok(if denom == 0.0 { 0.0 } else { (b - a) / denom })
    }

    fn wcss(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| {
                let d = euclidean(p, &self.centroids[c]);
                d * d
            })
            .sum()
    }
}

fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = euclidean(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| {
            let d = euclidean(p, &centroids[0]);
            d * d
        })
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = euclidean(p, centroids.last().unwrap());
            d2[i] = d2[i].min(d * d);
        }
    }
    centroids
}

/// Lloyd's algorithm over z-scored samples.
pub fn kmeans(samples: &[Sample], k: usize, seed: u64) -> Result<Clustering> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if samples.len() < k {
        return Err(Error::Config(format!(
            "cannot split {} samples into {k} clusters",
            samples.len()
        )));
    }
    let dim = samples[0].dim();
    let scaler = Scaler::fit(samples.iter().map(|s| s.features.as_slice()), dim);
    let points: Vec<Vec<f64>> = samples.iter().map(|s| scaler.transform(&s.features)).collect();
    let mut rng = seeds::rng(seed);

    let mut state = Clustering {
        k,
        centroids: plus_plus_seeds(&points, k, &mut rng),
        assignment: vec![0; points.len()],
        points,
    };

    let mut prev_wcss = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let new_assignment: Vec<usize> = state
            .points
            .iter()
            .map(|p| nearest_centroid(p, &state.centroids))
            .collect();
        let changed = new_assignment != state.assignment;
        state.assignment = new_assignment;

        // repair empty clusters before recomputing centroids
        let mut sizes = vec![0usize; k];
        for &c in &state.assignment {
            sizes[c] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let victim = state
                .points
                .iter()
                .enumerate()
                .filter(|(i, _)| sizes[state.assignment[*i]] > 1)
                .map(|(i, p)| (euclidean(p, &state.centroids[state.assignment[i]]), i))
                .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
                .map(|(_, i)| i);
            if let Some(i) = victim {
                sizes[state.assignment[i]] -= 1;
                state.assignment[i] = empty;
                sizes[empty] += 1;
            }
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in state.points.iter().zip(&state.assignment) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= counts[c] as f64;
                }
                state.centroids[c] = sums[c].clone();
            }
        }

        let wcss = state.wcss();
        assert!(
            wcss <= prev_wcss + 1e-9 * (1.0 + prev_wcss),
            "within-cluster sum of squares increased: {prev_wcss} -> {wcss}"
        );
        prev_wcss = wcss;
        if !changed {
            break;
        }
    }
    Ok(state)
}
