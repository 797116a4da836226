//! Variance-reduction regression trees, bagged forests, boosted ensembles,
//! and a small classification forest used as an uncertainty surrogate.
//!
//! Determinism rules: rows are put into a canonical order before any
//! randomized step, split ties go to the lowest feature index and then the
//! lowest threshold, and all randomness comes from the caller's seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;
use crate::stats::mean;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all.
    pub features_per_split: Option<usize>,
}

/// Sorts rows by feature vector (then target) so fitting never depends on
/// input row order.
pub fn canonical_order(xs: &[Vec<f64>], ys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| {
        for (va, vb) in xs[a].iter().zip(&xs[b]) {
            match va.total_cmp(vb) {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        ys[a].total_cmp(&ys[b])
    });
    order
}

struct Builder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    params: TreeParams,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64)>,
}

impl<'a> Builder<'a> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let value = idx.iter().map(|&i| self.ys[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn candidate_features(&self, rng: &mut Option<&mut ChaCha8Rng>) -> Vec<usize> {
        let d = self.xs[0].len();
        match (self.params.features_per_split, rng) {
            (Some(k), Some(rng)) if k < d => {
                let mut picked = rand::seq::index::sample(*rng, d, k).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..d).collect(),
        }
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut Option<&mut ChaCha8Rng>) -> usize {
        let m = idx.len();
        if depth >= self.params.max_depth || m < 2 * self.params.min_leaf {
            return self.leaf(&idx);
        }
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for &i in &idx {
            sum += self.ys[i];
            sumsq += self.ys[i] * self.ys[i];
        }
        if sumsq - sum * sum / m as f64 <= 1e-24 {
            return self.leaf(&idx);
        }

        let mut best: Option<(f64, usize, f64)> = None; // (cost, feature, threshold)
        for f in self.candidate_features(rng) {
            self.scratch.clear();
            self.scratch
                .extend(idx.iter().map(|&i| (self.xs[i][f], self.ys[i])));
            self.scratch
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for i in 0..m - 1 {
                let (x, y) = self.scratch[i];
                left_sum += y;
                left_sq += y * y;
                if x == self.scratch[i + 1].0 {
                    continue;
                }
                let left_n = i + 1;
                let right_n = m - left_n;
                if left_n < self.params.min_leaf || right_n < self.params.min_leaf {
                    continue;
                }
                let right_sum = sum - left_sum;
                let right_sq = sumsq - left_sq;
                let cost = (left_sq - left_sum * left_sum / left_n as f64)
                    + (right_sq - right_sum * right_sum / right_n as f64);
                if best.map_or(true, |(c, _, _)| cost < c) {
                    let threshold = 0.5 * (x + self.scratch[i + 1].0);
                    best = Some((cost, f, threshold));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.leaf(&idx);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.xs[i][feature] <= threshold);

        // placeholder, patched after the children exist
        self.nodes.push(Node::Leaf { value: 0.0 });
        let me = self.nodes.len() - 1;
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[me] = Node::Split { feature, threshold, left, right };
        me
    }
}

/// Builds a tree over a row-index multiset of already canonically ordered
/// data, so bootstrap resamples never copy rows.
fn fit_tree_on(
    xs: &[Vec<f64>],
    ys: &[f64],
    idx: Vec<usize>,
    params: TreeParams,
    mut rng: Option<&mut ChaCha8Rng>,
) -> RegressionTree {
    let mut builder = Builder {
        xs,
        ys,
        params,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(idx.len()),
    };
    let root = builder.build(idx, 0, &mut rng);
    debug_assert_eq!(root, 0);
    RegressionTree {
        nodes: builder.nodes,
    }
}

/// Fits one regression tree. Pass an RNG only when per-split feature
/// subsampling is wanted.
pub fn fit_tree(
    xs: &[Vec<f64>],
    ys: &[f64],
    params: TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> RegressionTree {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(!xs.is_empty());
    let order = canonical_order(xs, ys);
    let xs_sorted: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
    let ys_sorted: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let all: Vec<usize> = (0..xs_sorted.len()).collect();
    fit_tree_on(&xs_sorted, &ys_sorted, all, params, rng)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
}

impl ForestModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged forest: each tree sees a bootstrap resample and subsampled
/// features per split. Tree seeds derive from `seed` by index, so results
/// do not depend on scheduling.
pub fn fit_forest(
    xs: &[Vec<f64>],
    ys: &[f64],
    n_trees: usize,
    params: TreeParams,
    seed: u64,
) -> Result<ForestModel> {
    if n_trees == 0 {
        return Err(Error::Config("forest needs at least one tree".into()));
    }
    let order = canonical_order(xs, ys);
    let xs_sorted: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
    let ys_sorted: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let n = xs_sorted.len();
    let trees: Vec<RegressionTree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::rng(seeds::mix(seed, t as u64));
            // sorted bootstrap keeps the build independent of draw order
            let mut boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            boot.sort_unstable();
            fit_tree_on(&xs_sorted, &ys_sorted, boot, params, Some(&mut rng))
        })
        .collect();
    Ok(ForestModel { trees })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostModel {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RegressionTree>,
}

impl BoostModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base
            + self.learning_rate
                * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Gradient boosting with squared loss: shallow trees refit the running
/// residuals.
pub fn fit_boost(
    xs: &[Vec<f64>],
    ys: &[f64],
    stages: usize,
    depth: usize,
    learning_rate: f64,
    min_leaf: usize,
) -> BoostModel {
    let order = canonical_order(xs, ys);
    let xs_sorted: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
    let ys_sorted: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let base = mean(&ys_sorted);
    let params = TreeParams {
        max_depth: depth,
        min_leaf,
        features_per_split: None,
    };
    let mut residuals: Vec<f64> = ys_sorted.iter().map(|y| y - base).collect();
    let mut trees = Vec::with_capacity(stages);
    for _ in 0..stages {
        let tree = fit_tree(&xs_sorted, &residuals, params, None);
        for (r, x) in residuals.iter_mut().zip(&xs_sorted) {
            *r -= learning_rate * tree.predict(x);
        }
        trees.push(tree);
    }
    BoostModel {
        base,
        learning_rate,
        trees,
    }
}

// ---------------------------------------------------------------------------
// Classification forest (gini splits, leaf class proportions)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
enum CNode {
    Leaf { counts: Vec<u32> },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassTree {
    nodes: Vec<CNode>,
    classes: usize,
}

impl ClassTree {
    fn leaf_counts(&self, x: &[f64]) -> &[u32] {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                CNode::Leaf { counts } => return counts,
                CNode::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

fn gini_cost(counts: &[u32], total: u32) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    let sum_sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    t * (1.0 - sum_sq / (t * t))
}

struct ClassBuilder<'a> {
    xs: &'a [Vec<f64>],
    ys: &'a [usize],
    classes: usize,
    params: TreeParams,
    nodes: Vec<CNode>,
}

impl<'a> ClassBuilder<'a> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let mut counts = vec![0u32; self.classes];
        for &i in idx {
            counts[self.ys[i]] += 1;
        }
        self.nodes.push(CNode::Leaf { counts });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize, rng: &mut Option<&mut ChaCha8Rng>) -> usize {
        let m = idx.len();
        let mut counts = vec![0u32; self.classes];
        for &i in &idx {
            counts[self.ys[i]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.params.max_depth || m < 2 * self.params.min_leaf || pure {
            return self.leaf(&idx);
        }

        let d = self.xs[0].len();
        let features: Vec<usize> = match self.params.features_per_split {
            Some(k) if k < d => {
                let rng = rng.as_mut().expect("feature subsampling needs an rng");
                let mut picked = rand::seq::index::sample(rng, d, k).into_vec();
                picked.sort_unstable();
                picked
            }
            _ => (0..d).collect(),
        };

        let mut best: Option<(f64, usize, f64)> = None;
        let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(m);
        for f in features {
            scratch.clear();
            scratch.extend(idx.iter().map(|&i| (self.xs[i][f], self.ys[i])));
            scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut left = vec![0u32; self.classes];
            for i in 0..m - 1 {
                left[scratch[i].1] += 1;
                if scratch[i].0 == scratch[i + 1].0 {
                    continue;
                }
                let left_n = (i + 1) as u32;
                let right_n = (m - i - 1) as u32;
                if (left_n as usize) < self.params.min_leaf
                    || (right_n as usize) < self.params.min_leaf
                {
                    continue;
                }
                let right: Vec<u32> = counts
                    .iter()
                    .zip(&left)
                    .map(|(c, l)| c - l)
                    .collect();
                let cost = gini_cost(&left, left_n) + gini_cost(&right, right_n);
                if best.map_or(true, |(c, _, _)| cost < c) {
                    best = Some((cost, f, 0.5 * (scratch[i].0 + scratch[i + 1].0)));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return self.leaf(&idx);
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.xs[i][feature] <= threshold);
        self.nodes.push(CNode::Leaf { counts: vec![] });
        let me = self.nodes.len() - 1;
        let left = self.build(left_idx, depth + 1, rng);
        let right = self.build(right_idx, depth + 1, rng);
        self.nodes[me] = CNode::Split { feature, threshold, left, right };
        me
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassForest {
    trees: Vec<ClassTree>,
    classes: usize,
}

impl ClassForest {
    /// Average of per-tree leaf class proportions.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut probs = vec![0.0; self.classes];
        for tree in &self.trees {
            let counts = tree.leaf_counts(x);
            let total: u32 = counts.iter().sum();
            if total > 0 {
                for (p, &c) in probs.iter_mut().zip(counts) {
                    *p += c as f64 / total as f64;
                }
            }
        }
        let n = self.trees.len() as f64;
        for p in &mut probs {
            *p /= n;
        }
        probs
    }
}

pub fn fit_class_forest(
    xs: &[Vec<f64>],
    ys: &[usize],
    classes: usize,
    n_trees: usize,
    params: TreeParams,
    seed: u64,
) -> Result<ClassForest> {
    if classes < 2 {
        return Err(Error::Config("classification needs at least 2 classes".into()));
    }
    let ys_f: Vec<f64> = ys.iter().map(|&c| c as f64).collect();
    let order = canonical_order(xs, &ys_f);
    let xs_sorted: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
    let ys_sorted: Vec<usize> = order.iter().map(|&i| ys[i]).collect();
    let n = xs_sorted.len();
    let trees: Vec<ClassTree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeds::rng(seeds::mix(seed, t as u64));
            let mut boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            boot.sort_unstable();
            let mut builder = ClassBuilder {
                xs: &xs_sorted,
                ys: &ys_sorted,
                classes,
                params,
                nodes: Vec::new(),
            };
            let mut rng_opt = Some(&mut rng);
            builder.build(boot, 0, &mut rng_opt);
            ClassTree {
                nodes: builder.nodes,
                classes,
            }
        })
        .collect();
    Ok(ClassForest { trees, classes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(depth: usize) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_leaf: 2,
            features_per_split: None,
        }
    }

    #[test]
    fn depth_zero_tree_predicts_training_mean() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let ys = vec![1.0, 2.0, 3.0, 6.0];
        let tree = fit_tree(&xs, &ys, params(0), None);
        assert_relative_eq!(tree.predict(&[9.0]), 3.0);
    }

    #[test]
    fn tree_splits_an_obvious_step() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let ys: Vec<f64> = (0..8).map(|i| if i < 4 { 0.0 } else { 10.0 }).collect();
        let tree = fit_tree(&xs, &ys, params(3), None);
        assert_relative_eq!(tree.predict(&[1.0]), 0.0);
        assert_relative_eq!(tree.predict(&[6.0]), 10.0);
    }

    #[test]
    fn constant_labels_give_a_leaf() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let ys = vec![5.0; 6];
        let tree = fit_tree(&xs, &ys, params(10), None);
        assert_eq!(tree.node_count(), 1);
        assert_relative_eq!(tree.predict(&[100.0]), 5.0);
    }

    #[test]
    fn split_tie_prefers_lowest_feature() {
        // identical columns; only the tie rule decides
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, i as f64]).collect();
        let ys: Vec<f64> = (0..8).map(|i| if i < 4 { 0.0 } else { 1.0 }).collect();
        let tree = fit_tree(&xs, &ys, params(1), None);
        match &tree.nodes[0] {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn forest_is_invariant_to_row_order() {
        let mut xs: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 7) as f64, (i % 5) as f64])
            .collect();
        let mut ys: Vec<f64> = (0..30).map(|i| (i % 7) as f64 * 2.0).collect();
        let f1 = fit_forest(&xs, &ys, 20, params(5), 9).unwrap();
        xs.reverse();
        ys.reverse();
        let f2 = fit_forest(&xs, &ys, 20, params(5), 9).unwrap();
        for probe in [[0.0, 0.0], [3.0, 2.0], [6.5, 4.0]] {
            assert_eq!(f1.predict(&probe), f2.predict(&probe));
        }
    }

    #[test]
    fn boost_is_invariant_to_row_order_and_fits_step() {
        let mut xs: Vec<Vec<f64>> = (0..16).map(|i| vec![i as f64]).collect();
        let mut ys: Vec<f64> = (0..16).map(|i| if i < 8 { -1.0 } else { 1.0 }).collect();
        let b1 = fit_boost(&xs, &ys, 50, 3, 0.1, 2);
        xs.reverse();
        ys.reverse();
        let b2 = fit_boost(&xs, &ys, 50, 3, 0.1, 2);
        assert_eq!(b1.predict(&[2.0]), b2.predict(&[2.0]));
        assert!((b1.predict(&[2.0]) + 1.0).abs() < 0.05);
        assert!((b1.predict(&[14.0]) - 1.0).abs() < 0.05);
    }

    #[test]
    fn forest_seed_determinism() {
        let xs: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 11) as f64, (i % 3) as f64, i as f64])
            .collect();
        let ys: Vec<f64> = (0..40).map(|i| (i % 11) as f64).collect();
        let f1 = fit_forest(&xs, &ys, 10, params(6), 77).unwrap();
        let f2 = fit_forest(&xs, &ys, 10, params(6), 77).unwrap();
        let f3 = fit_forest(&xs, &ys, 10, params(6), 78).unwrap();
        assert_eq!(f1.predict(&[5.0, 1.0, 20.0]), f2.predict(&[5.0, 1.0, 20.0]));
        assert_ne!(f1.predict(&[5.0, 1.0, 20.0]), f3.predict(&[5.0, 1.0, 20.0]));
    }

    #[test]
    fn class_forest_proportions_sum_to_one_and_separate() {
        let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let ys: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let forest = fit_class_forest(&xs, &ys, 2, 30, params(4), 5).unwrap();
        let p_low = forest.predict_proba(&[2.0]);
        let p_high = forest.predict_proba(&[38.0]);
        assert_relative_eq!(p_low.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(p_low[0] > 0.9);
        assert!(p_high[1] > 0.9);
    }
}
