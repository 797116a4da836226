//! k-nearest-neighbor regression on standardized features.

use serde::{Deserialize, Serialize};

use crate::stats::{euclidean, Scaler};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub scaler: Scaler,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub k: usize,
}

pub fn fit_knn(xs: &[Vec<f64>], ys: &[f64], k: usize) -> KnnModel {
    let dim = xs.first().map_or(0, |r| r.len());
    let scaler = Scaler::fit(xs.iter().map(|r| r.as_slice()), dim);
    KnnModel {
        xs: xs.iter().map(|r| scaler.transform(r)).collect(),
        ys: ys.to_vec(),
        k: k.max(1).min(xs.len()),
        scaler,
    }
}

impl KnnModel {
    /// Mean label of the k nearest training points; distance ties break by
    /// training index.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform(x);
        let mut dists: Vec<(f64, usize)> = self
            .xs
            .iter()
            .enumerate()
            .map(|(i, row)| (euclidean(&z, row), i))
            .collect();
        dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = self.k.min(dists.len());
        dists[..k].iter().map(|(_, i)| self.ys[*i]).sum::<f64>() / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_nearest_neighbor_reproduces_training_labels() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let ys: Vec<f64> = (0..10).map(|i| (3 * i) as f64).collect();
        let model = fit_knn(&xs, &ys, 1);
        for (x, y) in xs.iter().zip(&ys) {
            assert_relative_eq!(model.predict(x), *y);
        }
    }

    #[test]
    fn k_larger_than_train_set_uses_everything() {
        let xs = vec![vec![0.0], vec![1.0], vec![2.0]];
        let ys = vec![0.0, 3.0, 6.0];
        let model = fit_knn(&xs, &ys, 50);
        assert_eq!(model.k, 3);
        assert_relative_eq!(model.predict(&[1.0]), 3.0);
    }

    #[test]
    fn mean_of_nearest_pair() {
        let xs = vec![vec![0.0], vec![1.0], vec![10.0]];
        let ys = vec![0.0, 2.0, 100.0];
        let model = fit_knn(&xs, &ys, 2);
        assert_relative_eq!(model.predict(&[0.4]), 1.0);
    }
}
