//! Small numeric helpers: moments and feature standardization.

use serde::{Deserialize, Serialize};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Variance with the 1/n denominator.
pub fn population_variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Variance with the 1/(n-1) denominator; 0 for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64
}

/// Per-feature z-scoring fitted on a reference set.
///
/// Scales are population standard deviations; a constant feature gets scale 1
/// so it maps to a constant 0 instead of dividing by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    means: Vec<f64>,
    scales: Vec<f64>,
}

impl Scaler {
    pub fn fit<'a, I>(rows: I, dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a [f64]> + Clone,
    {
        let mut sums = vec![0.0; dim];
        let mut count = 0usize;
        for row in rows.clone() {
            debug_assert_eq!(row.len(), dim);
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
            count += 1;
        }
        let means: Vec<f64> = if count == 0 {
            vec![0.0; dim]
        } else {
            sums.iter().map(|s| s / count as f64).collect()
        };
        let mut sq = vec![0.0; dim];
        for row in rows {
            for j in 0..dim {
                let d = row[j] - means[j];
                sq[j] += d * d;
            }
        }
        let scales: Vec<f64> = sq
            .iter()
            .map(|s| {
                let sd = if count == 0 { 0.0 } else { (s / count as f64).sqrt() };
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { means, scales }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
