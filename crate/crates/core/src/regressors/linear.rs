//! Least squares, ridge, and lasso on standardized features.
//!
//! All three fit on z-scored columns (statistics of the training set) with
//! the intercept handled through centering; coefficients are mapped back to
//! raw feature units on the way out.

use crate::error::{Error, Result};
use crate::stats::Scaler;

/// Gaussian elimination with partial pivoting. `a` is row-major n x n.
/// Fails when a pivot collapses, which signals singular normal equations.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    let norm = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-12 * (1.0 + norm);
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() <= eps {
            return Err(Error::Config("singular linear system".into()));
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Fitted linear model; `theta` lives in the standardized space.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct LinearModel {
    pub scaler: Scaler,
    pub theta: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let z = self.scaler.transform(x);
        self.intercept + z.iter().zip(&self.theta).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Coefficients and intercept expressed in raw feature units.
    pub fn raw_coefficients(&self) -> (Vec<f64>, f64) {
        let theta_raw: Vec<f64> = self
            .theta
            .iter()
            .zip(self.scaler.scales())
            .map(|(t, s)| t / s)
            .collect();
        let shift: f64 = theta_raw
            .iter()
            .zip(self.scaler.means())
            .map(|(t, m)| t * m)
            .sum();
        (theta_raw, self.intercept - shift)
    }
}

fn zscore_rows(xs: &[Vec<f64>]) -> (Scaler, Vec<Vec<f64>>) {
    let dim = xs.first().map_or(0, |r| r.len());
    let scaler = Scaler::fit(xs.iter().map(|r| r.as_slice()), dim);
    let z = xs.iter().map(|r| scaler.transform(r)).collect();
    (scaler, z)
}

/// Ordinary least squares; `ridge_fallback` is applied (with a warning) when
/// the normal equations are singular.
pub fn fit_ols(xs: &[Vec<f64>], ys: &[f64]) -> Result<LinearModel> {
    match fit_penalized(xs, ys, 0.0) {
        Ok(model) => Ok(model),
        Err(Error::Config(_)) => {
            log::warn!("singular normal equations; refitting with ridge penalty 1e-8");
            fit_penalized(xs, ys, 1e-8)
        }
        Err(e) => Err(e),
    }
}

pub fn fit_ridge(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> Result<LinearModel> {
    fit_penalized(xs, ys, lambda)
}

/// Solves min ||y - X theta - b||^2 + lambda ||theta||^2 on standardized X.
fn fit_penalized(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> Result<LinearModel> {
    let (scaler, z) = zscore_rows(xs);
    let d = scaler.dim();
    let n = ys.len();
    // normal equations over [1 | Z]
    let mut a = vec![vec![0.0; d + 1]; d + 1];
    let mut b = vec![0.0; d + 1];
    for (row, y) in z.iter().zip(ys) {
        a[0][0] += 1.0;
        b[0] += y;
        for j in 0..d {
            a[0][j + 1] += row[j];
            a[j + 1][0] += row[j];
            b[j + 1] += row[j] * y;
            for k in j..d {
                a[j + 1][k + 1] += row[j] * row[k];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            a[j + 1][k + 1] = a[k + 1][j + 1];
        }
    }
    if lambda > 0.0 {
        for j in 1..=d {
            a[j][j] += lambda;
        }
    }
    let _ = n;
    let beta = solve(a, b)?;
    Ok(LinearModel {
        scaler,
        intercept: beta[0],
        theta: beta[1..].to_vec(),
    })
}

/// Coordinate-descent lasso for min (1/2n)||y - X theta - b||^2 +
/// lambda ||theta||_1 on standardized X, where each column has unit mean
/// square, so the soft-threshold update needs no per-column rescaling.
pub fn fit_lasso(
    xs: &[Vec<f64>],
    ys: &[f64],
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<LinearModel> {
    let (scaler, z) = zscore_rows(xs);
    let d = scaler.dim();
    let n = ys.len();
    let y_mean = crate::stats::mean(ys);
    let yc: Vec<f64> = ys.iter().map(|y| y - y_mean).collect();

    // column mean squares; constant columns scaled to 1 stay exactly zero
    let col_ms: Vec<f64> = (0..d)
        .map(|j| z.iter().map(|r| r[j] * r[j]).sum::<f64>() / n as f64)
        .collect();

    let mut theta = vec![0.0; d];
    let mut residual = yc.clone();
    for _ in 0..max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..d {
            if col_ms[j] == 0.0 {
                continue;
            }
            let old = theta[j];
            // rho = (1/n) x_j . (residual + x_j * old)
            let mut rho = 0.0;
            for (r, row) in residual.iter().zip(&z) {
                rho += row[j] * r;
            }
            rho = rho / n as f64 + col_ms[j] * old;
            let new = soft_threshold(rho, lambda) / col_ms[j];
            if new != old {
                let delta = new - old;
                for (r, row) in residual.iter_mut().zip(&z) {
                    *r -= delta * row[j];
                }
                theta[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < tol {
            break;
        }
    }
    Ok(LinearModel {
        scaler,
        theta,
        intercept: y_mean,
    })
}

fn soft_threshold(rho: f64, lambda: f64) -> f64 {
    if rho > lambda {
        rho - lambda
    } else if rho < -lambda {
        rho + lambda
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> (Vec<Vec<f64>>, Vec<f64>) {
        // y = 2 x1 - 3 x2 + 1, noiseless, 20 points
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..20 {
            let x1 = i as f64 * 0.37 - 2.0;
            let x2 = ((i * 7) % 13) as f64 * 0.5;
            xs.push(vec![x1, x2]);
            ys.push(2.0 * x1 - 3.0 * x2 + 1.0);
        }
        (xs, ys)
    }

    #[test]
    fn ols_recovers_noiseless_coefficients() {
        let (xs, ys) = grid();
        let model = fit_ols(&xs, &ys).unwrap();
        let (theta, intercept) = model.raw_coefficients();
        assert_relative_eq!(theta[0], 2.0, epsilon = 1e-6);
        assert_relative_eq!(theta[1], -3.0, epsilon = 1e-6);
        assert_relative_eq!(intercept, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn ols_residuals_orthogonal_to_columns() {
        let (xs, ys) = grid();
        let model = fit_ols(&xs, &ys).unwrap();
        for j in 0..2 {
            let dot: f64 = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (y - model.predict(x)) * x[j])
                .sum();
            assert!(dot.abs() <= 1e-8, "residual dot column {j} = {dot}");
        }
    }

    #[test]
    fn singular_system_falls_back_to_tiny_ridge() {
        // second column constant after centering -> singular
        let xs = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let ys = vec![1.0, 2.0, 3.0];
        let model = fit_ols(&xs, &ys).unwrap();
        assert_relative_eq!(model.predict(&[2.0, 5.0]), 2.0, epsilon = 1e-5);
    }

    #[test]
    fn ridge_norm_shrinks_with_penalty() {
        let (xs, ys) = grid();
        let mut prev = f64::INFINITY;
        for lambda in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let model = fit_ridge(&xs, &ys, lambda).unwrap();
            let norm: f64 = model.theta.iter().map(|t| t * t).sum::<f64>().sqrt();
            assert!(norm <= prev + 1e-12, "norm grew at lambda={lambda}");
            prev = norm;
        }
    }

    #[test]
    fn lasso_zeroes_out_at_large_penalty() {
        let (xs, ys) = grid();
        let model = fit_lasso(&xs, &ys, 1e6, 1e-6, 10_000).unwrap();
        assert!(model.theta.iter().all(|t| *t == 0.0));
        let y_mean = crate::stats::mean(&ys);
        assert_relative_eq!(model.predict(&xs[0]), y_mean);
    }

    #[test]
    fn lasso_small_penalty_near_ols() {
        let (xs, ys) = grid();
        let model = fit_lasso(&xs, &ys, 1e-8, 1e-10, 50_000).unwrap();
        let (theta, intercept) = model.raw_coefficients();
        assert_relative_eq!(theta[0], 2.0, epsilon = 1e-4);
        assert_relative_eq!(theta[1], -3.0, epsilon = 1e-4);
        assert_relative_eq!(intercept, 1.0, epsilon = 1e-4);
    }
}
