//! Learning-curve quality measures and paired significance testing.
//!
//! All measures consume the per-round test MSE trace: summed error (AUC),
//! its outlier-damped log form, curve smoothness via absolute second
//! differences (plain and late-weighted), and the first round after which
//! consecutive changes stay below epsilon.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::stats::{mean, sample_variance};

/// Per-round test MSE values; finite and non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve(Vec<f64>);

impl MetricCurve {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "metric curve entries must be finite and non-negative".into(),
            ));
        }
        Ok(MetricCurve(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mean squared error of paired outcomes.
pub fn mse(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: y_hat.len(),
        });
    }
    Ok(y.iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / y.len() as f64)
}

/// Sum of the curve and the sum of log(MSE_t + 1), natural log.
pub fn auc_and_logauc(curve: &[f64]) -> (f64, f64) {
    let auc = curve.iter().sum();
    let log_auc = curve.iter().map(|m| (m + 1.0).ln()).sum();
    (auc, log_auc)
}

fn second_differences(curve: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
    // t is the 1-based middle index, ranging over 2..=T-1
    (1..curve.len() - 1).map(|i| (i + 1, (curve[i + 1] - 2.0 * curve[i] + curve[i - 1]).abs()))
}

/// Mean absolute second difference with the 1/(T-1) normalizer.
pub fn asd(curve: &[f64]) -> Result<f64> {
    let t = curve.len();
    if t < 3 {
        return Err(Error::UndefinedMeasure(format!(
            "second-difference smoothness needs at least 3 points, got {t}"
        )));
    }
    Ok(second_differences(curve).map(|(_, d)| d).sum::<f64>() / (t - 1) as f64)
}

/// Late-weighted absolute second difference with the 2/((T-1)(T-2))
/// normalizer; each term is weighted by its (1-based) middle index.
pub fn wasd(curve: &[f64]) -> Result<f64> {
    let t = curve.len();
    if t < 3 {
        return Err(Error::UndefinedMeasure(format!(
            "second-difference smoothness needs at least 3 points, got {t}"
        )));
    }
    let sum: f64 = second_differences(curve)
        .map(|(mid, d)| mid as f64 * d)
        .sum();
    Ok(2.0 * sum / ((t - 1) as f64 * (t - 2) as f64))
}

/// First round t (1-based) such that every later consecutive gap is below
/// epsilon; `None` when the final gap itself is still epsilon or larger.
pub fn ftc(curve: &[f64], epsilon: f64) -> Option<usize> {
    let t = curve.len();
    if t < 2 {
        return Some(1);
    }
    let mut last_violation = 0usize;
    for i in 1..t {
        if (curve[i] - curve[i - 1]).abs() >= epsilon {
            last_violation = i + 1; // 1-based position of MSE_i
        }
    }
    if last_violation == t {
        None
    } else if last_violation == 0 {
        Some(1)
    } else {
        Some(last_violation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub t_statistic: f64,
    pub p_value: f64,
    pub significant: bool,
}

/// Two-tailed paired t-test on log(MSE + 1) values, with the significance
/// threshold divided by the number of comparisons being made.
pub fn paired_ttest_log(
    curve_a: &[f64],
    curve_b: &[f64],
    alpha: f64,
    comparisons: usize,
) -> Result<PairedTTest> {
    if curve_a.len() != curve_b.len() {
        return Err(Error::LengthMismatch {
            left: curve_a.len(),
            right: curve_b.len(),
        });
    }
    let n = curve_a.len();
    if n < 3 {
        return Err(Error::UndefinedMeasure(
            "paired t-test needs at least 3 paired observations".into(),
        ));
    }
    let m = comparisons.max(1);
    let diffs: Vec<f64> = curve_a
        .iter()
        .zip(curve_b)
        .map(|(a, b)| (a + 1.0).ln() - (b + 1.0).ln())
        .collect();
    let d_mean = mean(&diffs);
    let d_sd = sample_variance(&diffs).sqrt();

    let (t_statistic, p_value) = if d_sd == 0.0 {
        if d_mean == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY.copysign(d_mean), 0.0)
        }
    } else {
        let t = d_mean / (d_sd / (n as f64).sqrt());
        let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| Error::Config(format!("t distribution: {e}")))?;
        (t, 2.0 * (1.0 - dist.cdf(t.abs())))
    };

    Ok(PairedTTest {
        t_statistic,
        p_value,
        significant: p_value < alpha / m as f64,
    })
}

/// One experiment run reduced to its curve and derived quality measures.
///
/// Every derived field is exactly recomputable from `curve`,
/// `first_eval_round`, and `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config_name: String,
    pub config_fingerprint: String,
    pub seed: u64,
    /// Round that produced the first curve entry.
    pub first_eval_round: usize,
    pub epsilon: f64,
    pub curve: MetricCurve,
    pub auc: f64,
    pub log_auc: f64,
    pub asd: Option<f64>,
    pub wasd: Option<f64>,
    pub ftc: Option<usize>,
    /// Requested checkpoint rounds with the curve value where available.
    pub checkpoint_mse: Vec<(usize, Option<f64>)>,
    pub model_fingerprint: String,
}

impl RunReport {
    #[allow(clippy::too_many_arguments)]
    pub fn derive(
        config_name: String,
        config_fingerprint: String,
        seed: u64,
        first_eval_round: usize,
        epsilon: f64,
        curve: MetricCurve,
        checkpoints: &[usize],
        model_fingerprint: String,
    ) -> Self {
        let (auc, log_auc) = auc_and_logauc(curve.values());
        let asd = asd(curve.values()).ok();
        let wasd = wasd(curve.values()).ok();
        let ftc = ftc(curve.values(), epsilon);
        let checkpoint_mse = checkpoints
            .iter()
            .map(|&round| {
                let value = round
                    .checked_sub(first_eval_round)
                    .and_then(|i| curve.values().get(i).copied());
                (round, value)
            })
            .collect();
        RunReport {
            config_name,
            config_fingerprint,
            seed,
            first_eval_round,
            epsilon,
            curve,
            auc,
            log_auc,
            asd,
            wasd,
            ftc,
            checkpoint_mse,
            model_fingerprint,
        }
    }

    /// MSE of the final evaluated round.
    pub fn final_mse(&self) -> Option<f64> {
        self.curve.values().last().copied()
    }
}
