//! Forecast metrics, blocked k-fold cross-validation, and a seasonal-naive
//! persistence baseline.
//!
//! Metrics are reported on both the transformed (centered `log1p`) scale and
//! the count scale. MAD here is the mean absolute error.

use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{CovariateStats, Dataset, Month};
use crate::kernels::HyperParams;
use crate::optimizer::FitConfig;
use crate::pipeline;
use crate::transform::{self, TransformState};

/// Seasonal lag of the persistence baseline, in months.
pub const SEASONAL_LAG: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("dimension mismatch: {pred} predictions vs {actual} actuals")]
    DimensionMismatch { pred: usize, actual: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("need k >= 2 and at least 2k rows (k = {k}, rows = {rows})")]
    TooFewRows { k: usize, rows: usize },
    #[error("fold {fold} failed: {message}")]
    FoldFailed { fold: usize, message: String },
}

fn check(pred: &[f64], actual: &[f64]) -> Result<(), EvalError> {
    if pred.len() != actual.len() {
        return Err(EvalError::DimensionMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    check(pred, actual)?;
    let mse = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

pub fn mad(pred: &[f64], actual: &[f64]) -> Result<f64, EvalError> {
    check(pred, actual)?;
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rmse_transformed: f64,
    pub mad_transformed: f64,
    pub rmse_counts: f64,
    pub mad_counts: f64,
    pub n: usize,
}

impl MetricReport {
    pub fn compute(
        pred_transformed: &[f64],
        actual_transformed: &[f64],
        pred_counts: &[f64],
        actual_counts: &[f64],
    ) -> Result<Self, EvalError> {
        check(pred_counts, pred_transformed)?;
        Ok(Self {
            rmse_transformed: rmse(pred_transformed, actual_transformed)?,
            mad_transformed: mad(pred_transformed, actual_transformed)?,
            rmse_counts: rmse(pred_counts, actual_counts)?,
            mad_counts: mad(pred_counts, actual_counts)?,
            n: pred_transformed.len(),
        })
    }

    /// Transformed predictions against observed counts under `state`.
    pub fn from_transformed(
        pred_transformed: &[f64],
        actual_counts: &[f64],
        state: &TransformState,
    ) -> Result<Self, EvalError> {
        let actual_t = transform::apply(actual_counts, state).map_err(|_| EvalError::EmptyInput)?;
        let pred_c = transform::inverse(pred_transformed, state);
        Self::compute(pred_transformed, &actual_t, &pred_c, actual_counts)
    }

    fn as_array(&self) -> [f64; 4] {
        [
            self.rmse_transformed,
            self.mad_transformed,
            self.rmse_counts,
            self.mad_counts,
        ]
    }

    fn from_array(v: [f64; 4], n: usize) -> Self {
        Self {
            rmse_transformed: v[0],
            mad_transformed: v[1],
            rmse_counts: v[2],
            mad_counts: v[3],
            n,
        }
    }
}

// ---------------------------------------------------------------------------
// Cross-validation.

/// One held-out block and what the model trained without it looked like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub first_period: Month,
    pub last_period: Month,
    pub train_rows: usize,
    pub metrics: MetricReport,
    pub theta: HyperParams,
    pub final_nll: f64,
    pub transform: TransformState,
    pub covariate_stats: CovariateStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub folds: Vec<FoldResult>,
    /// Mean over folds of each metric (`n` is the total evaluated rows).
    pub mean: MetricReport,
    /// Sample standard deviation over folds (`n` is the fold count).
    pub std: MetricReport,
}

impl CvReport {
    pub fn per_fold(&self) -> Vec<MetricReport> {
        self.folds.iter().map(|f| f.metrics).collect()
    }

    /// One row per fold.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let map = |e: csv::Error| std::io::Error::other(e);
        w.write_record([
            "fold",
            "first_period",
            "last_period",
            "train_rows",
            "test_rows",
            "rmse_transformed",
            "mad_transformed",
            "rmse_counts",
            "mad_counts",
            "p",
            "final_nll",
        ])
        .map_err(map)?;
        for f in &self.folds {
            w.write_record([
                f.fold.to_string(),
                f.first_period.to_string(),
                f.last_period.to_string(),
                f.train_rows.to_string(),
                f.metrics.n.to_string(),
                f.metrics.rmse_transformed.to_string(),
                f.metrics.mad_transformed.to_string(),
                f.metrics.rmse_counts.to_string(),
                f.metrics.mad_counts.to_string(),
                f.theta.natural().p.to_string(),
                f.final_nll.to_string(),
            ])
            .map_err(map)?;
        }
        w.flush()
    }
}

/// Contiguous index blocks whose sizes differ by at most one; the first
/// `n mod k` blocks take the extra row.
pub fn fold_ranges(n: usize, k: usize) -> Vec<Range<usize>> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Trains on everything but `block` (standardization, transform and
/// hyperparameters all from the complement) and scores the block.
pub fn run_fold(dataset: &Dataset, fold: usize, block: Range<usize>, config: &FitConfig) -> Result<FoldResult, EvalError> {
    let fail = |e: crate::Error| EvalError::FoldFailed {
        fold,
        message: e.to_string(),
    };
    let train_idx: Vec<usize> = (0..dataset.len()).filter(|i| !block.contains(i)).collect();
    let test_idx: Vec<usize> = block.clone().collect();
    let stats = CovariateStats::fit(train_idx.iter().map(|&i| &dataset.raw[i]));
    let train = dataset.select(&train_idx).restandardize(stats);
    let test = dataset.select(&test_idx).restandardize(stats);

    let fc = pipeline::train(&train, config).map_err(fail)?;
    let forecast = fc.forecast(&test).map_err(fail)?;
    let actual_t = fc.transformed_actuals(&test).map_err(fail)?;
    let metrics = MetricReport::compute(
        &forecast.mean_transformed,
        &actual_t,
        &forecast.mean_count,
        &test.counts_f64(),
    )?;
    let optim = fc.optim.as_ref().expect("trained with search");
    Ok(FoldResult {
        fold,
        first_period: test.periods[0],
        last_period: *test.periods.last().expect("nonempty block"),
        train_rows: train.len(),
        metrics,
        theta: optim.theta,
        final_nll: optim.final_nll,
        transform: fc.transform,
        covariate_stats: stats,
    })
}

/// Blocked k-fold cross-validation over a time-ordered dataset.
pub fn blocked_kfold(dataset: &Dataset, k: usize, config: &FitConfig) -> Result<CvReport, EvalError> {
    if k < 2 || dataset.len() < 2 * k {
        return Err(EvalError::TooFewRows {
            k,
            rows: dataset.len(),
        });
    }
    let ranges = fold_ranges(dataset.len(), k);
    let folds = config
        .exec
        .map(k, |i| run_fold(dataset, i, ranges[i].clone(), config))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let kf = k as f64;
    let rows: Vec<[f64; 4]> = folds.iter().map(|f| f.metrics.as_array()).collect();
    let mut mean = [0.0; 4];
    let mut std = [0.0; 4];
    for m in 0..4 {
        mean[m] = rows.iter().map(|r| r[m]).sum::<f64>() / kf;
        std[m] = (rows.iter().map(|r| (r[m] - mean[m]).powi(2)).sum::<f64>() / (kf - 1.0)).sqrt();
    }
    Ok(CvReport {
        k,
        mean: MetricReport::from_array(mean, dataset.len()),
        std: MetricReport::from_array(std, k),
        folds,
    })
}

// ---------------------------------------------------------------------------
// Baseline.

/// Seasonal-naive predictions on the transformed scale (training center).
///
/// Each test month takes the observed value 12 months earlier, from either
/// split; when that month is not available it falls back to the last
/// training value.
pub fn seasonal_naive(train: &Dataset, test: &Dataset) -> Result<(Vec<f64>, TransformState), crate::Error> {
    let (train_t, state) = transform::forward(&train.counts_f64())?;
    let test_t = transform::apply(&test.counts_f64(), &state)?;
    let last = *train_t.last().ok_or(EvalError::EmptyInput)?;
    let lookup = |m: Month| -> Option<f64> {
        let find = |periods: &[Month], vals: &[f64]| {
            periods.iter().position(|p| *p == m).map(|i| vals[i])
        };
        find(&train.periods, &train_t).or_else(|| find(&test.periods, &test_t))
    };
    let preds = test
        .periods
        .iter()
        .map(|m| {
            let lagged = Month::from_ordinal(m.ordinal() - SEASONAL_LAG as i64);
            lookup(lagged).unwrap_or(last)
        })
        .collect();
    Ok((preds, state))
}

pub fn persistence_baseline(train: &Dataset, test: &Dataset) -> Result<MetricReport, crate::Error> {
    let (preds, state) = seasonal_naive(train, test)?;
    Ok(MetricReport::from_transformed(&preds, &test.counts_f64(), &state)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_cases() {
        let a = [1.0, -2.0, 3.5];
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        assert!((rmse(&shifted, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 5.0 / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mad_cases() {
        let a = [1.0, -2.0, 3.5];
        assert_eq!(mad(&a, &a).unwrap(), 0.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        assert!((mad(&shifted, &a).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(mad(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 3.5);
    }

    #[test]
    fn metric_errors() {
        assert_eq!(rmse(&[], &[]).unwrap_err(), EvalError::EmptyInput);
        assert!(matches!(mad(&[1.0], &[1.0, 2.0]), Err(EvalError::DimensionMismatch { .. })));
    }

    #[test]
    fn fold_partition() {
        let r = fold_ranges(20, 10);
        assert!(r.iter().all(|b| b.len() == 2));
        assert_eq!(r[9], 18..20);
        let r = fold_ranges(23, 10);
        let lens: Vec<usize> = r.iter().map(|b| b.len()).collect();
        assert_eq!(lens, vec![3, 3, 3, 2, 2, 2, 2, 2, 2, 2]);
        assert_eq!(r.last().unwrap().end, 23);
    }
}
