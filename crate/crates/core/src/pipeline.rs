//! End-to-end forecaster: response transform, hyperparameter search, exact
//! GP fit, and forecasts reported on both the transformed and count scales.

use crate::data::{time_index, CovariateStats, Covariates, Dataset, Month};
use crate::error::Result;
use crate::gp::TrainedModel;
use crate::kernels::{HyperParams, InputPoint};
use crate::optimizer::{fit_hyperparams_with, FitConfig, OptimResult};
use crate::transform::{self, TransformState};

/// A trained model together with everything needed to map new months onto it.
#[derive(Debug, Clone)]
pub struct Forecaster {
    pub model: TrainedModel,
    pub transform: TransformState,
    pub covariate_stats: CovariateStats,
    pub origin: Month,
    pub train_periods: Vec<Month>,
    pub optim: Option<OptimResult>,
}

/// Per-month predictive summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub periods: Vec<Month>,
    pub mean_transformed: Vec<f64>,
    pub variance_transformed: Vec<f64>,
    pub lo95_transformed: Vec<f64>,
    pub hi95_transformed: Vec<f64>,
    pub mean_count: Vec<f64>,
    pub lo95_count: Vec<f64>,
    pub hi95_count: Vec<f64>,
    /// Variances clamped at zero during prediction.
    pub clamped: usize,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

/// Transforms the counts, searches hyperparameters, and fits the GP.
pub fn train(dataset: &Dataset, config: &FitConfig) -> Result<Forecaster> {
    let (targets, state) = transform::forward(&dataset.counts_f64())?;
    let optim = fit_hyperparams_with(&dataset.points, &targets, config)?;
    let model = TrainedModel::fit(&dataset.points, &targets, &optim.theta, config.exec)?;
    Ok(Forecaster {
        model,
        transform: state,
        covariate_stats: dataset.covariate_stats,
        origin: dataset.origin,
        train_periods: dataset.periods.clone(),
        optim: Some(optim),
    })
}

/// Fits the GP at fixed hyperparameters, skipping the search.
pub fn train_with_theta(dataset: &Dataset, theta: &HyperParams) -> Result<Forecaster> {
    let (targets, state) = transform::forward(&dataset.counts_f64())?;
    let model = crate::gp::fit(&dataset.points, &targets, theta)?;
    Ok(Forecaster {
        model,
        transform: state,
        covariate_stats: dataset.covariate_stats,
        origin: dataset.origin,
        train_periods: dataset.periods.clone(),
        optim: None,
    })
}

impl Forecaster {
    /// Model inputs for months and raw covariates, using the training
    /// standardization and time origin.
    pub fn inputs(&self, periods: &[Month], raw: &[Covariates]) -> Vec<InputPoint> {
        periods
            .iter()
            .zip(raw)
            .map(|(m, c)| self.covariate_stats.standardize(time_index(self.origin, *m), c))
            .collect()
    }

    pub fn forecast_rows(&self, periods: &[Month], raw: &[Covariates]) -> Result<Forecast> {
        let pts = self.inputs(periods, raw);
        let pred = self.model.predict(&pts, false)?;
        let s = &self.transform;
        Ok(Forecast {
            periods: periods.to_vec(),
            mean_count: transform::inverse(&pred.mean, s),
            lo95_count: transform::inverse(&pred.lower95, s),
            hi95_count: transform::inverse(&pred.upper95, s),
            mean_transformed: pred.mean,
            variance_transformed: pred.variance,
            lo95_transformed: pred.lower95,
            hi95_transformed: pred.upper95,
            clamped: pred.clamped,
        })
    }

    pub fn forecast(&self, dataset: &Dataset) -> Result<Forecast> {
        self.forecast_rows(&dataset.periods, &dataset.raw)
    }

    /// Observed counts of `dataset` on this model's transformed scale.
    pub fn transformed_actuals(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        Ok(transform::apply(&dataset.counts_f64(), &self.transform)?)
    }
}
