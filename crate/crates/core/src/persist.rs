//! JSON model document.
//!
//! The document stores what is needed to rebuild a [`Forecaster`]: the log
//! hyperparameters, transform center, covariate statistics, time origin,
//! training inputs and targets. Loading refits the GP from those, which
//! reproduces predictions up to factorization rounding.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CovariateStats, Month};
use crate::error::{Error, Result};
use crate::gp::TrainedModel;
use crate::kernels::{HyperParams, InputPoint, NaturalParams};
use crate::optimizer::{OptimResult, Termination};
use crate::pipeline::Forecaster;
use crate::transform::TransformState;

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "gpforecast";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const BACK_TRANSFORM_NOTE: &str =
    "count-scale values are exp(v + center) - 1 clamped at 0 (plug-in median, no lognormal mean correction)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self {
            name: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub final_nll: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub grad_norm: f64,
    pub termination: Termination,
}

impl From<&OptimResult> for FitSummary {
    fn from(o: &OptimResult) -> Self {
        Self {
            final_nll: o.final_nll,
            iterations: o.iterations,
            converged: o.converged,
            restart_index: o.restart_index,
            grad_norm: o.grad_norm,
            termination: o.termination,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub tool: ToolInfo,
    /// Caller-supplied echo of the run configuration.
    pub config: BTreeMap<String, String>,
    pub hyperparameters: HyperParams,
    /// Informational; `hyperparameters` is authoritative.
    pub natural_hyperparameters: NaturalParams,
    pub transform: TransformState,
    pub back_transform: String,
    pub covariate_stats: CovariateStats,
    pub origin: Month,
    pub train_periods: Vec<Month>,
    pub train_points: Vec<InputPoint>,
    pub targets: Vec<f64>,
    pub fit_summary: Option<FitSummary>,
}

impl ModelDocument {
    pub fn from_forecaster(fc: &Forecaster, config: BTreeMap<String, String>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            tool: ToolInfo::default(),
            config,
            hyperparameters: *fc.model.theta(),
            natural_hyperparameters: fc.model.theta().natural(),
            transform: fc.transform,
            back_transform: BACK_TRANSFORM_NOTE.to_string(),
            covariate_stats: fc.covariate_stats,
            origin: fc.origin,
            train_periods: fc.train_periods.clone(),
            train_points: fc.model.points().to_vec(),
            targets: fc.model.targets().to_vec(),
            fit_summary: fc.optim.as_ref().map(FitSummary::from),
        }
    }

    /// Refits the GP from the stored inputs.
    pub fn into_forecaster(self) -> Result<Forecaster> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Document(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.train_periods.len() != self.train_points.len() {
            return Err(Error::Document(format!(
                "{} train periods but {} train points",
                self.train_periods.len(),
                self.train_points.len()
            )));
        }
        self.hyperparameters.validate()?;
        let model = crate::gp::fit(&self.train_points, &self.targets, &self.hyperparameters)?;
        Ok(Forecaster {
            model,
            transform: self.transform,
            covariate_stats: self.covariate_stats,
            origin: self.origin,
            train_periods: self.train_periods,
            optim: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Rebuilds a bare model (no transform bookkeeping) from a document.
pub fn refit_model(doc: &ModelDocument) -> Result<TrainedModel> {
    Ok(crate::gp::fit(&doc.train_points, &doc.targets, &doc.hyperparameters)?)
}
