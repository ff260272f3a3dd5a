//! Exact Gaussian-process regression for seasonal incidence forecasting.
//!
//! The crate models monthly case counts as a function of a running month
//! index and standardized climate covariates (rainfall, humidity,
//! temperature):
//!
//! * [`data`] reads incidence/climate CSVs, reduces weekly series to months
//!   and builds train/test splits standardized on training rows.
//! * [`transform`] applies `log1p` and centering to the counts.
//! * [`kernels`] defines the four-part covariance (Matérn 5/2, decaying
//!   seasonal, rational quadratic, correlated + white noise) and its
//!   analytic log-parameter gradients.
//! * [`gp`] fits and predicts through a jittered Cholesky factor
//!   ([`linalg`]) and evaluates the log marginal likelihood and gradient.
//! * [`optimizer`] maximizes that likelihood with multi-start BFGS.
//! * [`eval`] scores forecasts, runs blocked k-fold CV and a seasonal-naive
//!   baseline.
//!
//! Restarts, CV folds and Gram rows run on rayon when the `parallel`
//! feature is enabled; results are identical either way.

pub mod data;
pub mod error;
pub mod eval;
pub mod exec;
pub mod gp;
pub mod kernels;
pub mod linalg;
pub mod optimizer;
pub mod persist;
pub mod pipeline;
pub mod synthetic;
pub mod transform;

pub use error::{Error, Result};
pub use exec::Execution;
pub use kernels::{HyperParams, InputPoint, NaturalParams, Param};
pub use pipeline::{Forecast, Forecaster};
