use thiserror::Error;

use crate::data::DataError;
use crate::eval::EvalError;
use crate::gp::GpError;
use crate::kernels::ParamError;
use crate::optimizer::OptimError;
use crate::transform::TransformError;

/// Errors from the end-to-end pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("transform: {0}")]
    Transform(#[from] TransformError),
    #[error("gp: {0}")]
    Gp(#[from] GpError),
    #[error("optimizer: {0}")]
    Optim(#[from] OptimError),
    #[error("eval: {0}")]
    Eval(#[from] EvalError),
    #[error("hyperparameters: {0}")]
    Params(#[from] ParamError),
    #[error("model document: {0}")]
    Document(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
