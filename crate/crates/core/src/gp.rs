//! Exact GP regression with a zero prior mean.
//!
//! Targets are expected to be transformed and centered already (see
//! [`crate::transform`]). Noise lives on the Gram diagonal through the
//! kernel's white-noise leaf, so `K(X, X)` here already includes `σₙ²·I`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::exec::Execution;
use crate::kernels::{incidence_kernel, HyperParams, InputPoint, ParamError, N_PARAMS};
use crate::linalg::{self, CholeskyFactor, LinalgError, Matrix};

/// Largest jitter, as a fraction of the mean Gram diagonal, allowed in `fit`.
pub const MAX_JITTER_FRACTION: f64 = 1e-4;

/// Two-sided 95% Gaussian multiplier.
pub const Z95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("no training points")]
    EmptyData,
    #[error("no prediction points")]
    EmptyPrediction,
    #[error("dimension mismatch: {points} points but {targets} targets")]
    LengthMismatch { points: usize, targets: usize },
    #[error("non-finite value in training data at index {0}")]
    NonFiniteData(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// A fitted GP: training data, hyperparameters, and the factorized system.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    points: Vec<InputPoint>,
    targets: Vec<f64>,
    theta: HyperParams,
    factor: CholeskyFactor,
    alpha: Vec<f64>,
    exec: Execution,
}

/// Predictive distribution of the latent function on the transformed scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
    /// Full posterior covariance, when requested.
    pub covariance: Option<Matrix>,
    /// How many variances came out negative and were clamped to zero.
    pub clamped: usize,
}

pub fn fit(points: &[InputPoint], targets: &[f64], theta: &HyperParams) -> Result<TrainedModel, GpError> {
    TrainedModel::fit(points, targets, theta, Execution::default())
}

impl TrainedModel {
    pub fn fit(
        points: &[InputPoint],
        targets: &[f64],
        theta: &HyperParams,
        exec: Execution,
    ) -> Result<Self, GpError> {
        if points.is_empty() {
            return Err(GpError::EmptyData);
        }
        if points.len() != targets.len() {
            return Err(GpError::LengthMismatch {
                points: points.len(),
                targets: targets.len(),
            });
        }
        if let Some(i) = points
            .iter()
            .zip(targets)
            .position(|(p, y)| !p.is_finite() || !y.is_finite())
        {
            return Err(GpError::NonFiniteData(i));
        }
        theta.validate()?;

        let k = incidence_kernel().gram(points, theta, false, exec).matrix;
        let max_jitter = MAX_JITTER_FRACTION * k.mean_diag();
        let factor = linalg::cholesky(&k, max_jitter)?;
        let alpha = linalg::solve_system(&factor, targets)?;
        Ok(Self {
            points: points.to_vec(),
            targets: targets.to_vec(),
            theta: *theta,
            factor,
            alpha,
            exec,
        })
    }

    pub fn points(&self) -> &[InputPoint] {
        &self.points
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn theta(&self) -> &HyperParams {
        &self.theta
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Posterior mean, pointwise variance and 95% band at `stars`.
    pub fn predict(&self, stars: &[InputPoint], full_cov: bool) -> Result<Prediction, GpError> {
        if stars.is_empty() {
            return Err(GpError::EmptyPrediction);
        }
        let kernel = incidence_kernel();
        let k_star = kernel.cross_gram(stars, &self.points, &self.theta, self.exec);
        let mean = k_star.matvec(&self.alpha)?;

        // v_i = L⁻¹·k(X, x*_i), one forward solve per test point
        let v: Vec<Result<Vec<f64>, LinalgError>> = self
            .exec
            .map(stars.len(), |i| linalg::solve_lower(&self.factor, k_star.row(i)));
        let v = v.into_iter().collect::<Result<Vec<_>, _>>()?;

        let p = self.theta.natural_values();
        let mut clamped = 0;
        let variance: Vec<f64> = stars
            .iter()
            .zip(&v)
            .map(|(s, vi)| {
                let prior = kernel.eval(&crate::kernels::PairGeometry::new(s, s, false), &p);
                let var = prior - vi.iter().map(|x| x * x).sum::<f64>();
                if var < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    var
                }
            })
            .collect();

        let covariance = if full_cov {
            let mut c = kernel.cross_gram(stars, stars, &self.theta, self.exec);
            for i in 0..stars.len() {
                for j in 0..=i {
                    let dot: f64 = v[i].iter().zip(&v[j]).map(|(a, b)| a * b).sum();
                    let val = c[(i, j)] - dot;
                    c[(i, j)] = val;
                    c[(j, i)] = val;
                }
            }
            Some(c)
        } else {
            None
        };

        let half: Vec<f64> = variance.iter().map(|v| Z95 * v.sqrt()).collect();
        Ok(Prediction {
            lower95: mean.iter().zip(&half).map(|(m, h)| m - h).collect(),
            upper95: mean.iter().zip(&half).map(|(m, h)| m + h).collect(),
            mean,
            variance,
            covariance,
            clamped,
        })
    }

    /// `log p(y | X) = −½·yᵀα − ½·log|K| − (n/2)·log 2π`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let fit: f64 = self.targets.iter().zip(&self.alpha).map(|(y, a)| y * a).sum();
        -0.5 * fit - 0.5 * linalg::log_det(&self.factor) - 0.5 * n * (2.0 * PI).ln()
    }

    /// Gradient of the log marginal likelihood with respect to the 12
    /// log-hyperparameters: `½·tr((ααᵀ − K⁻¹)·∂K/∂log θₘ)`.
    pub fn lml_gradient(&self) -> [f64; N_PARAMS] {
        let grads = incidence_kernel()
            .gram(&self.points, &self.theta, true, self.exec)
            .grads;
        let k_inv = linalg::spd_inverse(&self.factor);
        let n = self.len();
        let a = &self.alpha;
        let mut out = [0.0; N_PARAMS];
        for (m, dk) in grads.iter().enumerate() {
            let dk = dk.matrix();
            let mut acc = 0.0;
            for i in 0..n {
                let w_ii = a[i] * a[i] - k_inv[(i, i)];
                acc += 0.5 * w_ii * dk[(i, i)];
                for j in 0..i {
                    let w_ij = a[i] * a[j] - k_inv[(i, j)];
                    acc += w_ij * dk[(i, j)];
                }
            }
            out[m] = acc;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::NaturalParams;

    fn noise_only(sigman: f64) -> HyperParams {
        let tiny = 1e-150;
        HyperParams::from_natural(&NaturalParams {
            sigma1: tiny,
            l1: 1.0,
            sigma2: tiny,
            l2: 1.0,
            p: 12.0,
            lper: 1.0,
            sigma3: tiny * tiny,
            alpha: 1.0,
            l3: 1.0,
            sigmaf: tiny,
            l4: 1.0,
            sigman,
        })
    }

    #[test]
    fn scalar_noise_model() {
        let m = fit(&[InputPoint::at_time(1.0)], &[0.7], &noise_only(1.0)).unwrap();
        assert!((m.alpha()[0] - 0.7).abs() < 1e-15);
        let want = -0.49 / 2.0 - 0.5 * (2.0 * PI).ln();
        assert!((m.log_marginal_likelihood() - want).abs() < 1e-14);
    }

    #[test]
    fn duplicate_rows_fit() {
        let p = InputPoint::new(1.0, 0.2, -0.1, 0.3);
        let m = fit(&[p, p], &[0.1, -0.1], &noise_only(0.5));
        assert!(m.is_ok());
    }

    #[test]
    fn empty_and_mismatch() {
        let th = noise_only(1.0);
        assert_eq!(fit(&[], &[], &th).unwrap_err(), GpError::EmptyData);
        assert!(matches!(
            fit(&[InputPoint::at_time(1.0)], &[1.0, 2.0], &th),
            Err(GpError::LengthMismatch { .. })
        ));
        let m = fit(&[InputPoint::at_time(1.0)], &[1.0], &th).unwrap();
        assert_eq!(m.predict(&[], false).unwrap_err(), GpError::EmptyPrediction);
    }

    #[test]
    fn zero_targets_lml() {
        let pts: Vec<_> = (1..=4).map(|t| InputPoint::at_time(t as f64)).collect();
        let th = noise_only(0.5);
        let m = fit(&pts, &[0.0; 4], &th).unwrap();
        let want = -0.5 * linalg::log_det(m.factor()) - 2.0 * (2.0 * PI).ln();
        assert!((m.log_marginal_likelihood() - want).abs() < 1e-14);
    }

    #[test]
    fn far_point_reverts_to_prior() {
        let th = HyperParams::from_natural(&NaturalParams {
            sigma1: 1.0,
            l1: 2.0,
            sigma2: 0.5,
            l2: 3.0,
            p: 12.0,
            lper: 1.0,
            sigma3: 0.3,
            alpha: 1.0,
            l3: 2.0,
            sigmaf: 0.2,
            l4: 1.0,
            sigman: 0.1,
        });
        let pts: Vec<_> = (1..=6).map(|t| InputPoint::at_time(t as f64)).collect();
        let y = [0.3, -0.2, 0.5, 0.1, -0.4, 0.2];
        let m = fit(&pts, &y, &th).unwrap();
        let far = InputPoint::at_time(1e9);
        let pr = m.predict(&[far], false).unwrap();
        let prior = crate::kernels::composite(&far, &far, false, &th);
        assert!(pr.mean[0].abs() < 1e-12);
        assert!((pr.variance[0] - prior).abs() < 1e-12);
        assert!(pr.lower95[0] <= pr.mean[0] && pr.mean[0] <= pr.upper95[0]);
    }
}
