//! BFGS with Armijo backtracking, and multi-start maximization of the log
//! marginal likelihood over the 12 log-hyperparameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::gp::TrainedModel;
use crate::kernels::{HyperParams, InputPoint, Param, N_PARAMS};

pub const ARMIJO_C1: f64 = 1e-4;
pub const BACKTRACK_FACTOR: f64 = 0.5;
pub const MAX_BACKTRACKS: usize = 60;
/// BFGS updates are skipped unless `sᵀy` exceeds this.
pub const CURVATURE_EPS: f64 = 1e-10;
/// Relative noise floor: `σₙ ≥ NOISE_FLOOR_FRACTION · std(targets)`.
pub const NOISE_FLOOR_FRACTION: f64 = 1e-6;
/// Half-width of the uniform log-space perturbation for restarts.
pub const RESTART_SPREAD: f64 = 0.5;
pub const DEFAULT_RESTARTS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("objective is not finite at the starting point")]
    NonFiniteObjective,
    #[error("every restart failed to produce a finite objective ({0} tried)")]
    AllRestartsFailed(usize),
    #[error("restarts must be at least 1")]
    NoRestarts,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Why the iteration stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
    NonFiniteGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOptions {
    /// Stop when the (projected) gradient max-norm falls below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Per-coordinate lower bounds; iterates are projected onto them.
    pub lower_bounds: Option<Vec<f64>>,
    /// Cap on the max-norm of a trial step.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iters: 500,
            lower_bounds: None,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Max-norm of the projected gradient at `x`.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

/// Something BFGS can minimize. `gradient` is only ever requested at the
/// point most recently passed to `value`, which lets implementations cache.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;
}

struct ClosureObjective<F, G> {
    f: F,
    g: G,
}

impl<F, G> Objective for ClosureObjective<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        (self.g)(x)
    }
}

pub fn bfgs_minimize<F, G>(
    objective: F,
    gradient: G,
    x0: &[f64],
    options: &BfgsOptions,
) -> Result<BfgsOutcome, OptimError>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    minimize(&mut ClosureObjective { f: objective, g: gradient }, x0, options)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn project(x: &mut [f64], lower: Option<&[f64]>) {
    if let Some(lb) = lower {
        for (xi, &l) in x.iter_mut().zip(lb) {
            if *xi < l {
                *xi = l;
            }
        }
    }
}

/// Coordinates pinned at their bound with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], lower: Option<&[f64]>) -> Vec<bool> {
    match lower {
        Some(lb) => x
            .iter()
            .zip(g)
            .zip(lb)
            .map(|((&xi, &gi), &l)| xi <= l && gi > 0.0)
            .collect(),
        None => vec![false; x.len()],
    }
}

/// BFGS on the inverse Hessian with Armijo backtracking.
pub fn minimize<O: Objective>(
    obj: &mut O,
    x0: &[f64],
    options: &BfgsOptions,
) -> Result<BfgsOutcome, OptimError> {
    let n = x0.len();
    let lower = options.lower_bounds.as_deref();
    if let Some(lb) = lower {
        if lb.len() != n {
            return Err(OptimError::DimensionMismatch {
                expected: n,
                actual: lb.len(),
            });
        }
    }

    let mut x = x0.to_vec();
    project(&mut x, lower);
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(OptimError::NonFiniteObjective);
    }
    let mut g = obj.gradient(&x);
    if g.len() != n {
        return Err(OptimError::DimensionMismatch {
            expected: n,
            actual: g.len(),
        });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(OptimError::NonFiniteObjective);
    }

    // Inverse Hessian approximation, row-major.
    let mut h = identity(n);
    let mut scaled = false;
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;

    loop {
        let active = active_set(&x, &g, lower);
        let pg: Vec<f64> = g
            .iter()
            .zip(&active)
            .map(|(&gi, &a)| if a { 0.0 } else { gi })
            .collect();
        if max_norm(&pg) < options.tol {
            termination = Termination::GradientTolerance;
            break;
        }
        if iterations >= options.max_iters {
            break;
        }

        let mut d = mat_vec_neg(&h, &pg);
        for (di, &a) in d.iter_mut().zip(&active) {
            if a {
                *di = 0.0;
            }
        }
        if dot(&pg, &d) >= 0.0 {
            h = identity(n);
            scaled = false;
            d = pg.iter().map(|v| -v).collect();
        }
        let dn = max_norm(&d);
        if dn > options.max_step {
            let s = options.max_step / dn;
            d.iter_mut().for_each(|v| *v *= s);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + t * di).collect();
            project(&mut xn, lower);
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let fn_ = obj.value(&xn);
            if fn_.is_finite() && fn_ < f && fn_ <= f + ARMIJO_C1 * dot(&g, &s) {
                accepted = Some((xn, s, fn_));
                break;
            }
            t *= BACKTRACK_FACTOR;
        }
        let Some((xn, s, fn_)) = accepted else {
            termination = Termination::LineSearchFailed;
            break;
        };

        let gn = obj.gradient(&xn);
        iterations += 1;
        if gn.iter().any(|v| !v.is_finite()) {
            x = xn;
            f = fn_;
            trace.push(f);
            termination = Termination::NonFiniteGradient;
            break;
        }
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_EPS {
            if !scaled {
                let gamma = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().for_each(|v| *v *= gamma);
                scaled = true;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
        x = xn;
        f = fn_;
        g = gn;
        trace.push(f);
    }

    let active = active_set(&x, &g, lower);
    let grad_norm = g
        .iter()
        .zip(&active)
        .fold(0.0_f64, |m, (&gi, &a)| if a { m } else { m.max(gi.abs()) });
    Ok(BfgsOutcome {
        converged: termination == Termination::GradientTolerance,
        x,
        value: f,
        gradient: g,
        grad_norm,
        iterations,
        termination,
        trace,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn mat_vec_neg(h: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], v)).collect()
}

/// `H ← (I − ρ·s·yᵀ)·H·(I − ρ·y·sᵀ) + ρ·s·sᵀ` with `ρ = 1/(sᵀy)`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], y)).collect();
    let yhy = dot(y, &hy);
    let coef = (1.0 + rho * yhy) * rho;
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

// ---------------------------------------------------------------------------
// Hyperparameter fitting.

/// Result of maximizing the marginal likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub theta: HyperParams,
    /// Negative log marginal likelihood at `theta`.
    pub final_nll: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restart_index: usize,
    pub grad_norm: f64,
    pub termination: Termination,
    /// Accepted-iterate objective values of the winning restart.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
    /// Max-norm of a single log-space step.
    pub max_step: f64,
    pub exec: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            tol: 1e-5,
            max_iters: 400,
            max_step: 2.0,
            exec: Execution::default(),
        }
    }
}

/// Negative log marginal likelihood over log-hyperparameters, caching the
/// last fitted model so a gradient request reuses the factorization.
pub struct NegLogLikelihood<'a> {
    points: &'a [InputPoint],
    targets: &'a [f64],
    exec: Execution,
    cache: Option<(Vec<f64>, TrainedModel)>,
}

impl<'a> NegLogLikelihood<'a> {
    pub fn new(points: &'a [InputPoint], targets: &'a [f64], exec: Execution) -> Self {
        Self {
            points,
            targets,
            exec,
            cache: None,
        }
    }

    fn model(&mut self, x: &[f64]) -> Option<&TrainedModel> {
        let hit = matches!(&self.cache, Some((cx, _)) if cx.as_slice() == x);
        if !hit {
            self.cache = None;
            let theta = HyperParams::from_log_slice(x).ok()?;
            let model = TrainedModel::fit(self.points, self.targets, &theta, self.exec).ok()?;
            self.cache = Some((x.to_vec(), model));
        }
        self.cache.as_ref().map(|(_, m)| m)
    }
}

impl Objective for NegLogLikelihood<'_> {
    fn value(&mut self, x: &[f64]) -> f64 {
        match self.model(x) {
            Some(m) => -m.log_marginal_likelihood(),
            None => f64::INFINITY,
        }
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        match self.model(x) {
            Some(m) => m.lml_gradient().iter().map(|g| -g).collect(),
            None => vec![f64::NAN; N_PARAMS],
        }
    }
}

/// Negative log marginal likelihood at `theta`, or `None` if the Gram matrix
/// cannot be factorized.
pub fn negative_lml(points: &[InputPoint], targets: &[f64], theta: &HyperParams) -> Option<f64> {
    let v = NegLogLikelihood::new(points, targets, Execution::Sequential).value(theta.log_values());
    v.is_finite().then_some(v)
}

fn population_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Target scale for initialization; degenerate (constant) targets fall back to 1.
pub fn target_scale(targets: &[f64]) -> f64 {
    let s = population_std(targets);
    if s.is_finite() && s > 0.0 {
        s
    } else {
        1.0
    }
}

/// Lower bound on `log σₙ`.
pub fn log_noise_floor(targets: &[f64]) -> f64 {
    (NOISE_FLOOR_FRACTION * target_scale(targets)).ln()
}

/// Median Euclidean distance over all distinct pairs.
pub fn median_pairwise_distance(points: &[InputPoint]) -> f64 {
    let mut d: Vec<f64> = points
        .iter()
        .enumerate()
        .flat_map(|(i, a)| points[..i].iter().map(move |b| a.distance(b)))
        .collect();
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let med = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// Data-driven starting point in log space.
pub fn initial_theta(points: &[InputPoint], targets: &[f64]) -> HyperParams {
    let std = target_scale(targets);
    let third_var = std * std / 3.0;
    let sig = third_var.sqrt().ln();
    let len = median_pairwise_distance(points).ln();
    let mut log = [0.0; N_PARAMS];
    log[Param::Sigma1.index()] = sig;
    log[Param::L1.index()] = len;
    log[Param::Sigma2.index()] = sig;
    log[Param::L2.index()] = len;
    log[Param::Period.index()] = 12f64.ln();
    log[Param::LPer.index()] = 0.0;
    log[Param::Sigma3.index()] = third_var.ln();
    log[Param::Alpha.index()] = 0.0;
    log[Param::L3.index()] = len;
    log[Param::SigmaF.index()] = sig;
    log[Param::L4.index()] = len;
    log[Param::SigmaN.index()] = (0.1 * std).ln().max(log_noise_floor(targets));
    HyperParams::from_log(log).expect("initial hyperparameters are finite")
}

/// Starting points: the canonical one, then `restarts − 1` seeded perturbations.
pub fn restart_points(base: &HyperParams, restarts: usize, seed: u64, floor: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![base.log_values().to_vec()];
    for _ in 1..restarts {
        let mut x: Vec<f64> = base
            .log_values()
            .iter()
            .map(|v| v + rng.gen_range(-RESTART_SPREAD..=RESTART_SPREAD))
            .collect();
        let sn = &mut x[Param::SigmaN.index()];
        *sn = sn.max(floor);
        out.push(x);
    }
    out
}

pub fn fit_hyperparams(
    points: &[InputPoint],
    targets: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<OptimResult, OptimError> {
    fit_hyperparams_with(
        points,
        targets,
        &FitConfig {
            restarts,
            seed,
            ..FitConfig::default()
        },
    )
}

/// Multi-start BFGS on the negative log marginal likelihood. The winner is
/// the smallest `(final_nll, restart_index)`, so serial and parallel runs
/// agree exactly.
pub fn fit_hyperparams_with(
    points: &[InputPoint],
    targets: &[f64],
    config: &FitConfig,
) -> Result<OptimResult, OptimError> {
    if config.restarts == 0 {
        return Err(OptimError::NoRestarts);
    }
    let floor = log_noise_floor(targets);
    let base = initial_theta(points, targets);
    let starts = restart_points(&base, config.restarts, config.seed, floor);
    let mut lower = vec![f64::NEG_INFINITY; N_PARAMS];
    lower[Param::SigmaN.index()] = floor;
    let options = BfgsOptions {
        tol: config.tol,
        max_iters: config.max_iters,
        lower_bounds: Some(lower),
        max_step: config.max_step,
    };

    let runs = config.exec.map(starts.len(), |r| {
        let mut obj = NegLogLikelihood::new(points, targets, config.exec);
        minimize(&mut obj, &starts[r], &options).map(|o| (r, o))
    });

    runs.into_iter()
        .filter_map(Result::ok)
        .min_by(|(ra, a), (rb, b)| a.value.total_cmp(&b.value).then(ra.cmp(rb)))
        .map(|(r, o)| OptimResult {
            theta: HyperParams::from_log_slice(&o.x).expect("accepted iterates are finite"),
            final_nll: o.value,
            iterations: o.iterations,
            converged: o.converged,
            restart_index: r,
            grad_norm: o.grad_norm,
            termination: o.termination,
            trace: o.trace,
        })
        .ok_or(OptimError::AllRestartsFailed(config.restarts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let c = [1.0, 2.0, 3.0];
        let out = bfgs_minimize(
            |x| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum(),
            |x| x.iter().zip(&c).map(|(a, b)| 2.0 * (a - b)).collect(),
            &[0.0; 3],
            &BfgsOptions {
                tol: 1e-10,
                ..BfgsOptions::default()
            },
        )
        .unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 10, "{} iterations", out.iterations);
        for (a, b) in out.x.iter().zip(&c) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let g = |x: &[f64]| {
            vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]
        };
        let out = bfgs_minimize(
            f,
            g,
            &[-1.2, 1.0],
            &BfgsOptions {
                tol: 1e-8,
                max_iters: 1000,
                ..BfgsOptions::default()
            },
        )
        .unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-5 && (out.x[1] - 1.0).abs() < 1e-5, "{:?}", out);
        assert!(out.trace.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn non_finite_start() {
        let err = bfgs_minimize(|_| f64::NAN, |_| vec![0.0], &[0.0], &BfgsOptions::default());
        assert_eq!(err.unwrap_err(), OptimError::NonFiniteObjective);
    }

    #[test]
    fn lower_bound_respected() {
        // minimum at x = -3, bound at -1
        let opts = BfgsOptions {
            lower_bounds: Some(vec![-1.0]),
            ..BfgsOptions::default()
        };
        let out = bfgs_minimize(|x| (x[0] + 3.0).powi(2), |x| vec![2.0 * (x[0] + 3.0)], &[2.0], &opts)
            .unwrap();
        assert_eq!(out.x[0], -1.0);
        assert!(out.converged);
    }

    #[test]
    fn median_distance() {
        let pts: Vec<_> = [0.0, 1.0, 3.0].iter().map(|&t| InputPoint::at_time(t)).collect();
        // distances 1, 3, 2
        assert_eq!(median_pairwise_distance(&pts), 2.0);
        assert_eq!(median_pairwise_distance(&pts[..1]), 1.0);
    }

    #[test]
    fn zero_restarts_rejected() {
        let pts = [InputPoint::at_time(1.0)];
        assert_eq!(
            fit_hyperparams(&pts, &[0.0], 0, 0).unwrap_err(),
            OptimError::NoRestarts
        );
    }

    #[test]
    fn restart_points_are_seeded() {
        let pts: Vec<_> = (1..=5).map(|t| InputPoint::at_time(t as f64)).collect();
        let base = initial_theta(&pts, &[0.1, -0.2, 0.3, 0.0, -0.2]);
        let a = restart_points(&base, 4, 7, -100.0);
        let b = restart_points(&base, 4, 7, -100.0);
        assert_eq!(a, b);
        assert_eq!(a[0], base.log_values().to_vec());
        for x in &a[1..] {
            for (v, b0) in x.iter().zip(base.log_values()) {
                assert!((v - b0).abs() <= RESTART_SPREAD);
            }
        }
    }
}
