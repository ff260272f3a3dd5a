//! Covariance functions for monthly incidence with climate covariates.
//!
//! The model kernel is a sum of four parts:
//!
//! * a Matérn 5/2 term for short-range correlation,
//! * a squared-exponential × periodic product for decaying seasonality,
//! * a rational quadratic term for multi-scale irregularities,
//! * a squared-exponential plus white-noise term for correlated and
//!   independent noise.
//!
//! Distances: every stationary factor uses the Euclidean distance over the
//! 4-d input (running month index plus three standardized covariates). The
//! periodic factor uses the time distance only, since its period is a
//! calendar period. The white-noise delta fires on identical *dataset index*,
//! never on coordinate equality, so it appears only on the diagonal of a
//! training Gram matrix.
//!
//! All 12 hyperparameters live in log space. Gradients are taken with respect
//! to the log parameters.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::linalg::{Matrix, SymmetricMatrix};

pub const N_PARAMS: usize = 12;

/// One observation's inputs: running month index and standardized covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputPoint {
    pub t: f64,
    pub rainfall: f64,
    pub humidity: f64,
    pub temperature: f64,
}

impl InputPoint {
    pub fn new(t: f64, rainfall: f64, humidity: f64, temperature: f64) -> Self {
        Self {
            t,
            rainfall,
            humidity,
            temperature,
        }
    }

    /// A point with all covariates at their training mean.
    pub fn at_time(t: f64) -> Self {
        Self::new(t, 0.0, 0.0, 0.0)
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.t, self.rainfall, self.humidity, self.temperature]
    }

    pub fn sq_distance(&self, other: &InputPoint) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn distance(&self, other: &InputPoint) -> f64 {
        self.sq_distance(other).sqrt()
    }

    pub fn time_distance(&self, other: &InputPoint) -> f64 {
        (self.t - other.t).abs()
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|v| v.is_finite())
    }
}

/// Slot of each hyperparameter in [`HyperParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Sigma1 = 0,
    L1 = 1,
    Sigma2 = 2,
    L2 = 3,
    Period = 4,
    LPer = 5,
    Sigma3 = 6,
    Alpha = 7,
    L3 = 8,
    SigmaF = 9,
    L4 = 10,
    SigmaN = 11,
}

impl Param {
    pub const ALL: [Param; N_PARAMS] = [
        Param::Sigma1,
        Param::L1,
        Param::Sigma2,
        Param::L2,
        Param::Period,
        Param::LPer,
        Param::Sigma3,
        Param::Alpha,
        Param::L3,
        Param::SigmaF,
        Param::L4,
        Param::SigmaN,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Natural-scale name, as used in reports.
    pub fn name(self) -> &'static str {
        match self {
            Param::Sigma1 => "sigma1",
            Param::L1 => "l1",
            Param::Sigma2 => "sigma2",
            Param::L2 => "l2",
            Param::Period => "p",
            Param::LPer => "lper",
            Param::Sigma3 => "sigma3",
            Param::Alpha => "alpha",
            Param::L3 => "l3",
            Param::SigmaF => "sigmaf",
            Param::L4 => "l4",
            Param::SigmaN => "sigman",
        }
    }
}

/// Natural-scale (positive) hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalParams {
    pub sigma1: f64,
    pub l1: f64,
    pub sigma2: f64,
    pub l2: f64,
    pub p: f64,
    pub lper: f64,
    pub sigma3: f64,
    pub alpha: f64,
    pub l3: f64,
    pub sigmaf: f64,
    pub l4: f64,
    pub sigman: f64,
}

impl NaturalParams {
    pub fn to_array(&self) -> [f64; N_PARAMS] {
        [
            self.sigma1,
            self.l1,
            self.sigma2,
            self.l2,
            self.p,
            self.lper,
            self.sigma3,
            self.alpha,
            self.l3,
            self.sigmaf,
            self.l4,
            self.sigman,
        ]
    }

    pub fn from_array(v: [f64; N_PARAMS]) -> Self {
        Self {
            sigma1: v[0],
            l1: v[1],
            sigma2: v[2],
            l2: v[3],
            p: v[4],
            lper: v[5],
            sigma3: v[6],
            alpha: v[7],
            l3: v[8],
            sigmaf: v[9],
            l4: v[10],
            sigman: v[11],
        }
    }
}

/// Log-space named form used for serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LogParamsDoc {
    log_sigma1: f64,
    log_l1: f64,
    log_sigma2: f64,
    log_l2: f64,
    log_p: f64,
    log_lper: f64,
    log_sigma3: f64,
    log_alpha: f64,
    log_l3: f64,
    log_sigmaf: f64,
    log_l4: f64,
    log_sigman: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("hyperparameter {name} has non-finite log value {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("expected {N_PARAMS} hyperparameters, got {0}")]
    WrongLength(usize),
}

/// The 12 kernel hyperparameters, stored as logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "LogParamsDoc", into = "LogParamsDoc")]
pub struct HyperParams {
    log: [f64; N_PARAMS],
}

impl From<LogParamsDoc> for HyperParams {
    fn from(d: LogParamsDoc) -> Self {
        Self {
            log: [
                d.log_sigma1,
                d.log_l1,
                d.log_sigma2,
                d.log_l2,
                d.log_p,
                d.log_lper,
                d.log_sigma3,
                d.log_alpha,
                d.log_l3,
                d.log_sigmaf,
                d.log_l4,
                d.log_sigman,
            ],
        }
    }
}

impl From<HyperParams> for LogParamsDoc {
    fn from(h: HyperParams) -> Self {
        let v = h.log;
        Self {
            log_sigma1: v[0],
            log_l1: v[1],
            log_sigma2: v[2],
            log_l2: v[3],
            log_p: v[4],
            log_lper: v[5],
            log_sigma3: v[6],
            log_alpha: v[7],
            log_l3: v[8],
            log_sigmaf: v[9],
            log_l4: v[10],
            log_sigman: v[11],
        }
    }
}

impl HyperParams {
    pub fn from_log(log: [f64; N_PARAMS]) -> Result<Self, ParamError> {
        let h = Self { log };
        h.validate()?;
        Ok(h)
    }

    pub fn from_log_slice(log: &[f64]) -> Result<Self, ParamError> {
        let arr: [f64; N_PARAMS] = log
            .try_into()
            .map_err(|_| ParamError::WrongLength(log.len()))?;
        Self::from_log(arr)
    }

    /// Panics on non-positive values; intended for literals and tests.
    pub fn from_natural(n: &NaturalParams) -> Self {
        let log = n.to_array().map(f64::ln);
        Self::from_log(log).expect("natural hyperparameters must be positive and finite")
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for p in Param::ALL {
            let v = self.log[p.index()];
            if !v.is_finite() || !v.exp().is_finite() || v.exp() <= 0.0 {
                return Err(ParamError::NonFinite {
                    name: p.name(),
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn log_values(&self) -> &[f64; N_PARAMS] {
        &self.log
    }

    pub fn natural_values(&self) -> [f64; N_PARAMS] {
        self.log.map(f64::exp)
    }

    pub fn natural(&self) -> NaturalParams {
        NaturalParams::from_array(self.natural_values())
    }

    pub fn get(&self, p: Param) -> f64 {
        self.log[p.index()].exp()
    }

    pub fn log_of(&self, p: Param) -> f64 {
        self.log[p.index()]
    }

    pub fn with_log(mut self, p: Param, value: f64) -> Self {
        self.log[p.index()] = value;
        self
    }
}

// ---------------------------------------------------------------------------
// Leaf formulas on precomputed distances.

fn matern52_r(r: f64, sigma: f64, l: f64) -> f64 {
    let u = 5f64.sqrt() * r / l;
    sigma * sigma * (1.0 + u + u * u / 3.0) * (-u).exp()
}

fn squared_exp_r2(r2: f64, sigma: f64, l: f64) -> f64 {
    sigma * sigma * (-r2 / (2.0 * l * l)).exp()
}

fn periodic_dt(dt: f64, p: f64, lper: f64) -> f64 {
    let s = (PI * dt / p).sin();
    (-2.0 * s * s / (lper * lper)).exp()
}

fn rational_quadratic_r2(r2: f64, sigma3: f64, alpha: f64, l: f64) -> f64 {
    let z = r2 / (2.0 * alpha * l * l);
    sigma3 * (-alpha * z.ln_1p()).exp()
}

/// Matérn 5/2 over the Euclidean input distance.
pub fn matern52(a: &InputPoint, b: &InputPoint, sigma1: f64, l1: f64) -> f64 {
    matern52_r(a.distance(b), sigma1, l1)
}

/// Squared exponential over the Euclidean input distance.
pub fn squared_exp(a: &InputPoint, b: &InputPoint, sigma: f64, l: f64) -> f64 {
    squared_exp_r2(a.sq_distance(b), sigma, l)
}

/// Periodic factor over the time distance only.
pub fn periodic(a: &InputPoint, b: &InputPoint, p: f64, lper: f64) -> f64 {
    periodic_dt(a.time_distance(b), p, lper)
}

/// Decaying seasonal component: squared exponential × periodic.
pub fn seasonal(a: &InputPoint, b: &InputPoint, sigma2: f64, l2: f64, p: f64, lper: f64) -> f64 {
    squared_exp(a, b, sigma2, l2) * periodic(a, b, p, lper)
}

/// Rational quadratic; the magnitude `sigma3` enters unsquared.
pub fn rational_quadratic(a: &InputPoint, b: &InputPoint, sigma3: f64, alpha: f64, l3: f64) -> f64 {
    rational_quadratic_r2(a.sq_distance(b), sigma3, alpha, l3)
}

/// Correlated noise plus the independent term on identical dataset index.
pub fn noise_kernel(
    a: &InputPoint,
    b: &InputPoint,
    same_index: bool,
    sigmaf: f64,
    l4: f64,
    sigman: f64,
) -> f64 {
    let delta = if same_index { sigman * sigman } else { 0.0 };
    squared_exp(a, b, sigmaf, l4) + delta
}

/// The full model kernel evaluated for one pair.
pub fn composite(a: &InputPoint, b: &InputPoint, same_index: bool, theta: &HyperParams) -> f64 {
    incidence_kernel().eval(&PairGeometry::new(a, b, same_index), &theta.natural_values())
}

// ---------------------------------------------------------------------------
// Composition tree.

/// Distances between two points, computed once per pair.
#[derive(Debug, Clone, Copy)]
pub struct PairGeometry {
    pub r: f64,
    pub r2: f64,
    pub dt: f64,
    pub same_index: bool,
}

impl PairGeometry {
    pub fn new(a: &InputPoint, b: &InputPoint, same_index: bool) -> Self {
        let r2 = a.sq_distance(b);
        Self {
            r: r2.sqrt(),
            r2,
            dt: a.time_distance(b),
            same_index,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelTreeError {
    #[error("combinator node needs at least two children")]
    TooFewChildren,
    #[error("parameter slot {0} is out of range")]
    SlotOutOfRange(usize),
    #[error("parameter slot {0} is referenced {1} times")]
    SlotReuse(usize, usize),
    #[error("parameter slot {0} is never referenced")]
    SlotUnused(usize),
}

/// A covariance function built from leaves joined by sums and products.
/// Leaves carry the [`HyperParams`] slots they read.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelNode {
    Matern52 { sigma: usize, length: usize },
    SquaredExp { sigma: usize, length: usize },
    Periodic { period: usize, length: usize },
    RationalQuadratic { sigma: usize, alpha: usize, length: usize },
    WhiteNoise { sigma: usize },
    Sum(Vec<KernelNode>),
    Product(Vec<KernelNode>),
}

type Grad = [f64; N_PARAMS];

impl KernelNode {
    /// The four-part incidence kernel with the canonical slot layout of [`Param`].
    pub fn incidence() -> Self {
        use KernelNode::*;
        Sum(vec![
            Matern52 {
                sigma: Param::Sigma1.index(),
                length: Param::L1.index(),
            },
            Product(vec![
                SquaredExp {
                    sigma: Param::Sigma2.index(),
                    length: Param::L2.index(),
                },
                Periodic {
                    period: Param::Period.index(),
                    length: Param::LPer.index(),
                },
            ]),
            RationalQuadratic {
                sigma: Param::Sigma3.index(),
                alpha: Param::Alpha.index(),
                length: Param::L3.index(),
            },
            Sum(vec![
                SquaredExp {
                    sigma: Param::SigmaF.index(),
                    length: Param::L4.index(),
                },
                WhiteNoise {
                    sigma: Param::SigmaN.index(),
                },
            ]),
        ])
    }

    pub fn children(&self) -> &[KernelNode] {
        match self {
            KernelNode::Sum(c) | KernelNode::Product(c) => c,
            _ => &[],
        }
    }

    pub fn param_slots(&self) -> Vec<usize> {
        match self {
            KernelNode::Matern52 { sigma, length } | KernelNode::SquaredExp { sigma, length } => {
                vec![*sigma, *length]
            }
            KernelNode::Periodic { period, length } => vec![*period, *length],
            KernelNode::RationalQuadratic {
                sigma,
                alpha,
                length,
            } => vec![*sigma, *alpha, *length],
            KernelNode::WhiteNoise { sigma } => vec![*sigma],
            KernelNode::Sum(_) | KernelNode::Product(_) => Vec::new(),
        }
    }

    /// Checks arity and that every slot is read by exactly one leaf.
    pub fn validate(&self) -> Result<(), KernelTreeError> {
        let mut counts = [0usize; N_PARAMS];
        self.count_slots(&mut counts)?;
        for (slot, &c) in counts.iter().enumerate() {
            match c {
                0 => return Err(KernelTreeError::SlotUnused(slot)),
                1 => {}
                n => return Err(KernelTreeError::SlotReuse(slot, n)),
            }
        }
        Ok(())
    }

    fn count_slots(&self, counts: &mut [usize; N_PARAMS]) -> Result<(), KernelTreeError> {
        let children = self.children();
        if matches!(self, KernelNode::Sum(_) | KernelNode::Product(_)) && children.len() < 2 {
            return Err(KernelTreeError::TooFewChildren);
        }
        for slot in self.param_slots() {
            *counts
                .get_mut(slot)
                .ok_or(KernelTreeError::SlotOutOfRange(slot))? += 1;
        }
        for c in children {
            c.count_slots(counts)?;
        }
        Ok(())
    }

    /// Kernel value for one pair; `p` holds natural-scale parameters.
    pub fn eval(&self, g: &PairGeometry, p: &[f64; N_PARAMS]) -> f64 {
        match *self {
            KernelNode::Matern52 { sigma, length } => matern52_r(g.r, p[sigma], p[length]),
            KernelNode::SquaredExp { sigma, length } => squared_exp_r2(g.r2, p[sigma], p[length]),
            KernelNode::Periodic { period, length } => periodic_dt(g.dt, p[period], p[length]),
            KernelNode::RationalQuadratic {
                sigma,
                alpha,
                length,
            } => rational_quadratic_r2(g.r2, p[sigma], p[alpha], p[length]),
            KernelNode::WhiteNoise { sigma } => {
                if g.same_index {
                    p[sigma] * p[sigma]
                } else {
                    0.0
                }
            }
            KernelNode::Sum(ref c) => c.iter().map(|k| k.eval(g, p)).sum(),
            KernelNode::Product(ref c) => c.iter().map(|k| k.eval(g, p)).product(),
        }
    }

    /// Kernel value plus its gradient with respect to the log parameters.
    /// The gradient is written into `grad`, which is overwritten.
    pub fn eval_grad(&self, g: &PairGeometry, p: &[f64; N_PARAMS], grad: &mut Grad) -> f64 {
        *grad = [0.0; N_PARAMS];
        match *self {
            KernelNode::Matern52 { sigma, length } => {
                let u = 5f64.sqrt() * g.r / p[length];
                let e = (-u).exp();
                let s2 = p[sigma] * p[sigma];
                let k = s2 * (1.0 + u + u * u / 3.0) * e;
                grad[sigma] = 2.0 * k;
                grad[length] = s2 * u * u * (1.0 + u) / 3.0 * e;
                k
            }
            KernelNode::SquaredExp { sigma, length } => {
                let l2 = p[length] * p[length];
                let k = squared_exp_r2(g.r2, p[sigma], p[length]);
                grad[sigma] = 2.0 * k;
                grad[length] = k * g.r2 / l2;
                k
            }
            KernelNode::Periodic { period, length } => {
                let a = PI * g.dt / p[period];
                let s = a.sin();
                let lp2 = p[length] * p[length];
                let k = (-2.0 * s * s / lp2).exp();
                grad[length] = k * 4.0 * s * s / lp2;
                grad[period] = k * 2.0 * a * (2.0 * a).sin() / lp2;
                k
            }
            KernelNode::RationalQuadratic {
                sigma,
                alpha,
                length,
            } => {
                let al = p[alpha];
                let l = p[length];
                let z = g.r2 / (2.0 * al * l * l);
                let k = p[sigma] * (-al * z.ln_1p()).exp();
                grad[sigma] = k;
                grad[length] = k * (g.r2 / (l * l)) / (1.0 + z);
                grad[alpha] = k * al * (z / (1.0 + z) - z.ln_1p());
                k
            }
            KernelNode::WhiteNoise { sigma } => {
                if g.same_index {
                    let k = p[sigma] * p[sigma];
                    grad[sigma] = 2.0 * k;
                    k
                } else {
                    0.0
                }
            }
            KernelNode::Sum(ref children) => {
                let mut local = [0.0; N_PARAMS];
                let mut total = 0.0;
                for c in children {
                    total += c.eval_grad(g, p, &mut local);
                    for (acc, d) in grad.iter_mut().zip(&local) {
                        *acc += d;
                    }
                }
                total
            }
            KernelNode::Product(ref children) => {
                // Fold (v, G) ⊗ (vc, Gc) = (v·vc, G·vc + v·Gc).
                let mut local = [0.0; N_PARAMS];
                let mut total = 1.0;
                for c in children {
                    let vc = c.eval_grad(g, p, &mut local);
                    for (acc, d) in grad.iter_mut().zip(&local) {
                        *acc = *acc * vc + total * d;
                    }
                    total *= vc;
                }
                total
            }
        }
    }

    /// Gram matrix over `points`, with the delta term on the diagonal.
    pub fn gram(
        &self,
        points: &[InputPoint],
        theta: &HyperParams,
        want_grads: bool,
        exec: Execution,
    ) -> GramResult {
        let n = points.len();
        let p = theta.natural_values();
        // Rows are independent; each entry is computed once from its pair, so
        // any execution order yields the same bits.
        let rows: Vec<(Vec<f64>, Vec<Grad>)> = exec.map(n, |i| {
            let mut vals = Vec::with_capacity(i + 1);
            let mut grads = Vec::with_capacity(if want_grads { i + 1 } else { 0 });
            let mut g = [0.0; N_PARAMS];
            for j in 0..=i {
                let geom = PairGeometry::new(&points[i], &points[j], i == j);
                if want_grads {
                    vals.push(self.eval_grad(&geom, &p, &mut g));
                    grads.push(g);
                } else {
                    vals.push(self.eval(&geom, &p));
                }
            }
            (vals, grads)
        });

        let mut k = Matrix::zeros(n, n);
        let mut dk = if want_grads {
            vec![Matrix::zeros(n, n); N_PARAMS]
        } else {
            Vec::new()
        };
        for (i, (vals, grads)) in rows.iter().enumerate() {
            for j in 0..=i {
                k[(i, j)] = vals[j];
                k[(j, i)] = vals[j];
                for (m, d) in dk.iter_mut().enumerate() {
                    d[(i, j)] = grads[j][m];
                    d[(j, i)] = grads[j][m];
                }
            }
        }
        GramResult {
            matrix: SymmetricMatrix::new(k).expect("kernel values are finite for valid hyperparameters"),
            grads: dk
                .into_iter()
                .map(|m| SymmetricMatrix::new(m).expect("kernel gradients are finite"))
                .collect(),
        }
    }

    /// Cross-covariance `K(rows, cols)`; the delta never fires here.
    pub fn cross_gram(
        &self,
        rows: &[InputPoint],
        cols: &[InputPoint],
        theta: &HyperParams,
        exec: Execution,
    ) -> Matrix {
        let p = theta.natural_values();
        let data: Vec<Vec<f64>> = exec.map(rows.len(), |i| {
            cols.iter()
                .map(|c| self.eval(&PairGeometry::new(&rows[i], c, false), &p))
                .collect()
        });
        Matrix::from_row_major(rows.len(), cols.len(), data.concat())
            .expect("row lengths are uniform")
    }
}

/// The shared incidence kernel instance.
pub fn incidence_kernel() -> &'static KernelNode {
    static KERNEL: OnceLock<KernelNode> = OnceLock::new();
    KERNEL.get_or_init(KernelNode::incidence)
}

/// Gram matrix and, optionally, one derivative matrix per log-parameter.
#[derive(Debug, Clone)]
pub struct GramResult {
    pub matrix: SymmetricMatrix,
    pub grads: Vec<SymmetricMatrix>,
}

pub fn gram(points: &[InputPoint], theta: &HyperParams, want_grads: bool) -> GramResult {
    incidence_kernel().gram(points, theta, want_grads, Execution::default())
}

pub fn cross_gram(rows: &[InputPoint], cols: &[InputPoint], theta: &HyperParams) -> Matrix {
    incidence_kernel().cross_gram(rows, cols, theta, Execution::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_theta() -> HyperParams {
        HyperParams::from_natural(&NaturalParams {
            sigma1: 1.0,
            l1: 1.0,
            sigma2: 1.0,
            l2: 1.0,
            p: 12.0,
            lper: 1.0,
            sigma3: 1.0,
            alpha: 1.0,
            l3: 1.0,
            sigmaf: 1.0,
            l4: 1.0,
            sigman: 1.0,
        })
    }

    fn pt(t: f64) -> InputPoint {
        InputPoint::at_time(t)
    }

    #[test]
    fn matern_values() {
        assert_eq!(matern52(&pt(1.0), &pt(1.0), 2.0, 0.7), 4.0);
        let want = (1.0 + 5f64.sqrt() + 5.0 / 3.0) * (-(5f64.sqrt())).exp();
        let got = matern52(&pt(0.0), &pt(1.0), 1.0, 1.0);
        assert!((got - want).abs() < 1e-14);
        assert!((got - 0.52400).abs() < 1e-4);
        assert!(matern52(&pt(0.0), &pt(1000.0), 1.0, 1.0) < 1e-12);
    }

    #[test]
    fn squared_exp_values() {
        assert_eq!(squared_exp(&pt(3.0), &pt(3.0), 3.0, 2.0), 9.0);
        assert!((squared_exp(&pt(0.0), &pt(1.0), 1.0, 1.0) - 0.60653).abs() < 1e-5);
        assert!((squared_exp(&pt(0.0), &pt(1.0), 2.0, 1e8) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_values() {
        assert!((periodic(&pt(0.0), &pt(12.0), 12.0, 0.5) - 1.0).abs() < 1e-14);
        assert!((periodic(&pt(0.0), &pt(6.0), 12.0, 1.0) - (-2f64).exp()).abs() < 1e-14);
        assert_eq!(periodic(&pt(4.0), &pt(4.0), 12.0, 1.0), 1.0);
    }

    #[test]
    fn seasonal_values() {
        assert_eq!(seasonal(&pt(2.0), &pt(2.0), 2.0, 1.0, 12.0, 1.0), 4.0);
        let a = InputPoint::new(0.0, 0.0, 0.0, 0.0);
        let b = InputPoint::new(0.0, 1.0, 0.0, 0.0);
        // Δt = 0 with Δx = 1: periodic is 1 so only the SE factor remains
        assert!((seasonal(&a, &b, 1.0, 1.0, 12.0, 1.0) - (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn rq_values() {
        assert_eq!(rational_quadratic(&pt(0.0), &pt(0.0), 0.3, 2.0, 1.0), 0.3);
        assert!((rational_quadratic(&pt(0.0), &pt(1.0), 1.0, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn noise_values() {
        assert_eq!(noise_kernel(&pt(0.0), &pt(0.0), true, 1.0, 1.0, 1.0), 2.0);
        assert_eq!(noise_kernel(&pt(0.0), &pt(0.0), false, 1.5, 1.0, 1.0), 2.25);
        let v = noise_kernel(&pt(0.0), &pt(1.0), false, 1.0, 2.0, 0.5);
        assert!((v - (-0.125f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn composite_diagonal() {
        let th = unit_theta();
        assert!((composite(&pt(3.0), &pt(3.0), true, &th) - 5.0).abs() < 1e-14);
        assert!((composite(&pt(3.0), &pt(3.0), false, &th) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn incidence_tree_is_valid() {
        KernelNode::incidence().validate().unwrap();
    }

    #[test]
    fn tree_validation_errors() {
        use KernelNode::*;
        let single = Sum(vec![WhiteNoise { sigma: 0 }]);
        assert_eq!(single.validate(), Err(KernelTreeError::TooFewChildren));
        let reuse = Sum(vec![WhiteNoise { sigma: 0 }, WhiteNoise { sigma: 0 }]);
        assert_eq!(reuse.validate(), Err(KernelTreeError::SlotReuse(0, 2)));
        let oob = WhiteNoise { sigma: 40 };
        assert_eq!(oob.validate(), Err(KernelTreeError::SlotOutOfRange(40)));
        let partial = Sum(vec![WhiteNoise { sigma: 0 }, WhiteNoise { sigma: 1 }]);
        assert_eq!(partial.validate(), Err(KernelTreeError::SlotUnused(2)));
    }

    #[test]
    fn single_point_gram() {
        let th = unit_theta();
        let g = gram(&[pt(1.0)], &th, true);
        assert_eq!(g.matrix.order(), 1);
        assert!((g.matrix.get(0, 0) - 5.0).abs() < 1e-14);
        assert_eq!(g.grads.len(), N_PARAMS);
        assert!(gram(&[pt(1.0)], &th, false).grads.is_empty());
    }

    #[test]
    fn cross_gram_excludes_delta() {
        let th = unit_theta();
        let m = cross_gram(&[pt(2.0)], &[pt(2.0)], &th);
        assert!((m[(0, 0)] - 4.0).abs() < 1e-14);
        let m = cross_gram(&[pt(1.0), pt(2.0)], &[pt(1.0), pt(5.0), pt(9.0)], &th);
        assert_eq!((m.rows(), m.cols()), (2, 3));
    }

    #[test]
    fn params_roundtrip_through_json() {
        let th = unit_theta().with_log(Param::Alpha, 0.25);
        let s = serde_json::to_string(&th).unwrap();
        assert!(s.contains("\"log_alpha\":0.25"));
        let back: HyperParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, th);
    }

    #[test]
    fn non_finite_params_rejected() {
        let mut log = [0.0; N_PARAMS];
        log[3] = f64::NAN;
        assert!(matches!(
            HyperParams::from_log(log),
            Err(ParamError::NonFinite { name: "l2", .. })
        ));
        assert_eq!(
            HyperParams::from_log_slice(&[0.0; 3]),
            Err(ParamError::WrongLength(3))
        );
    }
}
