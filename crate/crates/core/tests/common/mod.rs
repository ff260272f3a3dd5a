//! Independent oracles for the integration and acceptance suites.
//!
//! Nothing here calls into the crate's linalg or kernel code: matrices are
//! plain `Vec<Vec<f64>>`, inverses come from Gauss-Jordan elimination, and
//! the kernel is re-derived term by term from its closed form.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use std::f64::consts::PI;

use gpforecast::kernels::N_PARAMS;
use gpforecast::{HyperParams, InputPoint, NaturalParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(a: &Dense, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Dense = a.iter().zip(b).map(|(r, &v)| {
        let mut row = r.clone();
        row.push(v);
        row
    }).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    x
}

/// Explicit inverse by Gauss-Jordan with partial pivoting.
pub fn gauss_jordan_inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for c in 0..2 * n {
            m[col][c] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                for c in 0..2 * n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Laplace expansion along the first row.
pub fn cofactor_det(a: &Dense) -> f64 {
    let n = a.len();
    if n == 1 {
        return a[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Dense = a[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * a[0][j] * cofactor_det(&minor)
        })
        .sum()
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let m = b[0].len();
    a.iter()
        .map(|r| (0..m).map(|j| r.iter().enumerate().map(|(k, v)| v * b[k][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> Dense {
    let b: Dense = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut a = matmul(&b, &transpose(&b));
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += n as f64 * 0.5;
    }
    a
}

// ---------------------------------------------------------------------------
// Kernel oracle: each term written out directly from its closed form.

fn euclid2(a: &InputPoint, b: &InputPoint) -> f64 {
    (a.t - b.t).powi(2)
        + (a.rainfall - b.rainfall).powi(2)
        + (a.humidity - b.humidity).powi(2)
        + (a.temperature - b.temperature).powi(2)
}

pub fn oracle_kernel(a: &InputPoint, b: &InputPoint, same_index: bool, th: &NaturalParams) -> f64 {
    let r2 = euclid2(a, b);
    let r = r2.sqrt();
    let dt = (a.t - b.t).abs();
    let k1 = th.sigma1.powi(2)
        * (1.0 + 5f64.sqrt() * r / th.l1 + 5.0 * r2 / (3.0 * th.l1.powi(2)))
        * (-(5f64.sqrt()) * r / th.l1).exp();
    let k21 = th.sigma2.powi(2) * (-r2 / (2.0 * th.l2.powi(2))).exp();
    let k22 = (-2.0 * (PI * dt / th.p).sin().powi(2) / th.lper.powi(2)).exp();
    let k3 = th.sigma3 * (1.0 + r2 / (2.0 * th.alpha * th.l3.powi(2))).powf(-th.alpha);
    let k4 = th.sigmaf.powi(2) * (-r2 / (2.0 * th.l4.powi(2))).exp()
        + if same_index { th.sigman.powi(2) } else { 0.0 };
    k1 + k21 * k22 + k3 + k4
}

pub fn oracle_gram(points: &[InputPoint], th: &NaturalParams) -> Dense {
    points
        .iter()
        .enumerate()
        .map(|(i, a)| points.iter().enumerate().map(|(j, b)| oracle_kernel(a, b, i == j, th)).collect())
        .collect()
}

pub fn oracle_cross(rows: &[InputPoint], cols: &[InputPoint], th: &NaturalParams) -> Dense {
    rows.iter()
        .map(|a| cols.iter().map(|b| oracle_kernel(a, b, false, th)).collect())
        .collect()
}

/// Posterior mean and variance by explicit inversion.
pub fn oracle_predict(
    train: &[InputPoint],
    y: &[f64],
    stars: &[InputPoint],
    th: &NaturalParams,
) -> (Vec<f64>, Vec<f64>) {
    let kinv = gauss_jordan_inverse(&oracle_gram(train, th));
    let ks = oracle_cross(stars, train, th);
    let w = matvec(&kinv, y);
    let mean = matvec(&ks, &w);
    let var = stars
        .iter()
        .zip(&ks)
        .map(|(s, row)| {
            let kinv_k = matvec(&kinv, row);
            oracle_kernel(s, s, false, th) - row.iter().zip(&kinv_k).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect();
    (mean, var)
}

/// Log marginal likelihood from an explicit inverse and cofactor-free
/// determinant (product of Gauss-Jordan pivots via LU would reuse
/// elimination, so the determinant here is a separate partial-pivot LU).
pub fn oracle_lml(train: &[InputPoint], y: &[f64], th: &NaturalParams) -> f64 {
    let k = oracle_gram(train, th);
    let kinv = gauss_jordan_inverse(&k);
    let fit: f64 = y.iter().zip(matvec(&kinv, y)).map(|(a, b)| a * b).sum();
    let n = y.len() as f64;
    -0.5 * fit - 0.5 * lu_log_abs_det(&k) - 0.5 * n * (2.0 * PI).ln()
}

pub fn lu_log_abs_det(a: &Dense) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        acc += m[col][col].abs().ln();
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    acc
}

// ---------------------------------------------------------------------------
// Random instances.

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, t_span: f64) -> Vec<InputPoint> {
    let mut ts: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..t_span)).collect();
    ts.sort_by(f64::total_cmp);
    ts.into_iter()
        .map(|t| {
            InputPoint::new(
                t,
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(-1.5..1.5),
            )
        })
        .collect()
}

/// Moderate hyperparameters: lengths comparable to the input spread.
pub fn random_theta(rng: &mut ChaCha8Rng) -> HyperParams {
    let n = NaturalParams {
        sigma1: rng.gen_range(0.3..1.5),
        l1: rng.gen_range(1.0..6.0),
        sigma2: rng.gen_range(0.3..1.5),
        l2: rng.gen_range(2.0..10.0),
        p: rng.gen_range(6.0..14.0),
        lper: rng.gen_range(0.5..2.0),
        sigma3: rng.gen_range(0.1..1.0),
        alpha: rng.gen_range(0.5..3.0),
        l3: rng.gen_range(1.0..6.0),
        sigmaf: rng.gen_range(0.1..0.8),
        l4: rng.gen_range(0.5..4.0),
        sigman: rng.gen_range(0.1..0.6),
    };
    HyperParams::from_natural(&n)
}

/// Log-parameters drawn uniformly from `[-5, 5]`.
pub fn wide_theta(rng: &mut ChaCha8Rng) -> HyperParams {
    let mut log = [0.0; N_PARAMS];
    for v in &mut log {
        *v = rng.gen_range(-5.0..5.0);
    }
    HyperParams::from_log(log).unwrap()
}

pub fn random_targets(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// `|a − b| ≤ rtol·max(|a|, |b|) + atol`.
pub fn close(a: f64, b: f64, rtol: f64, atol: f64) -> bool {
    (a - b).abs() <= rtol * a.abs().max(b.abs()) + atol
}
