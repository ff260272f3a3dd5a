mod common;

use common::*;
use gpforecast::optimizer::{
    self, fit_hyperparams, fit_hyperparams_with, minimize, negative_lml, BfgsOptions, FitConfig,
    NegLogLikelihood,
};
use gpforecast::{Execution, HyperParams, InputPoint, NaturalParams, Param};
use rand_distr::{Distribution, StandardNormal};

fn truth() -> HyperParams {
    HyperParams::from_natural(&NaturalParams {
        sigma1: 0.3,
        l1: 3.0,
        sigma2: 1.0,
        l2: 60.0,
        p: 12.0,
        lper: 1.0,
        sigma3: 0.05,
        alpha: 1.0,
        l3: 5.0,
        sigmaf: 0.1,
        l4: 2.0,
        sigman: 0.1,
    })
}

/// Draws targets from the GP prior at `theta` (nalgebra Cholesky).
fn sample_prior(points: &[InputPoint], theta: &HyperParams, seed: u64) -> Vec<f64> {
    let n = points.len();
    let k = oracle_gram(points, &theta.natural());
    let km = nalgebra::DMatrix::from_fn(n, n, |i, j| k[i][j]);
    let l = km.cholesky().expect("prior covariance is SPD").l();
    let mut r = rng(seed);
    let z = nalgebra::DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
    (l * z).iter().copied().collect()
}

fn seasonal_points(n: usize, seed: u64) -> Vec<InputPoint> {
    let mut r = rng(seed);
    (1..=n)
        .map(|t| {
            let mut c = || -> f64 { StandardNormal.sample(&mut r) };
            InputPoint::new(t as f64, 0.3 * c(), 0.3 * c(), 0.3 * c())
        })
        .collect()
}

#[test]
fn small_problem_converges_and_decreases() {
    let pts = seasonal_points(5, 1);
    let y = sample_prior(&pts, &truth(), 2);
    let res = fit_hyperparams(&pts, &y, 1, 0).unwrap();
    let x0 = optimizer::initial_theta(&pts, &y);
    assert!(res.final_nll <= negative_lml(&pts, &y, &x0).unwrap());
    assert!(res.trace.windows(2).all(|w| w[1] <= w[0]), "trace not monotone");
    assert!(res.grad_norm < 1e-5, "grad_norm {} ({:?})", res.grad_norm, res.termination);
}

#[test]
fn single_restart_is_plain_bfgs_from_canonical_start() {
    let pts = seasonal_points(20, 3);
    let y = sample_prior(&pts, &truth(), 4);
    let cfg = FitConfig {
        restarts: 1,
        exec: Execution::Sequential,
        ..FitConfig::default()
    };
    let res = fit_hyperparams_with(&pts, &y, &cfg).unwrap();

    let floor = optimizer::log_noise_floor(&y);
    let mut lower = vec![f64::NEG_INFINITY; 12];
    lower[Param::SigmaN.index()] = floor;
    let opts = BfgsOptions {
        tol: cfg.tol,
        max_iters: cfg.max_iters,
        lower_bounds: Some(lower),
        max_step: cfg.max_step,
    };
    let x0 = optimizer::initial_theta(&pts, &y);
    let mut obj = NegLogLikelihood::new(&pts, &y, Execution::Sequential);
    let direct = minimize(&mut obj, x0.log_values(), &opts).unwrap();
    assert_eq!(res.theta.log_values().as_slice(), direct.x.as_slice());
    assert_eq!(res.final_nll, direct.value);
    assert_eq!(res.iterations, direct.iterations);
    assert_eq!(res.restart_index, 0);
}

#[test]
fn seeded_runs_are_identical_across_modes() {
    let pts = seasonal_points(24, 5);
    let y = sample_prior(&pts, &truth(), 6);
    let run = |exec| {
        fit_hyperparams_with(
            &pts,
            &y,
            &FitConfig {
                restarts: 3,
                seed: 11,
                exec,
                ..FitConfig::default()
            },
        )
        .unwrap()
    };
    let a = run(Execution::Sequential);
    let b = run(Execution::Sequential);
    let c = run(Execution::Parallel);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn recovers_period_from_prior_sample() {
    let th = truth();
    let pts = seasonal_points(60, 7);
    let y = sample_prior(&pts, &th, 8);
    let res = fit_hyperparams(&pts, &y, 5, 0).unwrap();
    let p = res.theta.natural().p;
    assert!((p - 12.0).abs() <= 0.05 * 12.0, "p = {p}");
    let at_truth = negative_lml(&pts, &y, &th).unwrap();
    assert!(res.final_nll <= at_truth + 1e-3, "{} vs {at_truth}", res.final_nll);
}
