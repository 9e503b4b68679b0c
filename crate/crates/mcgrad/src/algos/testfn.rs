//! Stochastic optimization of 2-D test functions: gradient ascent on
//! `E_{N(μ,σ)}[f]` over `(μ, log σ)` with each of the three estimators.
//!
//! Per update the MVD uses a single estimate while SF (with the PGPE
//! baseline) and Rep average eight, matching the number of `f` queries
//! one MVD estimate costs for `|ω| = 4`.

use crate::dists::DiagGaussian;
use crate::error::{Error, Result};
use crate::estimators::{
    mvd_estimate, rep_estimate, sf_estimate, Baseline, BlackBoxFn, EstimatorKind,
};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFnName {
    Quadratic,
    Himmelblau,
    Styblinski,
}

impl TestFnName {
    pub const ALL: [TestFnName; 3] = [
        TestFnName::Quadratic,
        TestFnName::Himmelblau,
        TestFnName::Styblinski,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestFnName::Quadratic => "quadratic",
            TestFnName::Himmelblau => "himmelblau",
            TestFnName::Styblinski => "styblinski",
        }
    }
}

impl std::fmt::Display for TestFnName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TestFnName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(TestFnName::Quadratic),
            "himmelblau" => Ok(TestFnName::Himmelblau),
            "styblinski" => Ok(TestFnName::Styblinski),
            other => Err(Error::Config(format!("unknown test function '{other}'"))),
        }
    }
}

/// A 2-D objective with its analytic input gradient, starting
/// distribution, and the set of global maximizers.
pub struct TestFunction {
    pub name: TestFnName,
    eval: fn(&[f64]) -> f64,
    grad: fn(&[f64]) -> Vec<f64>,
    pub start_mu: [f64; 2],
    pub start_sigma: [f64; 2],
    pub maximizers: &'static [[f64; 2]],
}

impl BlackBoxFn for TestFunction {
    fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
    fn grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some((self.grad)(x))
    }
}

impl TestFunction {
    /// Distance from a point to the nearest global maximizer.
    pub fn distance_to_nearest_maximizer(&self, x: &[f64]) -> f64 {
        self.maximizers
            .iter()
            .map(|m| ((x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

fn quadratic(x: &[f64]) -> f64 {
    -(x[0] * x[0] + x[1] * x[1])
}

fn quadratic_grad(x: &[f64]) -> Vec<f64> {
    vec![-2.0 * x[0], -2.0 * x[1]]
}

fn himmelblau(x: &[f64]) -> f64 {
    let (a, b) = (x[0] * x[0] + x[1] - 11.0, x[0] + x[1] * x[1] - 7.0);
    -(a * a) - b * b
}

fn himmelblau_grad(x: &[f64]) -> Vec<f64> {
    let (a, b) = (x[0] * x[0] + x[1] - 11.0, x[0] + x[1] * x[1] - 7.0);
    vec![
        -4.0 * a * x[0] - 2.0 * b,
        -2.0 * a - 4.0 * b * x[1],
    ]
}

fn styblinski(x: &[f64]) -> f64 {
    -0.5 * x
        .iter()
        .map(|&v| v.powi(4) - 16.0 * v * v + 5.0 * v)
        .sum::<f64>()
}

fn styblinski_grad(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| -0.5 * (4.0 * v.powi(3) - 32.0 * v + 5.0))
        .collect()
}

const STYBLINSKI_ARGMAX: f64 = -2.9035340276423047;

pub fn test_function(name: TestFnName) -> TestFunction {
    match name {
        TestFnName::Quadratic => TestFunction {
            name,
            eval: quadratic,
            grad: quadratic_grad,
            start_mu: [-5.0, -5.0],
            start_sigma: [2.0, 2.0],
            maximizers: &[[0.0, 0.0]],
        },
        TestFnName::Himmelblau => TestFunction {
            name,
            eval: himmelblau,
            grad: himmelblau_grad,
            start_mu: [0.0, -6.0],
            start_sigma: [2.0, 2.0],
            maximizers: &[
                [3.0, 2.0],
                [-2.805118086952745, 3.1313125182505729],
                [-3.7793102533777469, -3.2831859912861694],
                [3.5844283403304917, -1.8481265269644254],
            ],
        },
        TestFnName::Styblinski => TestFunction {
            name,
            eval: styblinski,
            grad: styblinski_grad,
            start_mu: [0.0, 0.0],
            start_sigma: [2.0, 2.0],
            maximizers: &[[STYBLINSKI_ARGMAX, STYBLINSKI_ARGMAX]],
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TestFnOptions {
    pub iterations: usize,
    pub lr: f64,
    /// Trace cadence; the initial point and final point are always logged.
    pub log_every: usize,
}

impl Default for TestFnOptions {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            lr: 5e-4,
            log_every: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFnTracePoint {
    pub iteration: usize,
    pub mu: [f64; 2],
    pub sigma: [f64; 2],
    /// Small fresh MC estimate of `E[f]` at this point.
    pub f_mean: f64,
}

/// Plain gradient ascent on `(μ, log σ)` with a constant learning rate.
pub fn optimize_test_function(
    f: &TestFunction,
    estimator: EstimatorKind,
    opts: &TestFnOptions,
    rng: &mut SeededRng,
) -> Result<Vec<TestFnTracePoint>> {
    let mut mu = f.start_mu.to_vec();
    let mut log_sigma: Vec<f64> = f.start_sigma.iter().map(|s| s.ln()).collect();
    let mut trace = Vec::new();
    let log_every = opts.log_every.max(1);

    let mut record =
        |iter: usize, mu: &[f64], log_sigma: &[f64], rng: &mut SeededRng| -> Result<()> {
            let sigma: Vec<f64> = log_sigma.iter().map(|l| l.exp()).collect();
            let dist = DiagGaussian::new(mu.to_vec(), sigma.clone())?;
            let mut f_mean = 0.0;
            let probes = 64;
            for _ in 0..probes {
                f_mean += f.eval(&dist.sample(rng));
            }
            trace.push(TestFnTracePoint {
                iteration: iter,
                mu: [mu[0], mu[1]],
                sigma: [sigma[0], sigma[1]],
                f_mean: f_mean / probes as f64,
            });
            Ok(())
        };

    record(0, &mu, &log_sigma, rng)?;
    for iter in 1..=opts.iterations {
        let sigma: Vec<f64> = log_sigma.iter().map(|l| l.exp()).collect();
        let dist = DiagGaussian::new(mu.clone(), sigma.clone())?;
        let est = match estimator {
            EstimatorKind::Mvd => mvd_estimate(f, &dist, 1, true, rng)?,
            EstimatorKind::Sf => sf_estimate(f, &dist, 8, Baseline::Pgpe, rng)?,
            EstimatorKind::Rep => rep_estimate(f, &dist, 8, rng)?,
        };
        for i in 0..2 {
            mu[i] += opts.lr * est.grad[i];
            log_sigma[i] += opts.lr * est.grad[2 + i] * sigma[i];
        }
        if iter % log_every == 0 || iter == opts.iterations {
            record(iter, &mu, &log_sigma, rng)?;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-6;
        let mut rng = SeededRng::new(1);
        for name in TestFnName::ALL {
            let f = test_function(name);
            for _ in 0..50 {
                let x = [rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)];
                let g = f.grad(&x).unwrap();
                for i in 0..2 {
                    let mut xp = x;
                    xp[i] += h;
                    let mut xm = x;
                    xm[i] -= h;
                    let fd = (f.eval(&xp) - f.eval(&xm)) / (2.0 * h);
                    let rel = (fd - g[i]).abs() / g[i].abs().max(1.0);
                    assert!(rel < 1e-6, "{name}: dim {i} rel err {rel}");
                }
            }
        }
    }

    #[test]
    fn maximizers_are_stationary_and_maximal() {
        for name in TestFnName::ALL {
            let f = test_function(name);
            for m in f.maximizers {
                let g = f.grad(&m[..]).unwrap();
                assert!(
                    g[0].abs() < 1e-6 && g[1].abs() < 1e-6,
                    "{name}: gradient at maximizer {m:?} is {g:?}"
                );
            }
        }
    }

    #[test]
    fn zero_iterations_trace_is_initial_distribution_only() {
        let f = test_function(TestFnName::Quadratic);
        let opts = TestFnOptions {
            iterations: 0,
            ..Default::default()
        };
        let trace =
            optimize_test_function(&f, EstimatorKind::Mvd, &opts, &mut SeededRng::new(3)).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0].mu, f.start_mu);
        assert_eq!(trace[0].sigma, f.start_sigma);
    }

    #[test]
    fn quadratic_converges_toward_origin_for_all_estimators() {
        let f = test_function(TestFnName::Quadratic);
        let opts = TestFnOptions {
            iterations: 6000,
            lr: 5e-4,
            log_every: 6000,
        };
        for estimator in EstimatorKind::ALL {
            let trace =
                optimize_test_function(&f, estimator, &opts, &mut SeededRng::new(11)).unwrap();
            let last = trace.last().unwrap();
            let start_norm = (f.start_mu[0].powi(2) + f.start_mu[1].powi(2)).sqrt();
            let norm = (last.mu[0].powi(2) + last.mu[1].powi(2)).sqrt();
            assert!(
                norm < 0.5 * start_norm,
                "{estimator}: ‖μ‖ went {start_norm} → {norm}"
            );
        }
    }
}
