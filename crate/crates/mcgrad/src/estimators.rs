//! Monte Carlo estimators of `∇_ω E_{p(x;ω)}[f(x)]` for a diagonal
//! Gaussian `p`, over the stacked parameter vector `ω = (mu ‖ sigma)`.
//!
//! Three unbiased routes and one biased reference:
//!
//! - **Score function (SF)**: `∇ log p(x;ω)·(f(x) − b)`, needs only f
//!   queries; a baseline `b` reduces variance without changing the mean.
//! - **Reparametrization (Rep)**: pathwise through `x = μ + σ⊙ε`;
//!   needs `∇_x f`.
//! - **Measure-valued derivative (MVD)**: per parameter,
//!   `c_k (f(x⁺) − f(x⁻))` with the component pairs from
//!   [`crate::dists::mvd_component_pair`]; needs `2·|ω|` queries per
//!   estimate but no baseline and no derivative of f.
//! - **Finite differences (FD)**: perturbs the distributional parameters
//!   by `±Δ` and samples from the shifted distributions; biased for
//!   finite `Δ`, with variance growing as `Δ⁻²`.

use crate::dists::{mvd_component_pair, DiagGaussian};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// A scalar objective over `R^n`; the input gradient is optional and only
/// required by the reparametrization estimator.
pub trait BlackBoxFn {
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl<F: Fn(&[f64]) -> f64> BlackBoxFn for F {
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// An objective bundled with its input gradient.
pub struct WithGrad<F, G> {
    pub eval: F,
    pub grad: G,
}

impl<F, G> BlackBoxFn for WithGrad<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
    fn grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some((self.grad)(x))
    }
}

/// One Monte Carlo gradient estimate with its query accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    /// Gradient over `ω = (mu ‖ sigma)`, length `2n`.
    pub grad: Vec<f64>,
    /// Number of queries to `f` (gradient queries count as one).
    pub n_evals: usize,
    /// Number of MC estimates averaged.
    pub n_mc: usize,
    /// True only for the finite-difference estimator.
    pub biased: bool,
}

/// Baseline choice for the score-function estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline {
    None,
    Scalar(f64),
    /// Per-parameter optimal baseline `b_k = Σᵢ s²ᵢₖ fᵢ / Σᵢ s²ᵢₖ`
    /// computed from the same batch.
    Pgpe,
}

/// Which estimator a harness cell runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Sf,
    Rep,
    Mvd,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Sf, EstimatorKind::Rep, EstimatorKind::Mvd];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Sf => "sf",
            EstimatorKind::Rep => "rep",
            EstimatorKind::Mvd => "mvd",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sf" => Ok(EstimatorKind::Sf),
            "rep" => Ok(EstimatorKind::Rep),
            "mvd" => Ok(EstimatorKind::Mvd),
            other => Err(Error::Config(format!(
                "unknown estimator '{other}' (expected sf, rep or mvd)"
            ))),
        }
    }
}

/// Per-parameter PGPE baseline `b_k = Σᵢ s²ᵢₖ fᵢ / Σᵢ s²ᵢₖ`; parameters
/// whose score mass is zero fall back to the payoff mean.
pub fn pgpe_baseline(scores: &[Vec<f64>], payoffs: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("pgpe_baseline scores"));
    }
    if scores.len() != payoffs.len() {
        return Err(Error::DimMismatch {
            expected: scores.len(),
            got: payoffs.len(),
        });
    }
    let dim = scores[0].len();
    let payoff_mean = payoffs.iter().sum::<f64>() / payoffs.len() as f64;
    let mut baselines = vec![0.0; dim];
    for k in 0..dim {
        let mut num = 0.0;
        let mut den = 0.0;
        for (s, &f) in scores.iter().zip(payoffs) {
            let s2 = s[k] * s[k];
            num += s2 * f;
            den += s2;
        }
        baselines[k] = if den > 0.0 { num / den } else { payoff_mean };
    }
    Ok(baselines)
}

/// Score-function estimate `(1/m) Σᵢ ∇log p(xᵢ)·(f(xᵢ) − b)`.
pub fn sf_estimate(
    f: &dyn BlackBoxFn,
    p: &DiagGaussian,
    m: usize,
    baseline: Baseline,
    rng: &mut SeededRng,
) -> Result<GradEstimate> {
    let min_m = if baseline == Baseline::Pgpe { 2 } else { 1 };
    if m < min_m {
        return Err(Error::InvalidParameter(format!(
            "sf_estimate needs m >= {min_m}, got {m}"
        )));
    }
    let dim = p.param_count();
    let mut scores = Vec::with_capacity(m);
    let mut payoffs = Vec::with_capacity(m);
    for _ in 0..m {
        let x = p.sample(rng);
        scores.push(p.score(&x)?);
        payoffs.push(f.eval(&x));
    }
    let baselines: Vec<f64> = match baseline {
        Baseline::None => vec![0.0; dim],
        Baseline::Scalar(b) => vec![b; dim],
        Baseline::Pgpe => pgpe_baseline(&scores, &payoffs)?,
    };
    let mut grad = vec![0.0; dim];
    for (s, &f_val) in scores.iter().zip(&payoffs) {
        for k in 0..dim {
            grad[k] += s[k] * (f_val - baselines[k]);
        }
    }
    for g in &mut grad {
        *g /= m as f64;
    }
    Ok(GradEstimate {
        grad,
        n_evals: m,
        n_mc: m,
        biased: false,
    })
}

/// Reparametrization estimate through `x = μ + σ⊙ε`:
/// `d/dμᵢ` averages `∂f/∂xᵢ` and `d/dσᵢ` averages `∂f/∂xᵢ · εᵢ`.
pub fn rep_estimate(
    f: &dyn BlackBoxFn,
    p: &DiagGaussian,
    m: usize,
    rng: &mut SeededRng,
) -> Result<GradEstimate> {
    if m < 1 {
        return Err(Error::InvalidParameter("rep_estimate needs m >= 1".into()));
    }
    let n = p.dim();
    let mut grad = vec![0.0; 2 * n];
    let mut eps = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..m {
        for i in 0..n {
            eps[i] = rng.normal();
            x[i] = p.mu()[i] + p.sigma()[i] * eps[i];
        }
        let gx = f.grad(&x).ok_or(Error::MissingGradient)?;
        if gx.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                got: gx.len(),
            });
        }
        for i in 0..n {
            grad[i] += gx[i];
            grad[n + i] += gx[i] * eps[i];
        }
    }
    for g in &mut grad {
        *g /= m as f64;
    }
    Ok(GradEstimate {
        grad,
        n_evals: m,
        n_mc: m,
        biased: false,
    })
}

/// Measure-valued derivative estimate: for each of the `2n` parameters,
/// averages `c_k (f(x⁺) − f(x⁻))` over `m` component pairs.
pub fn mvd_estimate(
    f: &dyn BlackBoxFn,
    p: &DiagGaussian,
    m: usize,
    coupled: bool,
    rng: &mut SeededRng,
) -> Result<GradEstimate> {
    if m < 1 {
        return Err(Error::InvalidParameter("mvd_estimate needs m >= 1".into()));
    }
    let dim = p.param_count();
    let mut grad = vec![0.0; dim];
    for k in 0..dim {
        let mut acc = 0.0;
        for _ in 0..m {
            let (x_plus, x_minus, c) = mvd_component_pair(p, k, coupled, rng)?;
            acc += c * (f.eval(&x_plus) - f.eval(&x_minus));
        }
        grad[k] = acc / m as f64;
    }
    Ok(GradEstimate {
        grad,
        n_evals: 2 * dim * m,
        n_mc: m,
        biased: false,
    })
}

/// Finite-difference estimate: perturbs each distributional parameter by
/// `±Δ`, draws `m` fresh samples from each shifted distribution, and
/// divides the payoff means by `2Δ`. Biased for finite `Δ`.
pub fn fd_estimate(
    f: &dyn BlackBoxFn,
    p: &DiagGaussian,
    delta: f64,
    m: usize,
    rng: &mut SeededRng,
) -> Result<GradEstimate> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fd_estimate needs delta > 0, got {delta}"
        )));
    }
    if m < 1 {
        return Err(Error::InvalidParameter("fd_estimate needs m >= 1".into()));
    }
    let n = p.dim();
    for i in 0..n {
        if p.sigma()[i] - delta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "fd_estimate: sigma[{i}] - delta = {} is not positive",
                p.sigma()[i] - delta
            )));
        }
    }
    let dim = 2 * n;
    let mut grad = vec![0.0; dim];
    for k in 0..dim {
        let mut means = [0.0f64; 2];
        for (side, shift) in [(0usize, delta), (1usize, -delta)] {
            let mut mu = p.mu().to_vec();
            let mut sigma = p.sigma().to_vec();
            if k < n {
                mu[k] += shift;
            } else {
                sigma[k - n] += shift;
            }
            let shifted = DiagGaussian::new(mu, sigma)?;
            let mut acc = 0.0;
            for _ in 0..m {
                acc += f.eval(&shifted.sample(rng));
            }
            means[side] = acc / m as f64;
        }
        grad[k] = (means[0] - means[1]) / (2.0 * delta);
    }
    Ok(GradEstimate {
        grad,
        n_evals: 2 * dim * m,
        n_mc: m,
        biased: true,
    })
}

/// Unbiased per-parameter sample variance across repeated estimates.
pub fn estimator_variance(estimates: &[GradEstimate]) -> Result<Vec<f64>> {
    if estimates.len() < 2 {
        return Err(Error::InvalidParameter(
            "estimator_variance needs at least 2 estimates".into(),
        ));
    }
    let dim = estimates[0].grad.len();
    for e in estimates {
        if e.grad.len() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: e.grad.len(),
            });
        }
    }
    let n = estimates.len() as f64;
    let mut mean = vec![0.0; dim];
    for e in estimates {
        for k in 0..dim {
            mean[k] += e.grad[k];
        }
    }
    for v in &mut mean {
        *v /= n;
    }
    let mut var = vec![0.0; dim];
    for e in estimates {
        for k in 0..dim {
            var[k] += (e.grad[k] - mean[k]).powi(2);
        }
    }
    for v in &mut var {
        *v /= n - 1.0;
    }
    Ok(var)
}
