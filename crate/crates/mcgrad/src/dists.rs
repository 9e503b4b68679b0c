//! Samplers, densities, and measure-valued derivative decompositions for
//! the Gaussian family.
//!
//! The derivative of a Gaussian density with respect to a distributional
//! parameter is not itself a density, but it can be written as a scaled
//! difference of two proper distributions,
//! `∂ p(x;ω)/∂ω_k = c_k (p⁺_k(x) − p⁻_k(x))`.
//! For the Gaussian the decomposition used here is:
//!
//! | parameter | constant `c`  | positive part           | negative part    |
//! |-----------|---------------|-------------------------|------------------|
//! | mean      | `1/(σ√(2π))`  | `μ + W(√2·σ, 2)`        | `μ − W(√2·σ, 2)` |
//! | std dev   | `1/σ`         | double-sided Maxwell    | `N(μ, σ²)`       |
//!
//! where `W(λ, k)` is a Weibull distribution and the double-sided Maxwell
//! has density `(x−μ)² exp(−(x−μ)²/(2σ²)) / (√(2π)σ³)`.

use crate::error::{Error, Result};
use crate::rng::SeededRng;

const LN_2PI: f64 = 1.8378770664093453; // ln(2π)
pub(crate) const SQRT_2PI: f64 = 2.5066282746310002; // √(2π)

/// Univariate Gaussian `N(mu, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1 {
    pub mu: f64,
    pub sigma: f64,
}

impl Gaussian1 {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "Gaussian requires finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * SQRT_2PI)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - 0.5 * LN_2PI
    }
}

/// Weibull distribution with scale `lambda` and shape `k`, on x > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weibull1 {
    pub lambda: f64,
    pub k: f64,
}

impl Weibull1 {
    pub fn new(lambda: f64, k: f64) -> Result<Self> {
        if !(lambda > 0.0 && k > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Weibull requires lambda > 0 and k > 0, got lambda={lambda}, k={k}"
            )));
        }
        Ok(Self { lambda, k })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let r = x / self.lambda;
        (self.k / self.lambda) * r.powf(self.k - 1.0) * (-r.powf(self.k)).exp()
    }

    /// Inverse CDF at `u ∈ (0,1)`: `x = λ(−ln u)^{1/k}`.
    ///
    /// Note this is the survival-function parameterization: `u` close to 1
    /// maps to x close to 0.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        self.lambda * (-u.ln()).powf(1.0 / self.k)
    }
}

/// Double-sided Maxwell distribution with density
/// `(x−μ)² exp(−(x−μ)²/(2σ²)) / (√(2π)σ³)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsMaxwell1 {
    pub mu: f64,
    pub sigma: f64,
}

impl DsMaxwell1 {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "double-sided Maxwell requires sigma > 0, got sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let d = x - self.mu;
        let z = d / self.sigma;
        d * d * (-0.5 * z * z).exp() / (SQRT_2PI * self.sigma.powi(3))
    }
}

pub fn sample_gaussian(d: &Gaussian1, rng: &mut SeededRng) -> f64 {
    d.mu + d.sigma * rng.normal()
}

/// Inverse-CDF Weibull draw; always strictly positive.
pub fn sample_weibull(d: &Weibull1, rng: &mut SeededRng) -> f64 {
    d.inverse_cdf(rng.uniform_open())
}

/// Double-sided Maxwell draw: `μ + s·σ·m` with `m` the Euclidean norm of
/// three independent standard normals and `s` a fair random sign.
///
/// Exact and rejection-free: `m` is Maxwell-distributed, and the random
/// sign mirrors the density onto both sides of `μ`.
pub fn sample_dsmaxwell(d: &DsMaxwell1, rng: &mut SeededRng) -> f64 {
    let (a, b, c) = (rng.normal(), rng.normal(), rng.normal());
    let m = (a * a + b * b + c * c).sqrt();
    d.mu + rng.sign() * d.sigma * m
}

/// One component distribution of an MVD triplet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentDist {
    Gaussian(Gaussian1),
    /// `x = mu + sign·w` with `w ~ Weibull(lambda, k)`.
    ShiftedWeibull {
        mu: f64,
        weibull: Weibull1,
        sign: f64,
    },
    DsMaxwell(DsMaxwell1),
}

impl ComponentDist {
    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        match self {
            ComponentDist::Gaussian(g) => sample_gaussian(g, rng),
            ComponentDist::ShiftedWeibull { mu, weibull, sign } => {
                mu + sign * sample_weibull(weibull, rng)
            }
            ComponentDist::DsMaxwell(m) => sample_dsmaxwell(m, rng),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            ComponentDist::Gaussian(g) => g.pdf(x),
            ComponentDist::ShiftedWeibull { mu, weibull, sign } => {
                weibull.pdf(sign * (x - mu))
            }
            ComponentDist::DsMaxwell(m) => m.pdf(x),
        }
    }
}

/// The `(c, p⁺, p⁻)` decomposition of a distribution's derivative with
/// respect to one scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvdTriplet {
    pub constant: f64,
    pub positive: ComponentDist,
    pub negative: ComponentDist,
}

/// Decomposition of `∂N(μ,σ)/∂μ`: constant `1/(σ√(2π))`, positive part
/// `μ + W(√2σ, 2)`, negative part `μ − W(√2σ, 2)`.
pub fn mvd_triplet_mean(d: &Gaussian1) -> MvdTriplet {
    let weibull = Weibull1 {
        lambda: std::f64::consts::SQRT_2 * d.sigma,
        k: 2.0,
    };
    MvdTriplet {
        constant: 1.0 / (d.sigma * SQRT_2PI),
        positive: ComponentDist::ShiftedWeibull {
            mu: d.mu,
            weibull,
            sign: 1.0,
        },
        negative: ComponentDist::ShiftedWeibull {
            mu: d.mu,
            weibull,
            sign: -1.0,
        },
    }
}

/// Decomposition of `∂N(μ,σ)/∂σ`: constant `1/σ`, positive part a
/// double-sided Maxwell, negative part the Gaussian itself.
pub fn mvd_triplet_std(d: &Gaussian1) -> MvdTriplet {
    MvdTriplet {
        constant: 1.0 / d.sigma,
        positive: ComponentDist::DsMaxwell(DsMaxwell1 {
            mu: d.mu,
            sigma: d.sigma,
        }),
        negative: ComponentDist::Gaussian(*d),
    }
}

/// Multivariate Gaussian with independent dimensions.
///
/// The distributional parameter vector is `ω = (mu ‖ sigma)`, length `2n`;
/// index `k < n` addresses `mu[k]` and `k >= n` addresses `sigma[k−n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

/// Which component of an MVD triplet to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl DiagGaussian {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::DimMismatch {
                expected: mu.len(),
                got: sigma.len(),
            });
        }
        if mu.is_empty() {
            return Err(Error::EmptyInput("DiagGaussian dimensions"));
        }
        for (i, &s) in sigma.iter().enumerate() {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "sigma[{i}] must be positive and finite, got {s}"
                )));
            }
        }
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Number of distributional parameters, `2n`.
    pub fn param_count(&self) -> usize {
        2 * self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Marginal of dimension `i`.
    pub fn marginal(&self, i: usize) -> Gaussian1 {
        Gaussian1 {
            mu: self.mu[i],
            sigma: self.sigma[i],
        }
    }

    /// The triplet for parameter index `k` (mean block then sigma block).
    pub fn triplet(&self, k: usize) -> Result<MvdTriplet> {
        let n = self.dim();
        if k >= 2 * n {
            return Err(Error::IndexOutOfRange { index: k, len: 2 * n });
        }
        Ok(if k < n {
            mvd_triplet_mean(&self.marginal(k))
        } else {
            mvd_triplet_std(&self.marginal(k - n))
        })
    }

    pub fn sample(&self, rng: &mut SeededRng) -> Vec<f64> {
        self.mu
            .iter()
            .zip(&self.sigma)
            .map(|(&m, &s)| m + s * rng.normal())
            .collect()
    }

    /// Joint log density `Σᵢ log N(xᵢ; μᵢ, σᵢ²)`.
    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut lp = 0.0;
        for i in 0..self.dim() {
            lp += self.marginal(i).log_pdf(x[i]);
        }
        Ok(lp)
    }

    /// Analytic gradient of [`Self::log_prob`] with respect to
    /// `ω = (mu ‖ sigma)`:
    /// `∂/∂μᵢ = (xᵢ−μᵢ)/σᵢ²`, `∂/∂σᵢ = ((xᵢ−μᵢ)² − σᵢ²)/σᵢ³`.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut g = vec![0.0; 2 * n];
        for i in 0..n {
            let d = x[i] - self.mu[i];
            let s = self.sigma[i];
            g[i] = d / (s * s);
            g[n + i] = (d * d - s * s) / (s * s * s);
        }
        Ok(g)
    }
}

/// One draw from the positive or negative component of the multivariate
/// decomposition for parameter `k`: a full draw from `p` with the
/// coordinate owned by `k` replaced by a draw from the corresponding
/// univariate component.
pub fn mvd_component_sample(
    p: &DiagGaussian,
    k: usize,
    sign: Sign,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    let n = p.dim();
    let triplet = p.triplet(k)?;
    let owner = if k < n { k } else { k - n };
    let mut x = p.sample(rng);
    let comp = match sign {
        Sign::Plus => triplet.positive,
        Sign::Minus => triplet.negative,
    };
    x[owner] = comp.sample(rng);
    Ok(x)
}

/// A coupled or independent `(x⁺, x⁻)` pair for parameter `k`, plus the
/// triplet constant.
///
/// With `coupled = true` the non-owner coordinates share one underlying
/// Gaussian draw, a mean-parameter pair reuses the same Weibull variate on
/// both sides (`x⁺ = μ+w`, `x⁻ = μ−w`), and a sigma-parameter pair reuses
/// the first of the three base normals of the Maxwell draw for the
/// Gaussian negative side. With `coupled = false` the two sides are
/// sampled independently.
pub fn mvd_component_pair(
    p: &DiagGaussian,
    k: usize,
    coupled: bool,
    rng: &mut SeededRng,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = p.dim();
    if k >= 2 * n {
        return Err(Error::IndexOutOfRange { index: k, len: 2 * n });
    }
    let owner = if k < n { k } else { k - n };

    let mut x_plus = p.sample(rng);
    let mut x_minus = if coupled {
        x_plus.clone()
    } else {
        p.sample(rng)
    };

    let constant;
    if k < n {
        // Mean parameter: Weibull(√2σ, 2) perturbation on both sides.
        let g = p.marginal(owner);
        let weibull = Weibull1 {
            lambda: std::f64::consts::SQRT_2 * g.sigma,
            k: 2.0,
        };
        constant = 1.0 / (g.sigma * SQRT_2PI);
        let w_plus = sample_weibull(&weibull, rng);
        let w_minus = if coupled {
            w_plus
        } else {
            sample_weibull(&weibull, rng)
        };
        x_plus[owner] = g.mu + w_plus;
        x_minus[owner] = g.mu - w_minus;
    } else {
        // Sigma parameter: double-sided Maxwell (+) vs Gaussian (−).
        let g = p.marginal(owner);
        constant = 1.0 / g.sigma;
        let (n1, n2, n3) = (rng.normal(), rng.normal(), rng.normal());
        let m = (n1 * n1 + n2 * n2 + n3 * n3).sqrt();
        x_plus[owner] = g.mu + rng.sign() * g.sigma * m;
        x_minus[owner] = if coupled {
            g.mu + g.sigma * n1
        } else {
            g.mu + g.sigma * rng.normal()
        };
    }
    Ok((x_plus, x_minus, constant))
}
