//! Stochastic policies mapping states to diagonal-Gaussian action
//! distributions, with optional tanh squashing and the chain rule from
//! distributional-parameter gradients to network-parameter gradients.
//!
//! The distributional parameters at a state are `ω(s;θ) = (μ(s;θ) ‖ σ)`
//! where the mean comes from a linear gain or an MLP and the standard
//! deviation is a learnable state-independent parameter stored as
//! `log σ`. Gradients over `ω` chain onto θ as `(∂ω/∂θ)ᵀ g_ω`: the mean
//! block through the head's reverse mode, the sigma block scaled by σ for
//! the log parameterization.

use crate::dists::{mvd_component_pair, DiagGaussian};
use crate::error::{Error, Result};
use crate::nnet::Mlp;
use crate::rng::SeededRng;

/// The state-dependent mean of the action distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum MeanHead {
    /// `μ = W·s`, with `W` stored row-major (`n_actions × n_states`).
    Linear {
        w: Vec<f64>,
        n_in: usize,
        n_out: usize,
    },
    Mlp(Mlp),
}

impl MeanHead {
    pub fn linear(w: Vec<f64>, n_in: usize, n_out: usize) -> Self {
        assert_eq!(w.len(), n_in * n_out);
        MeanHead::Linear { w, n_in, n_out }
    }

    fn input_dim(&self) -> usize {
        match self {
            MeanHead::Linear { n_in, .. } => *n_in,
            MeanHead::Mlp(m) => m.input_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            MeanHead::Linear { n_out, .. } => *n_out,
            MeanHead::Mlp(m) => m.output_dim(),
        }
    }

    fn n_params(&self) -> usize {
        match self {
            MeanHead::Linear { w, .. } => w.len(),
            MeanHead::Mlp(m) => m.n_params(),
        }
    }

    fn forward(&self, s: &[f64]) -> Vec<f64> {
        match self {
            MeanHead::Linear { w, n_in, n_out } => {
                let mut out = vec![0.0; *n_out];
                for i in 0..*n_out {
                    let row = &w[i * n_in..(i + 1) * n_in];
                    out[i] = row.iter().zip(s).map(|(a, b)| a * b).sum();
                }
                out
            }
            MeanHead::Mlp(m) => m.forward(s).expect("dimension checked by caller"),
        }
    }

    /// Accumulate `∇_θ (upstreamᵀ·μ(s;θ))` into `grad`.
    fn backward(&self, s: &[f64], upstream: &[f64], grad: &mut [f64]) {
        match self {
            MeanHead::Linear { n_in, n_out, .. } => {
                for i in 0..*n_out {
                    for j in 0..*n_in {
                        grad[i * n_in + j] += upstream[i] * s[j];
                    }
                }
            }
            MeanHead::Mlp(m) => {
                let mut trace = m.alloc_trace();
                m.forward_trace(s, &mut trace);
                m.backward_trace(&mut trace, upstream, Some(grad), None);
            }
        }
    }

    fn params(&self) -> &[f64] {
        match self {
            MeanHead::Linear { w, .. } => w,
            MeanHead::Mlp(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> &mut [f64] {
        match self {
            MeanHead::Linear { w, .. } => w,
            MeanHead::Mlp(m) => m.params_mut(),
        }
    }
}

/// Diagonal-Gaussian policy with optional tanh squashing to
/// `(−bound, bound)^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub head: MeanHead,
    /// Learnable state-independent `log σ`, one entry per action dim.
    pub log_sigma: Vec<f64>,
    /// `Some(bound)` applies `a = bound·tanh(u)` to sampled actions.
    pub squash: Option<f64>,
}

/// The `(a⁺, a⁻)` actions for one distributional parameter, with the
/// pre-squash values and the triplet constant.
#[derive(Debug, Clone)]
pub struct ActionPair {
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
    pub constant: f64,
}

/// Numerically stable `log(1 − tanh(u)²) = 2(ln 2 − u − softplus(−2u))`.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

impl GaussianPolicy {
    pub fn new(head: MeanHead, initial_sigma: f64, squash: Option<f64>) -> Self {
        let m = head.output_dim();
        Self {
            head,
            log_sigma: vec![initial_sigma.ln(); m],
            squash,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.head.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.head.output_dim()
    }

    /// Total parameter count: head parameters plus the `log σ` vector.
    pub fn n_params(&self) -> usize {
        self.head.n_params() + self.log_sigma.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|l| l.exp()).collect()
    }

    /// Flat parameter snapshot: head parameters then `log σ`.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut p = self.head.params().to_vec();
        p.extend_from_slice(&self.log_sigma);
        p
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let nh = self.head.n_params();
        assert_eq!(flat.len(), nh + self.log_sigma.len());
        self.head.params_mut().copy_from_slice(&flat[..nh]);
        self.log_sigma.copy_from_slice(&flat[nh..]);
    }

    /// The action distribution at a state.
    pub fn dist_params(&self, s: &[f64]) -> Result<DiagGaussian> {
        if s.len() != self.state_dim() {
            return Err(Error::DimMismatch {
                expected: self.state_dim(),
                got: s.len(),
            });
        }
        DiagGaussian::new(self.head.forward(s), self.sigma())
    }

    /// Squash a pre-squash value into the action box.
    pub fn squash_action(&self, u: &[f64]) -> Vec<f64> {
        match self.squash {
            Some(b) => u.iter().map(|&v| b * v.tanh()).collect(),
            None => u.to_vec(),
        }
    }

    /// Sample an action; returns `(u, a)` with `u` the pre-squash draw.
    pub fn sample(&self, s: &[f64], rng: &mut SeededRng) -> Result<(Vec<f64>, Vec<f64>)> {
        let dist = self.dist_params(s)?;
        let u = dist.sample(rng);
        let a = self.squash_action(&u);
        Ok((u, a))
    }

    pub fn act(&self, s: &[f64], rng: &mut SeededRng) -> Result<Vec<f64>> {
        Ok(self.sample(s, rng)?.1)
    }

    /// Mean action with no noise (tanh of the mean when squashing).
    pub fn act_deterministic(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.state_dim() {
            return Err(Error::DimMismatch {
                expected: self.state_dim(),
                got: s.len(),
            });
        }
        Ok(self.squash_action(&self.head.forward(s)))
    }

    /// `(∂ω/∂θ)ᵀ·g_ω` over the flat parameters, for
    /// `g_ω = (g_μ ‖ g_σ)` of length `2m`. The sigma block is multiplied
    /// by σ for the `log σ` parameterization.
    pub fn chain_grad(&self, s: &[f64], g_omega: &[f64]) -> Result<Vec<f64>> {
        let m = self.action_dim();
        if g_omega.len() != 2 * m {
            return Err(Error::DimMismatch {
                expected: 2 * m,
                got: g_omega.len(),
            });
        }
        if s.len() != self.state_dim() {
            return Err(Error::DimMismatch {
                expected: self.state_dim(),
                got: s.len(),
            });
        }
        let mut grad = vec![0.0; self.n_params()];
        self.accumulate_chain_grad(s, g_omega, &mut grad);
        Ok(grad)
    }

    /// Accumulating variant of [`Self::chain_grad`] for batch averaging.
    pub fn accumulate_chain_grad(&self, s: &[f64], g_omega: &[f64], grad: &mut [f64]) {
        let m = self.action_dim();
        let nh = self.head.n_params();
        self.head.backward(s, &g_omega[..m], &mut grad[..nh]);
        for i in 0..m {
            grad[nh + i] += g_omega[m + i] * self.log_sigma[i].exp();
        }
    }

    /// Positive/negative action pair for distributional parameter `k`
    /// (mean block first, then sigma block), squashed if configured. The
    /// triplet acts on the pre-squash Gaussian.
    pub fn mvd_action_pair(
        &self,
        s: &[f64],
        k: usize,
        coupled: bool,
        rng: &mut SeededRng,
    ) -> Result<ActionPair> {
        let dist = self.dist_params(s)?;
        let (u_plus, u_minus, constant) = mvd_component_pair(&dist, k, coupled, rng)?;
        Ok(ActionPair {
            a_plus: self.squash_action(&u_plus),
            a_minus: self.squash_action(&u_minus),
            u_plus,
            u_minus,
            constant,
        })
    }

    /// Log density of a squashed action, via the change of variables
    /// `a = bound·tanh(u)`:
    /// `log π̃(a) = log N(u) − Σᵢ [log(1 − tanh(uᵢ)²) + log bound]`.
    ///
    /// Requires `a` strictly inside the bounds. Without squashing this is
    /// the plain Gaussian log density.
    pub fn squashed_log_prob(&self, s: &[f64], a: &[f64]) -> Result<f64> {
        match self.squash {
            None => self.dist_params(s)?.log_prob(a),
            Some(bound) => {
                if a.len() != self.action_dim() {
                    return Err(Error::DimMismatch {
                        expected: self.action_dim(),
                        got: a.len(),
                    });
                }
                let mut u = vec![0.0; a.len()];
                for i in 0..a.len() {
                    let t = a[i] / bound;
                    if t.abs() >= 1.0 {
                        return Err(Error::InvalidParameter(format!(
                            "action component {i} = {} is not strictly inside ±{bound}",
                            a[i]
                        )));
                    }
                    u[i] = t.atanh();
                }
                self.log_prob_presquash(s, &u)
            }
        }
    }

    /// Log density of the (possibly squashed) action expressed through
    /// its pre-squash value `u`; avoids the `atanh` round trip when the
    /// caller already has `u`.
    pub fn log_prob_presquash(&self, s: &[f64], u: &[f64]) -> Result<f64> {
        squashed_log_prob_from_dist(&self.dist_params(s)?, self.squash, u)
    }

    /// Score of the (squashed) density with respect to `ω` at a fixed
    /// action with pre-squash value `u`. Because the squashing correction
    /// does not depend on `ω`, this is the Gaussian score at `u`.
    pub fn score_presquash(&self, s: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.dist_params(s)?.score(u)
    }
}

/// Squashed log density from an already-computed action distribution:
/// `log N(u) − Σᵢ [log(1 − tanh(uᵢ)²) + log bound]`, or the plain
/// Gaussian log density when `bound` is `None`.
pub fn squashed_log_prob_from_dist(
    dist: &DiagGaussian,
    bound: Option<f64>,
    u: &[f64],
) -> Result<f64> {
    let base = dist.log_prob(u)?;
    match bound {
        None => Ok(base),
        Some(b) => {
            let correction: f64 = u
                .iter()
                .map(|&ui| log_one_minus_tanh_sq(ui) + b.ln())
                .sum();
            Ok(base - correction)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_and_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    #[test]
    fn dist_params_from_heads() {
        let mlp = Mlp::zeros(&[3, 4, 2]);
        let pol = GaussianPolicy::new(MeanHead::Mlp(mlp), 1.0, None);
        let d = pol.dist_params(&[0.5, -1.0, 2.0]).unwrap();
        assert_eq!(d.mu(), &[0.0, 0.0]);
        assert_eq!(d.sigma(), &[1.0, 1.0]); // log σ = 0 → σ = 1

        let pol = GaussianPolicy::new(MeanHead::linear(vec![1.0, 2.0], 2, 1), 0.5, None);
        let d = pol.dist_params(&[0.0, 0.0]).unwrap();
        assert_eq!(d.mu(), &[0.0]);
        assert_eq!(d.sigma(), &[0.5]);
        let d = pol.dist_params(&[1.0, 1.0]).unwrap();
        assert_eq!(d.mu(), &[3.0]);
    }

    #[test]
    fn act_deterministic_limit_and_bounds() {
        let head = MeanHead::linear(vec![2.0], 1, 1);
        let pol = GaussianPolicy::new(head, 1e-12, Some(2.0));
        let mut rng = SeededRng::new(1);
        let a = pol.act(&[1.0], &mut rng).unwrap();
        assert!((a[0] - 2.0 * 2.0f64.tanh()).abs() < 1e-9);
        // squashed draws stay strictly inside the box
        let pol = GaussianPolicy::new(MeanHead::linear(vec![2.0], 1, 1), 3.0, Some(2.0));
        for _ in 0..1000 {
            let a = pol.act(&[1.0], &mut rng).unwrap();
            assert!(a[0].abs() < 2.0);
        }
    }

    #[test]
    fn unsquashed_sample_mean_matches_mu() {
        let pol = GaussianPolicy::new(MeanHead::linear(vec![0.7], 1, 1), 1.0, None);
        let mut rng = SeededRng::new(2);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| pol.act(&[1.0], &mut rng).unwrap()[0])
            .collect();
        let (mean, se) = mean_and_se(&draws);
        assert!((mean - 0.7).abs() < 3.0 * se);
    }

    #[test]
    fn chain_grad_zero_upstream() {
        let pol = GaussianPolicy::new(
            MeanHead::Mlp(Mlp::new(&[2, 8, 2], &mut SeededRng::new(3))),
            1.0,
            None,
        );
        let g = pol.chain_grad(&[0.3, 0.4], &[0.0; 4]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chain_grad_linear_head_is_outer_product() {
        let pol = GaussianPolicy::new(MeanHead::linear(vec![0.0; 6], 3, 2), 1.0, None);
        let s = [1.0, -2.0, 0.5];
        let g_omega = [2.0, -1.0, 0.0, 0.0];
        let g = pol.chain_grad(&s, &g_omega).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!((g[i * 3 + j] - g_omega[i] * s[j]).abs() < 1e-15);
            }
        }
        // sigma block: g_logσ = g_σ·σ = 0 here
        assert_eq!(&g[6..], &[0.0, 0.0]);
    }

    #[test]
    fn chain_grad_matches_finite_differences_through_mlp_head() {
        let mut rng = SeededRng::new(4);
        let mut pol = GaussianPolicy::new(MeanHead::Mlp(Mlp::new(&[3, 6, 2], &mut rng)), 0.8, None);
        let s = [0.2, -0.7, 1.1];
        let g_omega: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let analytic = pol.chain_grad(&s, &g_omega).unwrap();
        // objective: Σ_k g_omega[k]·ω_k(θ)
        let objective = |pol: &GaussianPolicy| -> f64 {
            let d = pol.dist_params(&s).unwrap();
            let mut v = 0.0;
            for i in 0..2 {
                v += g_omega[i] * d.mu()[i] + g_omega[2 + i] * d.sigma()[i];
            }
            v
        };
        let h = 1e-6;
        let n = pol.n_params();
        let mut max_rel = 0.0f64;
        for i in 0..n {
            let mut flat = pol.params_flat();
            let orig = flat[i];
            flat[i] = orig + h;
            pol.set_params_flat(&flat);
            let fp = objective(&pol);
            flat[i] = orig - h;
            pol.set_params_flat(&flat);
            let fm = objective(&pol);
            flat[i] = orig;
            pol.set_params_flat(&flat);
            let fd = (fp - fm) / (2.0 * h);
            max_rel = max_rel.max((fd - analytic[i]).abs() / analytic[i].abs().max(1.0));
        }
        assert!(max_rel < 1e-5, "max rel err {max_rel}");
    }

    #[test]
    fn chain_grad_is_linear_in_upstream() {
        let mut rng = SeededRng::new(5);
        let pol = GaussianPolicy::new(MeanHead::Mlp(Mlp::new(&[2, 5, 2], &mut rng)), 1.3, None);
        let s = [0.4, -0.8];
        let g1: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let g2: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let alpha = 2.5;
        let combo: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| alpha * a + b).collect();
        let lhs = pol.chain_grad(&s, &combo).unwrap();
        let c1 = pol.chain_grad(&s, &g1).unwrap();
        let c2 = pol.chain_grad(&s, &g2).unwrap();
        for i in 0..lhs.len() {
            assert!((lhs[i] - (alpha * c1[i] + c2[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn mvd_pair_structure_and_bounds() {
        let pol = GaussianPolicy::new(MeanHead::linear(vec![1.0, 0.0, 0.0, 1.0], 2, 2), 1.0, None);
        let mut rng = SeededRng::new(6);
        // coupled mean pair: exactly one nonzero difference coordinate
        for k in 0..2 {
            let pair = pol.mvd_action_pair(&[0.5, -0.5], k, true, &mut rng).unwrap();
            for i in 0..2 {
                let diff = pair.a_plus[i] - pair.a_minus[i];
                if i == k {
                    assert!(diff > 0.0, "owner coordinate difference is 2w > 0");
                } else {
                    assert_eq!(diff, 0.0);
                }
            }
        }
        // squashed pairs stay inside the box
        let pol = GaussianPolicy::new(MeanHead::linear(vec![1.0, 0.0, 0.0, 1.0], 2, 2), 1.0, Some(1.0));
        for k in 0..4 {
            let pair = pol.mvd_action_pair(&[2.0, 2.0], k, true, &mut rng).unwrap();
            assert!(pair.a_plus.iter().all(|a| a.abs() < 1.0));
            assert!(pair.a_minus.iter().all(|a| a.abs() < 1.0));
        }
        assert!(pol.mvd_action_pair(&[0.0, 0.0], 4, true, &mut rng).is_err());
    }

    #[test]
    fn mvd_pair_quadratic_q_matches_analytic_mean_derivative() {
        // Q(a) = −‖a − t‖²: ∂/∂μ_k E[Q] = −2(μ_k − t_k).
        let pol = GaussianPolicy::new(MeanHead::linear(vec![1.0, 0.0, 0.0, 1.0], 2, 2), 0.7, None);
        let s = [0.9, -0.3];
        let t = [0.2, 0.4];
        let q = |a: &[f64]| -((a[0] - t[0]).powi(2) + (a[1] - t[1]).powi(2));
        let mut rng = SeededRng::new(7);
        let k = 0;
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let pair = pol.mvd_action_pair(&s, k, true, &mut rng).unwrap();
                pair.constant * (q(&pair.a_plus) - q(&pair.a_minus))
            })
            .collect();
        let (mean, se) = mean_and_se(&samples);
        let expect = -2.0 * (0.9 - t[0]);
        assert!((mean - expect).abs() < 3.0 * se, "{mean} vs {expect} (se {se})");
    }

    #[test]
    fn squashed_log_prob_reduces_and_corrects() {
        // squash off: equals the base Gaussian log density
        let pol = GaussianPolicy::new(MeanHead::linear(vec![1.0], 1, 1), 0.9, None);
        let d = pol.dist_params(&[0.5]).unwrap();
        let lp = pol.squashed_log_prob(&[0.5], &[0.3]).unwrap();
        assert!((lp - d.log_prob(&[0.3]).unwrap()).abs() < 1e-12);
        // u = 0 with unit bound: correction is exactly log(1) = 0
        let pol = GaussianPolicy::new(MeanHead::linear(vec![1.0], 1, 1), 0.9, Some(1.0));
        let lp = pol.log_prob_presquash(&[0.5], &[0.0]).unwrap();
        let base = pol.dist_params(&[0.5]).unwrap().log_prob(&[0.0]).unwrap();
        assert!((lp - base).abs() < 1e-12);
        // on/outside the bound is rejected
        assert!(pol.squashed_log_prob(&[0.5], &[1.0]).is_err());
        assert!(pol.squashed_log_prob(&[0.5], &[-1.2]).is_err());
    }

    #[test]
    fn squashed_density_integrates_to_one() {
        let pol = GaussianPolicy::new(MeanHead::linear(vec![0.6], 1, 1), 0.8, Some(2.0));
        let s = [1.0];
        let n = 400_000;
        let h = (4.0 - 2e-9) / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            let a = -2.0 + 1e-9 + h * (i as f64 + 0.5);
            integral += pol.squashed_log_prob(&s, &[a]).unwrap().exp() * h;
        }
        assert!((integral - 1.0).abs() < 1e-4, "integral {integral}");
    }

    #[test]
    fn log_one_minus_tanh_sq_is_stable_for_large_u() {
        // direct formula fails around |u| ≈ 20; the softplus form keeps
        // full relative accuracy
        for &u in &[0.0, 0.5, 5.0, 18.0, 40.0, -40.0] {
            let stable = log_one_minus_tanh_sq(u);
            if u.abs() < 15.0 {
                let direct = (1.0 - u.tanh() * u.tanh()).ln();
                assert!((stable - direct).abs() < 1e-9, "u={u}");
            } else {
                // asymptotically log(4) − 2|u|
                let asymptotic = 4.0f64.ln() - 2.0 * u.abs();
                assert!((stable - asymptotic).abs() < 1e-9, "u={u}");
            }
        }
    }

    #[test]
    fn mvd_policy_gradient_unbiased_end_to_end() {
        // Linear-Gaussian policy, quadratic Q(a) = −‖a − t‖².
        // E_a[Q] = −Σ((μ_i−t_i)² + σ_i²) with μ = W·s, so
        // ∇_W E[Q] = −2(μ−t)·sᵀ and ∇_logσ = −2σ².
        let w = vec![0.8, -0.2, 0.1, 0.5];
        let pol = GaussianPolicy::new(MeanHead::linear(w, 2, 2), 0.6, None);
        let s = [1.2, -0.4];
        let t = [0.3, -0.1];
        let q = |a: &[f64]| -((a[0] - t[0]).powi(2) + (a[1] - t[1]).powi(2));
        let d = pol.dist_params(&s).unwrap();
        let mu = d.mu().to_vec();
        let sigma = d.sigma().to_vec();

        let reps = 10_000;
        let mut rng = SeededRng::new(8);
        let n_params = pol.n_params();
        let mut estimates = vec![Vec::with_capacity(reps); n_params];
        for _ in 0..reps {
            let mut g_omega = vec![0.0; 4];
            for k in 0..4 {
                let pair = pol.mvd_action_pair(&s, k, true, &mut rng).unwrap();
                g_omega[k] = pair.constant * (q(&pair.a_plus) - q(&pair.a_minus));
            }
            let g = pol.chain_grad(&s, &g_omega).unwrap();
            for (store, val) in estimates.iter_mut().zip(&g) {
                store.push(*val);
            }
        }
        let mut expected = vec![0.0; n_params];
        for i in 0..2 {
            for j in 0..2 {
                expected[i * 2 + j] = -2.0 * (mu[i] - t[i]) * s[j];
            }
        }
        for i in 0..2 {
            expected[4 + i] = -2.0 * sigma[i] * sigma[i];
        }
        for p in 0..n_params {
            let (mean, se) = mean_and_se(&estimates[p]);
            assert!(
                (mean - expected[p]).abs() < 4.0 * se.max(1e-9),
                "param {p}: {mean} vs {} (se {se})",
                expected[p]
            );
        }
    }

    #[test]
    fn squashing_preserves_mvd_estimate_against_sf_reference() {
        // Same squashed objective estimated two independent unbiased
        // ways: MVD pairs vs a large-sample score-function reference.
        let pol = GaussianPolicy::new(MeanHead::linear(vec![0.5], 1, 1), 0.9, Some(1.5));
        let s = [1.0];
        let q = |a: &[f64]| (1.1 * a[0]).sin() + 0.5 * a[0];
        let k = 0; // mean parameter

        let mut rng = SeededRng::new(9);
        let n_mvd = 200_000;
        let mvd: Vec<f64> = (0..n_mvd)
            .map(|_| {
                let pair = pol.mvd_action_pair(&s, k, true, &mut rng).unwrap();
                pair.constant * (q(&pair.a_plus) - q(&pair.a_minus))
            })
            .collect();
        let (mvd_mean, mvd_se) = mean_and_se(&mvd);

        let n_sf = 1_000_000;
        let sf: Vec<f64> = (0..n_sf)
            .map(|_| {
                let (u, a) = pol.sample(&s, &mut rng).unwrap();
                let score = pol.score_presquash(&s, &u).unwrap();
                score[k] * q(&a)
            })
            .collect();
        let (sf_mean, sf_se) = mean_and_se(&sf);

        let tol = 4.0 * (mvd_se * mvd_se + sf_se * sf_se).sqrt();
        assert!(
            (mvd_mean - sf_mean).abs() < tol,
            "mvd {mvd_mean}±{mvd_se} vs sf {sf_mean}±{sf_se}"
        );
    }
}
