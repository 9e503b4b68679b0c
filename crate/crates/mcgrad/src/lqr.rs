//! Discounted infinite-horizon discrete-time LQR with analytic value
//! functions and a machine-precision policy-gradient oracle.
//!
//! Dynamics `s' = A·s + B·a`, stage reward `−(sᵀQ_c s + aᵀR_c a)`, and a
//! linear-Gaussian policy `a ~ N(−K·s, Σ)` with fixed diagonal `Σ`. For a
//! stabilizing gain the value function is the quadratic `V(s) = −sᵀPs − c`
//! with `P` the fixed point of
//!
//! ```text
//! P = Q_c + KᵀR_cK + γ(A−BK)ᵀP(A−BK)
//! c = (tr(R_cΣ) + γ·tr(BᵀPBΣ)) / (1−γ)
//! ```
//!
//! which makes the problem a gradient-estimation benchmark: the expected
//! return `J(K) = V(s₀)` and its gradient are available in closed form,
//! so estimator error can be measured exactly.

use crate::dists::{mvd_component_pair, DiagGaussian};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::harness::metrics::{cosine_distance, rel_abs_error};
use crate::rng::SeededRng;
use nalgebra::{DMatrix, DVector};

/// Fixed policy standard deviation used throughout the LQR experiments.
pub const LQR_POLICY_SIGMA: f64 = 0.1;

/// Norm guard: a rollout state beyond this aborts with an instability error.
pub const DIVERGENCE_GUARD: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct LqrSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub qc: DMatrix<f64>,
    pub rc: DMatrix<f64>,
    pub gamma: f64,
    pub s0: DVector<f64>,
    pub horizon: usize,
}

impl LqrSystem {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_actions(&self) -> usize {
        self.b.ncols()
    }
}

/// Linear-Gaussian policy `a ~ N(−K·s, diag(sigma²))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianPolicy {
    pub k: DMatrix<f64>,
    /// Per-dimension standard deviations (not variances).
    pub sigma: DVector<f64>,
}

impl LinearGaussianPolicy {
    pub fn new(k: DMatrix<f64>, sigma: f64) -> Self {
        let m = k.nrows();
        Self {
            k,
            sigma: DVector::from_element(m, sigma),
        }
    }

    pub fn mean(&self, s: &DVector<f64>) -> DVector<f64> {
        -(&self.k * s)
    }

    pub fn act(&self, s: &DVector<f64>, rng: &mut SeededRng) -> DVector<f64> {
        let mut a = self.mean(s);
        for i in 0..a.len() {
            a[i] += self.sigma[i] * rng.normal();
        }
        a
    }
}

/// Quadratic value function `V(s) = −sᵀPs − c`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticValue {
    pub p: DMatrix<f64>,
    pub c: f64,
}

impl QuadraticValue {
    pub fn v(&self, s: &DVector<f64>) -> f64 {
        -(s.dot(&(&self.p * s))) - self.c
    }
}

/// Largest eigenvalue magnitude.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}

/// Evaluate a linear-Gaussian policy: solves the quadratic fixed point to
/// machine precision (direct linear solve in Kronecker form, checked
/// against the recursion at max-norm residual `< 1e-10`).
pub fn policy_eval(sys: &LqrSystem, pol: &LinearGaussianPolicy) -> Result<QuadraticValue> {
    let n = sys.n_states();
    let m_cl = &sys.a - &sys.b * &pol.k;
    let rho = spectral_radius(&m_cl);
    if sys.gamma * rho * rho >= 1.0 - 1e-9 {
        return Err(Error::Unstable(format!(
            "closed loop not evaluable: gamma*rho^2 = {}",
            sys.gamma * rho * rho
        )));
    }
    let q_tilde = &sys.qc + pol.k.transpose() * &sys.rc * &pol.k;

    // vec(P) = (I − γ MᵀꚚMᵀ)⁻¹ vec(Q̃) solves P = Q̃ + γ MᵀPM.
    let mt = m_cl.transpose();
    let mut lhs = DMatrix::<f64>::identity(n * n, n * n);
    for bi in 0..n {
        for bj in 0..n {
            let coef = sys.gamma * mt[(bi, bj)];
            for i in 0..n {
                for j in 0..n {
                    lhs[(bi * n + i, bj * n + j)] -= coef * mt[(i, j)];
                }
            }
        }
    }
    let rhs = DVector::from_fn(n * n, |idx, _| q_tilde[(idx / n, idx % n)]);
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Unstable("singular policy-evaluation system".into()))?;
    let mut p = DMatrix::from_fn(n, n, |i, j| sol[i * n + j]);
    // Symmetrize and polish with a few fixed-point sweeps.
    p = (&p + p.transpose()) * 0.5;
    for _ in 0..3 {
        p = &q_tilde + sys.gamma * m_cl.transpose() * &p * &m_cl;
    }
    let residual = (&q_tilde + sys.gamma * m_cl.transpose() * &p * &m_cl - &p)
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if residual >= 1e-10 {
        return Err(Error::Unstable(format!(
            "policy evaluation residual {residual} above 1e-10"
        )));
    }

    // Noise offset from the fixed diagonal covariance.
    let sigma2 = DVector::from_fn(pol.sigma.len(), |i, _| pol.sigma[i] * pol.sigma[i]);
    let btpb = sys.b.transpose() * &p * &sys.b;
    let mut tr = 0.0;
    for i in 0..sigma2.len() {
        tr += (sys.rc[(i, i)] + sys.gamma * btpb[(i, i)]) * sigma2[i];
    }
    let c = tr / (1.0 - sys.gamma);
    Ok(QuadraticValue { p, c })
}

/// Expected discounted return of the policy from the fixed initial state.
pub fn j_value(sys: &LqrSystem, val: &QuadraticValue) -> f64 {
    val.v(&sys.s0)
}

/// `Q(s,a) = −(sᵀQ_c s + aᵀR_c a) + γ·V(As + Ba)`.
pub fn q_value(sys: &LqrSystem, val: &QuadraticValue, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
    let s_next = &sys.a * s + &sys.b * a;
    let stage = s.dot(&(&sys.qc * s)) + a.dot(&(&sys.rc * a));
    -stage + sys.gamma * val.v(&s_next)
}

/// Analytic action gradient of [`q_value`]:
/// `∇_a Q = −2R_c a − 2γBᵀP(As + Ba)`.
pub fn q_grad_action(
    sys: &LqrSystem,
    val: &QuadraticValue,
    s: &DVector<f64>,
    a: &DVector<f64>,
) -> DVector<f64> {
    let s_next = &sys.a * s + &sys.b * a;
    -(&sys.rc * a) * 2.0 - sys.gamma * 2.0 * (sys.b.transpose() * (&val.p * s_next))
}

/// Solve the discounted Riccati fixed point by value iteration and return
/// the optimal gain `K_opt = γ(R + γBᵀPB)⁻¹BᵀPA`.
pub fn optimal_gain(sys: &LqrSystem) -> Result<DMatrix<f64>> {
    let mut p = sys.qc.clone();
    for _ in 0..200_000 {
        let btpb = &sys.rc + sys.gamma * sys.b.transpose() * &p * &sys.b;
        let inv = btpb
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Unstable("singular Riccati inner matrix".into()))?;
        let btpa = sys.b.transpose() * &p * &sys.a;
        let p_next = &sys.qc + sys.gamma * sys.a.transpose() * &p * &sys.a
            - sys.gamma * sys.gamma * btpa.transpose() * &inv * &btpa;
        let diff = (&p_next - &p)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        p = p_next;
        if diff < 1e-12 {
            let btpb = &sys.rc + sys.gamma * sys.b.transpose() * &p * &sys.b;
            let inv = btpb
                .try_inverse()
                .ok_or_else(|| Error::Unstable("singular Riccati inner matrix".into()))?;
            let k = sys.gamma * &inv * sys.b.transpose() * &p * &sys.a;
            return Ok(k);
        }
    }
    Err(Error::Unstable("Riccati value iteration did not converge".into()))
}

/// Build a random LQR instance: unstable open loop, stabilizable, with a
/// suboptimal but stabilizing initial gain. Deterministic per seed.
///
/// Returns the system and `K_init`. The initial state is 9 in every
/// dimension, `γ = 0.99`, rollouts are 1000 steps.
pub fn make_lqr(n_states: usize, n_actions: usize, seed: u64) -> Result<(LqrSystem, DMatrix<f64>)> {
    if n_states == 0 || n_actions == 0 {
        return Err(Error::InvalidParameter("dimensions must be >= 1".into()));
    }
    let mut rng = SeededRng::new(seed).split(0x4c51_5253); // module-scoped stream
    for _attempt in 0..500 {
        let mut a = DMatrix::from_fn(n_states, n_states, |_, _| rng.normal());
        let rho_a = spectral_radius(&a);
        if rho_a < 1e-6 {
            continue;
        }
        // Rescale so the open loop is unstable but not wildly so.
        let target = rng.uniform(1.05, 1.3);
        a *= target / rho_a;
        let b = DMatrix::from_fn(n_states, n_actions, |_, _| rng.normal());
        let g = DMatrix::from_fn(n_states, n_states, |_, _| rng.normal());
        let qc = DMatrix::identity(n_states, n_states) + 0.5 / n_states as f64 * (g.transpose() * &g);
        let h = DMatrix::from_fn(n_actions, n_actions, |_, _| rng.normal());
        let rc =
            DMatrix::identity(n_actions, n_actions) + 0.5 / n_actions as f64 * (h.transpose() * &h);
        let sys = LqrSystem {
            a,
            b,
            qc,
            rc,
            gamma: 0.99,
            s0: DVector::from_element(n_states, 9.0),
            horizon: 1000,
        };
        let Ok(k_opt) = optimal_gain(&sys) else {
            continue;
        };
        if spectral_radius(&(&sys.a - &sys.b * &k_opt)) >= 0.995 {
            continue;
        }
        let Ok(val_opt) = policy_eval(&sys, &LinearGaussianPolicy::new(k_opt.clone(), LQR_POLICY_SIGMA))
        else {
            continue;
        };
        let j_opt = j_value(&sys, &val_opt);

        // Perturb K_opt until the loop is stable and visibly suboptimal.
        for _ in 0..60 {
            let tau = rng.uniform(0.02, 0.3) / (n_states as f64).sqrt();
            let k_init = &k_opt
                + DMatrix::from_fn(n_actions, n_states, |_, _| tau * rng.normal());
            if spectral_radius(&(&sys.a - &sys.b * &k_init)) >= 0.97 {
                continue;
            }
            let Ok(val) = policy_eval(&sys, &LinearGaussianPolicy::new(k_init.clone(), LQR_POLICY_SIGMA))
            else {
                continue;
            };
            let ratio = j_value(&sys, &val) / j_opt; // both negative, ratio > 1 when worse
            if (1.3..=4.0).contains(&ratio) {
                return Ok((sys, k_init));
            }
        }
    }
    Err(Error::Unstable(format!(
        "could not generate an LQR({n_states},{n_actions}) instance for seed {seed}"
    )))
}

/// Oracle policy gradient `∇_K J` by central finite differences of the
/// closed-form `J(K)` with step `1e-6`; every perturbed `J` comes from the
/// machine-precision [`policy_eval`] solve, so there is no sampling noise.
pub fn true_policy_gradient(
    sys: &LqrSystem,
    pol: &LinearGaussianPolicy,
) -> Result<DMatrix<f64>> {
    let h = 1e-6;
    let (m, n) = (pol.k.nrows(), pol.k.ncols());
    let mut grad = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let mut kp = pol.clone();
            kp.k[(i, j)] += h;
            let jp = j_value(sys, &policy_eval(sys, &kp)?);
            let mut km = pol.clone();
            km.k[(i, j)] -= h;
            let jm = j_value(sys, &policy_eval(sys, &km)?);
            grad[(i, j)] = (jp - jm) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Sinusoidal critic-error model
/// `Q̂(s,a) = Q(s,a)·(1 + α·cos(2πf·pᵀa + φ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyQConfig {
    pub alpha: f64,
    pub freq: f64,
    /// Direction with entries summing to 1.
    pub p: DVector<f64>,
    pub phi: f64,
}

impl NoisyQConfig {
    pub fn new(alpha: f64, freq: f64, p: DVector<f64>, phi: f64) -> Result<Self> {
        if alpha < 0.0 || freq < 0.0 {
            return Err(Error::InvalidParameter(
                "noisy Q needs alpha >= 0 and freq >= 0".into(),
            ));
        }
        if (p.sum() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "noisy Q direction must sum to 1, got {}",
                p.sum()
            )));
        }
        Ok(Self { alpha, freq, p, phi })
    }

    /// Random direction on the simplex and random phase, as fresh noise
    /// for one experiment cell.
    pub fn random(alpha: f64, freq: f64, n_actions: usize, rng: &mut SeededRng) -> Result<Self> {
        let raw: Vec<f64> = (0..n_actions).map(|_| rng.uniform_open()).collect();
        let total: f64 = raw.iter().sum();
        let p = DVector::from_iterator(n_actions, raw.iter().map(|v| v / total));
        let phi = rng.uniform(0.0, 2.0 * std::f64::consts::PI);
        Self::new(alpha, freq, p, phi)
    }

    fn phase(&self, a: &DVector<f64>) -> f64 {
        2.0 * std::f64::consts::PI * self.freq * self.p.dot(a) + self.phi
    }
}

/// Apply the sinusoidal error model to a base Q value.
pub fn noisy_q(q: f64, a: &DVector<f64>, cfg: &NoisyQConfig) -> f64 {
    q + cfg.alpha * q * cfg.phase(a).cos()
}

/// Which critic the gradient estimators query.
#[derive(Debug, Clone, PartialEq)]
pub enum QSource {
    True,
    Noisy(NoisyQConfig),
}

impl QSource {
    fn q(&self, sys: &LqrSystem, val: &QuadraticValue, s: &DVector<f64>, a: &DVector<f64>) -> f64 {
        let base = q_value(sys, val, s, a);
        match self {
            QSource::True => base,
            QSource::Noisy(cfg) => noisy_q(base, a, cfg),
        }
    }

    fn q_grad(
        &self,
        sys: &LqrSystem,
        val: &QuadraticValue,
        s: &DVector<f64>,
        a: &DVector<f64>,
    ) -> DVector<f64> {
        let base_grad = q_grad_action(sys, val, s, a);
        match self {
            QSource::True => base_grad,
            QSource::Noisy(cfg) => {
                let base = q_value(sys, val, s, a);
                let theta = cfg.phase(a);
                let scale = 1.0 + cfg.alpha * theta.cos();
                let swing = cfg.alpha * base * 2.0 * std::f64::consts::PI * cfg.freq * theta.sin();
                base_grad * scale - &cfg.p * swing
            }
        }
    }
}

/// States visited by on-policy rollouts, each carrying its discount
/// weight `γᵗ`; one inner vector per trajectory.
pub fn sample_discounted_states(
    sys: &LqrSystem,
    pol: &LinearGaussianPolicy,
    n_traj: usize,
    rng: &mut SeededRng,
) -> Result<Vec<Vec<(DVector<f64>, f64)>>> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
    }
    let mut trajectories = Vec::with_capacity(n_traj);
    for _ in 0..n_traj {
        let mut states = Vec::with_capacity(sys.horizon);
        let mut s = sys.s0.clone();
        let mut w = 1.0;
        for _ in 0..sys.horizon {
            if s.norm() > DIVERGENCE_GUARD {
                return Err(Error::Unstable("rollout state norm exceeded guard".into()));
            }
            states.push((s.clone(), w));
            let a = pol.act(&s, rng);
            s = &sys.a * &s + &sys.b * &a;
            w *= sys.gamma;
        }
        trajectories.push(states);
    }
    Ok(trajectories)
}

/// One policy-gradient estimate together with its oracle comparison.
#[derive(Debug, Clone)]
pub struct LqrGradEstimate {
    pub grad: DMatrix<f64>,
    pub oracle: DMatrix<f64>,
    pub rel_abs_error: f64,
    pub cosine_distance: f64,
    pub n_q_evals: usize,
}

/// Precomputed quantities shared by every estimate at a fixed policy.
pub struct LqrOracle {
    pub val: QuadraticValue,
    pub grad: DMatrix<f64>,
}

impl LqrOracle {
    pub fn new(sys: &LqrSystem, pol: &LinearGaussianPolicy) -> Result<Self> {
        let val = policy_eval(sys, pol)?;
        let grad = true_policy_gradient(sys, pol)?;
        Ok(Self { val, grad })
    }
}

/// Per-state gradient of the action expectation with respect to the
/// policy mean, for the chosen estimator; `n_actions` is the per-state
/// query budget (MVD consumes it as `2m` queries per MC pair).
fn state_mean_gradient(
    sys: &LqrSystem,
    val: &QuadraticValue,
    estimator: EstimatorKind,
    q_source: &QSource,
    mu: &DVector<f64>,
    sigma: f64,
    s: &DVector<f64>,
    n_actions: usize,
    rng: &mut SeededRng,
    n_evals: &mut usize,
) -> Result<DVector<f64>> {
    let m = mu.len();
    let mut g = DVector::zeros(m);
    match estimator {
        EstimatorKind::Mvd => {
            let n_pairs = (n_actions / (2 * m)).max(1);
            let dist = DiagGaussian::new(mu.iter().copied().collect(), vec![sigma; m])?;
            let mut a_plus = DVector::zeros(m);
            let mut a_minus = DVector::zeros(m);
            for k in 0..m {
                let mut acc = 0.0;
                let mut constant = 0.0;
                for _ in 0..n_pairs {
                    let (xp, xm, c) = mvd_component_pair(&dist, k, true, rng)?;
                    constant = c;
                    for i in 0..m {
                        a_plus[i] = xp[i];
                        a_minus[i] = xm[i];
                    }
                    acc += q_source.q(sys, val, s, &a_plus) - q_source.q(sys, val, s, &a_minus);
                    *n_evals += 2;
                }
                g[k] = constant * acc / n_pairs as f64;
            }
        }
        EstimatorKind::Sf => {
            // Advantage payoff: the true V is the baseline.
            let v = val.v(s);
            let inv_var = 1.0 / (sigma * sigma);
            let mut a = DVector::zeros(m);
            for _ in 0..n_actions {
                for i in 0..m {
                    a[i] = mu[i] + sigma * rng.normal();
                }
                let adv = q_source.q(sys, val, s, &a) - v;
                *n_evals += 1;
                for i in 0..m {
                    g[i] += (a[i] - mu[i]) * inv_var * adv;
                }
            }
            g /= n_actions as f64;
        }
        EstimatorKind::Rep => {
            let mut a = DVector::zeros(m);
            for _ in 0..n_actions {
                for i in 0..m {
                    a[i] = mu[i] + sigma * rng.normal();
                }
                g += q_source.q_grad(sys, val, s, &a);
                *n_evals += 1;
            }
            g /= n_actions as f64;
        }
    }
    Ok(g)
}

/// Estimate `∇_K J` with the chosen estimator over discounted-state
/// samples, using the supplied value function as the critic.
///
/// Each trajectory contributes the discounted sum `Σ_t γᵗ ĝ(s_t)` and the
/// estimate averages over trajectories, matching the policy-gradient
/// theorem's unnormalized state measure. The chain rule through the mean
/// `μ(s) = −K·s` turns a per-state mean-gradient `ĝ_μ` into
/// `−ĝ_μ · sᵀ`.
#[allow(clippy::too_many_arguments)]
pub fn lqr_gradient_estimate(
    sys: &LqrSystem,
    pol: &LinearGaussianPolicy,
    val: &QuadraticValue,
    estimator: EstimatorKind,
    n_traj: usize,
    actions_per_state: usize,
    q_source: &QSource,
    rng: &mut SeededRng,
) -> Result<DMatrix<f64>> {
    if actions_per_state == 0 {
        return Err(Error::InvalidParameter("actions_per_state must be >= 1".into()));
    }
    let sigma = pol.sigma[0];
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(
            "gradient estimation needs a stochastic policy (sigma > 0)".into(),
        ));
    }
    let (m, n) = (pol.k.nrows(), pol.k.ncols());
    let mut grad = DMatrix::<f64>::zeros(m, n);
    let mut n_evals = 0usize;
    let trajectories = sample_discounted_states(sys, pol, n_traj, rng)?;
    for states in &trajectories {
        for (s, w) in states {
            let mu = pol.mean(s);
            let g_mu = state_mean_gradient(
                sys,
                val,
                estimator,
                q_source,
                &mu,
                sigma,
                s,
                actions_per_state,
                rng,
                &mut n_evals,
            )?;
            // ∂μ/∂K is linear in s: accumulate −w·g_mu·sᵀ.
            for i in 0..m {
                let coef = -w * g_mu[i];
                for j in 0..n {
                    grad[(i, j)] += coef * s[j];
                }
            }
        }
    }
    grad /= n_traj as f64;
    Ok(grad)
}

/// [`lqr_gradient_estimate`] plus the oracle comparison metrics.
#[allow(clippy::too_many_arguments)]
pub fn lqr_policy_gradient(
    sys: &LqrSystem,
    pol: &LinearGaussianPolicy,
    oracle: &LqrOracle,
    estimator: EstimatorKind,
    n_traj: usize,
    actions_per_state: usize,
    q_source: &QSource,
    rng: &mut SeededRng,
) -> Result<LqrGradEstimate> {
    let grad = lqr_gradient_estimate(
        sys,
        pol,
        &oracle.val,
        estimator,
        n_traj,
        actions_per_state,
        q_source,
        rng,
    )?;
    let est_flat: Vec<f64> = grad.iter().copied().collect();
    let oracle_flat: Vec<f64> = oracle.grad.iter().copied().collect();
    Ok(LqrGradEstimate {
        rel_abs_error: rel_abs_error(&est_flat, &oracle_flat)?,
        cosine_distance: cosine_distance(&est_flat, &oracle_flat)?,
        grad,
        oracle: oracle.grad.clone(),
        n_q_evals: n_evals_of(estimator, n_traj, sys.horizon, actions_per_state, sys.n_actions()),
    })
}

/// Exact critic-query count for one estimate: every estimator consumes
/// the full per-state action budget at each of the `n_traj × horizon`
/// visited states (MVD rounds the budget up to at least one pair per
/// parameter).
pub fn n_evals_of(
    estimator: EstimatorKind,
    n_traj: usize,
    horizon: usize,
    actions_per_state: usize,
    n_action_dims: usize,
) -> usize {
    let per_state = match estimator {
        EstimatorKind::Mvd => {
            let pairs = (actions_per_state / (2 * n_action_dims)).max(1);
            2 * n_action_dims * pairs
        }
        _ => actions_per_state,
    };
    n_traj * horizon * per_state
}
