//! Soft actor-critic with interchangeable actor-gradient estimators.
//!
//! The critic side is fixed across variants: twin Q networks with soft
//! target copies and min-backup regression on
//! `y = r + γ(min Q̄(s',a') − α·log π(a'|s'))`. The actor maximizes
//! `E[min Q(s,a) − α·log π(a|s)]` and only the gradient estimator for
//! that expectation changes:
//!
//! - `rep`: pathwise through `a = bound·tanh(μ + σ⊙ε)`, one sample.
//! - `mvd`: per distributional parameter, the component-pair difference
//!   `c_k (f(s,a⁺) − f(s,a⁻))` on `f = min Q − α·log π`, plus the
//!   explicit (zero-mean) `−α·∇_ω log π` term from one on-policy sample.
//! - `sf`: score × `(min Q − α·log π)`, no baseline, one sample.
//! - `rep-extra` / `sf-extra`: same estimators with the per-state query
//!   budget raised to MVD's `2·|ω|` queries.

use crate::envs::{Env, Transition};
use crate::error::{Error, Result};
use crate::nnet::{AdamState, Mlp, MlpTrace};
use crate::policies::{squashed_log_prob_from_dist, GaussianPolicy, MeanHead};
use crate::rng::SeededRng;
use crate::trees::ReplayBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SacVariant {
    Rep,
    Mvd,
    Sf,
    RepExtra,
    SfExtra,
}

impl SacVariant {
    pub const ALL: [SacVariant; 5] = [
        SacVariant::Rep,
        SacVariant::Mvd,
        SacVariant::Sf,
        SacVariant::RepExtra,
        SacVariant::SfExtra,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SacVariant::Rep => "rep",
            SacVariant::Mvd => "mvd",
            SacVariant::Sf => "sf",
            SacVariant::RepExtra => "rep-extra",
            SacVariant::SfExtra => "sf-extra",
        }
    }
}

impl std::fmt::Display for SacVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SacVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SacVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown sac variant '{s}'")))
    }
}

/// Critic queries per batch state for one actor update; the `-extra`
/// variants match MVD's budget exactly.
pub fn actor_queries_per_state(variant: SacVariant, action_dim: usize, n_mc: usize) -> usize {
    match variant {
        SacVariant::Rep | SacVariant::Sf => 1,
        SacVariant::Mvd | SacVariant::RepExtra | SacVariant::SfExtra => {
            2 * (2 * action_dim) * n_mc
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SacConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub warmup_transitions: usize,
    pub replay_capacity: usize,
    pub critic_hidden: Vec<usize>,
    pub actor_hidden: Vec<usize>,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub gamma: f64,
    /// Entropy regularization weight.
    pub entropy_alpha: f64,
    /// Target smoothing coefficient, applied every step.
    pub tau: f64,
    pub initial_sigma: f64,
    pub eval_episodes: usize,
    pub mvd_coupled: bool,
    pub mc_samples: usize,
}

impl Default for SacConfig {
    /// Pendulum setting: 50 epochs × 1000 steps, batch 64, warmup 128,
    /// replay 500000, twin [64,64] ReLU critics, [64,64] ReLU actor,
    /// Adam at 1e-4 (actor) and 3e-4 (critic).
    fn default() -> Self {
        Self {
            epochs: 50,
            steps_per_epoch: 1000,
            batch_size: 64,
            warmup_transitions: 128,
            replay_capacity: 500_000,
            critic_hidden: vec![64, 64],
            actor_hidden: vec![64, 64],
            lr_actor: 1e-4,
            lr_critic: 3e-4,
            gamma: 0.99,
            entropy_alpha: 0.2,
            tau: 0.005,
            initial_sigma: 1.0,
            eval_episodes: 10,
            mvd_coupled: true,
            mc_samples: 1,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs, steps_per_epoch and batch_size must be positive".into(),
            ));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must be in [0, 1)".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config("tau must be in (0, 1]".into()));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacEpochStat {
    pub epoch: usize,
    pub env_steps: usize,
    pub mean_eval_reward: f64,
    /// Mean critic regression loss over this epoch's updates (NaN before
    /// any update happened).
    pub mean_critic_loss: f64,
    pub n_updates: usize,
}

struct Critic {
    net: Mlp,
    target: Mlp,
    adam: AdamState,
    trace: MlpTrace,
    grad: Vec<f64>,
}

impl Critic {
    fn new(sizes: &[usize], lr: f64, rng: &mut SeededRng) -> Self {
        let net = Mlp::new(sizes, rng);
        let target = net.clone();
        let trace = net.alloc_trace();
        let n = net.n_params();
        Self {
            net,
            target,
            adam: AdamState::new(n, lr),
            trace,
            grad: vec![0.0; n],
        }
    }

    fn soft_update(&mut self, tau: f64) {
        for (t, q) in self.target.params_mut().iter_mut().zip(self.net.params()) {
            *t = tau * *q + (1.0 - tau) * *t;
        }
    }
}

/// Reusable buffers for the training loop.
struct Workspace {
    sa: Vec<f64>,
    targets: Vec<f64>,
    g_omega: Vec<f64>,
    policy_grad: Vec<f64>,
}

fn fill_sa(sa: &mut [f64], s: &[f64], a: &[f64]) {
    sa[..s.len()].copy_from_slice(s);
    sa[s.len()..].copy_from_slice(a);
}

/// `min(Q1, Q2)` at `(s, a)` and which critic attained it.
fn q_min(c1: &Critic, c2: &Critic, sa: &[f64]) -> (f64, usize) {
    let q1 = c1.net.forward(sa).expect("critic dims")[0];
    let q2 = c2.net.forward(sa).expect("critic dims")[0];
    if q1 <= q2 {
        (q1, 0)
    } else {
        (q2, 1)
    }
}

fn target_min(c1: &Critic, c2: &Critic, sa: &[f64]) -> f64 {
    let q1 = c1.target.forward(sa).expect("critic dims")[0];
    let q2 = c2.target.forward(sa).expect("critic dims")[0];
    q1.min(q2)
}

/// Train SAC on one environment; returns per-epoch statistics.
/// Bit-reproducible per `(seed, config, variant)`.
pub fn sac_train(
    make_env: &dyn Fn() -> Box<dyn Env>,
    variant: SacVariant,
    cfg: &SacConfig,
    seed: u64,
) -> Result<Vec<SacEpochStat>> {
    cfg.validate()?;
    let mut env = make_env();
    let mut eval_env = make_env();
    let (sd, ad) = (env.state_dim(), env.action_dim());
    let bound = env.action_bound();
    let root = SeededRng::new(seed);
    let mut init_rng = root.split(0);

    let mut actor_sizes = vec![sd];
    actor_sizes.extend_from_slice(&cfg.actor_hidden);
    actor_sizes.push(ad);
    let mut policy = GaussianPolicy::new(
        MeanHead::Mlp(Mlp::new(&actor_sizes, &mut init_rng)),
        cfg.initial_sigma,
        Some(bound),
    );
    let mut actor_adam = AdamState::new(policy.n_params(), cfg.lr_actor);

    let mut critic_sizes = vec![sd + ad];
    critic_sizes.extend_from_slice(&cfg.critic_hidden);
    critic_sizes.push(1);
    let mut c1 = Critic::new(&critic_sizes, cfg.lr_critic, &mut init_rng);
    let mut c2 = Critic::new(&critic_sizes, cfg.lr_critic, &mut init_rng);

    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut ws = Workspace {
        sa: vec![0.0; sd + ad],
        targets: vec![0.0; cfg.batch_size],
        g_omega: vec![0.0; 2 * ad],
        policy_grad: vec![0.0; policy.n_params()],
    };
    let mut batch: Vec<Transition> = Vec::with_capacity(cfg.batch_size);

    let mut train_rng = root.split(1);
    let mut state = env.reset(&mut train_rng);
    let mut ep_len = 0usize;
    let mut env_steps = 0usize;
    let mut stats = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut n_updates = 0usize;
        for _ in 0..cfg.steps_per_epoch {
            let action = policy.act(&state, &mut train_rng)?;
            let step = env.step(&action);
            replay.push(Transition {
                state: state.clone(),
                action,
                reward: step.reward,
                next_state: step.next_state.clone(),
                terminal: step.terminal,
            });
            env_steps += 1;
            ep_len += 1;
            if step.terminal || ep_len >= env.horizon() {
                state = env.reset(&mut train_rng);
                ep_len = 0;
            } else {
                state = step.next_state;
            }

            if replay.len() >= cfg.warmup_transitions.max(cfg.batch_size) {
                batch.clear();
                for _ in 0..cfg.batch_size {
                    batch.push(replay.get(train_rng.index(replay.len())).clone());
                }
                loss_sum += critic_update(&batch, &policy, &mut c1, &mut c2, cfg, &mut ws, &mut train_rng)?;
                actor_update(
                    &batch,
                    &mut policy,
                    &mut actor_adam,
                    &c1,
                    &c2,
                    variant,
                    cfg,
                    &mut ws,
                    &mut train_rng,
                )?;
                c1.soft_update(cfg.tau);
                c2.soft_update(cfg.tau);
                n_updates += 1;
            }
        }

        let mut eval_rng = root.split(1000 + epoch as u64);
        let mean_eval_reward = evaluate(eval_env.as_mut(), &policy, cfg.eval_episodes, &mut eval_rng);
        stats.push(SacEpochStat {
            epoch,
            env_steps,
            mean_eval_reward,
            mean_critic_loss: if n_updates > 0 {
                loss_sum / n_updates as f64
            } else {
                f64::NAN
            },
            n_updates,
        });
    }
    Ok(stats)
}

fn evaluate(
    env: &mut dyn Env,
    policy: &GaussianPolicy,
    episodes: usize,
    rng: &mut SeededRng,
) -> f64 {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = env.reset(rng);
        for _ in 0..env.horizon() {
            let action = policy.act_deterministic(&state).expect("dims");
            let step = env.step(&action);
            total += step.reward;
            if step.terminal {
                break;
            }
            state = step.next_state;
        }
    }
    total / episodes as f64
}

/// Twin-critic regression on soft targets; returns the mean squared loss.
fn critic_update(
    batch: &[Transition],
    policy: &GaussianPolicy,
    c1: &mut Critic,
    c2: &mut Critic,
    cfg: &SacConfig,
    ws: &mut Workspace,
    rng: &mut SeededRng,
) -> Result<f64> {
    let b = batch.len();
    for (i, tr) in batch.iter().enumerate() {
        let dist = policy.dist_params(&tr.next_state)?;
        let u_next = dist.sample(rng);
        let a_next = policy.squash_action(&u_next);
        fill_sa(&mut ws.sa, &tr.next_state, &a_next);
        let q_next = target_min(c1, c2, &ws.sa);
        let log_pi = squashed_log_prob_from_dist(&dist, policy.squash, &u_next)?;
        let not_done = if tr.terminal { 0.0 } else { 1.0 };
        ws.targets[i] =
            tr.reward + cfg.gamma * not_done * (q_next - cfg.entropy_alpha * log_pi);
    }

    let mut loss = 0.0;
    for critic in [&mut *c1, &mut *c2] {
        critic.grad.iter_mut().for_each(|g| *g = 0.0);
        for (i, tr) in batch.iter().enumerate() {
            fill_sa(&mut ws.sa, &tr.state, &tr.action);
            critic.net.forward_trace(&ws.sa, &mut critic.trace);
            let q = critic.trace.output()[0];
            let err = q - ws.targets[i];
            loss += err * err;
            let upstream = [2.0 * err / b as f64];
            let (net, trace, grad) = (&critic.net, &mut critic.trace, &mut critic.grad);
            net.backward_trace(trace, &upstream, Some(grad.as_mut_slice()), None);
        }
        let (net, adam, grad) = (&mut critic.net, &mut critic.adam, &critic.grad);
        adam.step(net.params_mut(), grad);
    }
    Ok(loss / (2 * b) as f64)
}

/// One actor ascent step on `E[min Q(s,a) − α·log π(a|s)]` with the
/// variant's gradient estimator, averaged over the batch states.
#[allow(clippy::too_many_arguments)]
fn actor_update(
    batch: &[Transition],
    policy: &mut GaussianPolicy,
    adam: &mut AdamState,
    c1: &Critic,
    c2: &Critic,
    variant: SacVariant,
    cfg: &SacConfig,
    ws: &mut Workspace,
    rng: &mut SeededRng,
) -> Result<()> {
    let ad = policy.action_dim();
    let alpha = cfg.entropy_alpha;
    let bound = policy.squash.expect("sac uses a squashed policy");
    ws.policy_grad.iter_mut().for_each(|g| *g = 0.0);

    let pathwise_samples = match variant {
        SacVariant::Rep => 1,
        SacVariant::RepExtra => actor_queries_per_state(SacVariant::Mvd, ad, cfg.mc_samples),
        _ => 0,
    };
    let score_samples = match variant {
        SacVariant::Sf => 1,
        SacVariant::SfExtra => actor_queries_per_state(SacVariant::Mvd, ad, cfg.mc_samples),
        _ => 0,
    };

    for tr in batch {
        let s = &tr.state;
        let dist = policy.dist_params(s)?;
        ws.g_omega.iter_mut().for_each(|g| *g = 0.0);
        match variant {
            SacVariant::Rep | SacVariant::RepExtra => {
                let mut u = vec![0.0; ad];
                let mut eps = vec![0.0; ad];
                for _ in 0..pathwise_samples {
                    for i in 0..ad {
                        eps[i] = rng.normal();
                        u[i] = dist.mu()[i] + dist.sigma()[i] * eps[i];
                    }
                    let a = policy.squash_action(&u);
                    fill_sa(&mut ws.sa, s, &a);
                    let (_, which) = q_min(c1, c2, &ws.sa);
                    let critic = if which == 0 { c1 } else { c2 };
                    let dq_dsa = critic.net.backward_input(&ws.sa, &[1.0])?;
                    let inv = 1.0 / pathwise_samples as f64;
                    for i in 0..ad {
                        let th = u[i].tanh();
                        let dq_du = dq_dsa[s.len() + i] * bound * (1.0 - th * th);
                        let g_mu = dq_du - 2.0 * alpha * th;
                        let g_sigma = dq_du * eps[i]
                            + alpha * (1.0 / dist.sigma()[i] - 2.0 * th * eps[i]);
                        ws.g_omega[i] += inv * g_mu;
                        ws.g_omega[ad + i] += inv * g_sigma;
                    }
                }
            }
            SacVariant::Mvd => {
                for k in 0..2 * ad {
                    let mut acc = 0.0;
                    let mut constant = 0.0;
                    for _ in 0..cfg.mc_samples {
                        let (u_plus, u_minus, c) =
                            crate::dists::mvd_component_pair(&dist, k, cfg.mvd_coupled, rng)?;
                        constant = c;
                        let a_plus = policy.squash_action(&u_plus);
                        let a_minus = policy.squash_action(&u_minus);
                        fill_sa(&mut ws.sa, s, &a_plus);
                        let (qp, _) = q_min(c1, c2, &ws.sa);
                        fill_sa(&mut ws.sa, s, &a_minus);
                        let (qm, _) = q_min(c1, c2, &ws.sa);
                        let fp = qp
                            - alpha * squashed_log_prob_from_dist(&dist, policy.squash, &u_plus)?;
                        let fm = qm
                            - alpha * squashed_log_prob_from_dist(&dist, policy.squash, &u_minus)?;
                        acc += fp - fm;
                    }
                    ws.g_omega[k] = constant * acc / cfg.mc_samples as f64;
                }
                // explicit −α∇_ω log π term from one on-policy sample
                let u = dist.sample(rng);
                let score = dist.score(&u)?;
                for k in 0..2 * ad {
                    ws.g_omega[k] -= alpha * score[k];
                }
            }
            SacVariant::Sf | SacVariant::SfExtra => {
                for _ in 0..score_samples {
                    let u = dist.sample(rng);
                    let a = policy.squash_action(&u);
                    fill_sa(&mut ws.sa, s, &a);
                    let (q, _) = q_min(c1, c2, &ws.sa);
                    let payoff =
                        q - alpha * squashed_log_prob_from_dist(&dist, policy.squash, &u)?;
                    let score = dist.score(&u)?;
                    let inv = 1.0 / score_samples as f64;
                    for k in 0..2 * ad {
                        ws.g_omega[k] += inv * score[k] * payoff;
                    }
                }
            }
        }
        policy.accumulate_chain_grad(s, &ws.g_omega, &mut ws.policy_grad);
    }
    let scale = 1.0 / batch.len() as f64;
    ws.policy_grad.iter_mut().for_each(|g| *g *= scale);
    let mut flat = policy.params_flat();
    adam.ascend(&mut flat, &ws.policy_grad);
    policy.set_params_flat(&flat);
    Ok(())
}
