//! Step/reset environment abstraction and the desk-scale tasks.

pub mod gridworld;
pub mod pendulum;

pub use gridworld::{GridWorld2D, Segment};
pub use pendulum::{pendulum_step, Pendulum};

use crate::rng::SeededRng;
use std::io::Write;

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
}

/// A `(s, a, r, s', terminal)` tuple as stored in replay buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
}

/// Single-owner mutable environment state machine. Once a step reports
/// `terminal`, no further steps are accepted until [`Env::reset`].
pub trait Env {
    fn reset(&mut self, rng: &mut SeededRng) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> EnvStep;
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Symmetric per-dimension action bound (actions live in `[-b, b]^m`).
    fn action_bound(&self) -> f64;
    fn name(&self) -> &str;
}

/// Run one episode until terminal or the environment's horizon.
/// Deterministic given the seed state of `rng`.
pub fn rollout(
    env: &mut dyn Env,
    policy: &mut dyn FnMut(&[f64], &mut SeededRng) -> Vec<f64>,
    rng: &mut SeededRng,
) -> Vec<Transition> {
    let mut state = env.reset(rng);
    let mut transitions = Vec::new();
    for _ in 0..env.horizon() {
        let action = policy(&state, rng);
        let step = env.step(&action);
        transitions.push(Transition {
            state: state.clone(),
            action,
            reward: step.reward,
            next_state: step.next_state.clone(),
            terminal: step.terminal,
        });
        if step.terminal {
            break;
        }
        state = step.next_state;
    }
    transitions
}

/// Undiscounted episode return.
pub fn episode_return(transitions: &[Transition]) -> f64 {
    transitions.iter().map(|t| t.reward).sum()
}

/// Dump a trajectory as CSV for inspection.
pub fn write_trajectory_csv<W: Write>(w: &mut W, transitions: &[Transition]) -> std::io::Result<()> {
    writeln!(w, "# mcgrad csv v1 trajectory")?;
    if transitions.is_empty() {
        return Ok(());
    }
    let sd = transitions[0].state.len();
    let ad = transitions[0].action.len();
    let mut header = vec!["t".to_string()];
    header.extend((0..sd).map(|i| format!("s{i}")));
    header.extend((0..ad).map(|i| format!("a{i}")));
    header.push("reward".into());
    header.extend((0..sd).map(|i| format!("s{i}_next")));
    header.push("terminal".into());
    writeln!(w, "{}", header.join(","))?;
    for (t, tr) in transitions.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(tr.state.iter().map(|v| v.to_string()));
        row.extend(tr.action.iter().map(|v| v.to_string()));
        row.push(tr.reward.to_string());
        row.extend(tr.next_state.iter().map(|v| v.to_string()));
        row.push((tr.terminal as u8).to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Clip a vector to the given Euclidean norm, in place.
pub fn clip_norm(v: &mut [f64], max_norm: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for x in v {
            *x *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rollout_respects_horizon_and_terminal() {
        let mut env = GridWorld2D::corridor();
        let mut rng = SeededRng::new(3);
        // a do-nothing policy never reaches the goal: exactly horizon steps
        let mut still = |_s: &[f64], _r: &mut SeededRng| vec![0.0, 0.0];
        let traj = rollout(&mut env, &mut still, &mut rng);
        assert_eq!(traj.len(), env.horizon());
        // a beeline policy terminates early at the goal
        let mut right = |_s: &[f64], _r: &mut SeededRng| vec![1.0, 0.0];
        let traj = rollout(&mut env, &mut right, &mut rng);
        assert!(traj.len() < env.horizon());
        assert!(traj.last().unwrap().terminal);
    }

    #[test]
    fn rollout_is_deterministic_given_seed() {
        let mut env = Pendulum::new();
        let mut policy = |s: &[f64], rng: &mut SeededRng| vec![s[0] * 0.1 + 1e-12 * rng.normal()];
        let t1 = rollout(&mut env, &mut policy, &mut SeededRng::new(9));
        let t2 = rollout(&mut env, &mut policy, &mut SeededRng::new(9));
        assert_eq!(t1, t2);
    }

    #[test]
    fn random_policy_pendulum_return_band() {
        // Band [−2000, −800] established by a 10³-episode MC reference.
        let mut env = Pendulum::new();
        let mut returns = Vec::new();
        let mut rng = SeededRng::new(123);
        for _ in 0..1000 {
            let mut policy = |_s: &[f64], r: &mut SeededRng| vec![r.uniform(-2.0, 2.0)];
            let traj = rollout(&mut env, &mut policy, &mut rng);
            assert_eq!(traj.len(), 200);
            returns.push(episode_return(&traj));
        }
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        assert!(
            (-2000.0..=-800.0).contains(&mean),
            "mean random-policy return {mean}"
        );
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let mut env = GridWorld2D::corridor();
        let mut rng = SeededRng::new(1);
        let mut policy = |_s: &[f64], _r: &mut SeededRng| vec![1.0, 0.0];
        let traj = rollout(&mut env, &mut policy, &mut rng);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# mcgrad csv v1"));
        assert_eq!(lines.len(), traj.len() + 2);
    }

    proptest! {
        #[test]
        fn clip_norm_is_idempotent(x in -5.0f64..5.0, y in -5.0f64..5.0) {
            let mut once = vec![x, y];
            clip_norm(&mut once, std::f64::consts::SQRT_2);
            let mut twice = once.clone();
            clip_norm(&mut twice, std::f64::consts::SQRT_2);
            prop_assert_eq!(once, twice);
        }
    }
}
