//! Torque-limited pendulum swing-up with the community-standard
//! parameters: g = 10, m = 1, l = 1, dt = 0.05, torque clipped to ±2,
//! angular velocity clipped to ±8, horizon 200, reward
//! `−(wrap(θ)² + 0.1·θ̇² + 0.001·a²)` with θ = 0 upright.

use super::{Env, EnvStep};
use crate::rng::SeededRng;

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_SPEED: f64 = 8.0;
pub const HORIZON: usize = 200;

/// Wrap an angle to [−π, π).
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    (theta + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI
}

/// One dynamics step on the intrinsic state `(θ, θ̇)`.
///
/// Semi-implicit Euler: the velocity update uses the current angle, the
/// angle update uses the new velocity. The reward is evaluated at the
/// current state and action. Never terminal; episodes end by horizon.
pub fn pendulum_step(state: (f64, f64), torque: f64) -> EnvStep {
    let (theta, theta_dot) = state;
    let a = torque.clamp(-MAX_TORQUE, MAX_TORQUE);
    let cost = wrap_angle(theta).powi(2) + 0.1 * theta_dot * theta_dot + 0.001 * a * a;
    let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * a;
    let new_theta_dot = (theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
    let new_theta = theta + new_theta_dot * DT;
    EnvStep {
        next_state: vec![new_theta, new_theta_dot],
        reward: -cost,
        terminal: false,
    }
}

/// Pendulum environment exposing the observation `(cos θ, sin θ, θ̇)`.
#[derive(Debug, Clone)]
pub struct Pendulum {
    theta: f64,
    theta_dot: f64,
    t: usize,
}

impl Pendulum {
    pub fn new() -> Self {
        Self {
            theta: std::f64::consts::PI,
            theta_dot: 0.0,
            t: 0,
        }
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for Pendulum {
    fn reset(&mut self, rng: &mut SeededRng) -> Vec<f64> {
        self.theta = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI);
        self.theta_dot = rng.uniform(-1.0, 1.0);
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> EnvStep {
        assert_eq!(action.len(), 1, "pendulum takes a single torque");
        let step = pendulum_step((self.theta, self.theta_dot), action[0]);
        self.theta = step.next_state[0];
        self.theta_dot = step.next_state[1];
        self.t += 1;
        EnvStep {
            next_state: self.observation(),
            reward: step.reward,
            terminal: false,
        }
    }

    fn state_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        HORIZON
    }

    fn action_bound(&self) -> f64 {
        MAX_TORQUE
    }

    fn name(&self) -> &str {
        "pendulum"
    }
}
