//! Monte Carlo gradient estimation of `∇_ω E_{p(x;ω)}[f(x)]` and its use in
//! actor-critic policy gradients.
//!
//! The crate provides three unbiased estimators — score-function,
//! reparametrization, and measure-valued derivative — plus a biased
//! finite-difference reference, together with the testbeds used to compare
//! them: analytic LQR problems with known value functions and gradients,
//! optimization test functions, a tree-critic on-policy policy gradient,
//! and a small soft actor-critic.
//!
//! Modules map onto the moving parts:
//!
//! - [`dists`]: Gaussian family samplers, densities, and the measure-valued
//!   derivative decomposition triplets.
//! - [`estimators`]: the four gradient estimators over a diagonal Gaussian.
//! - [`nnet`]: dense MLPs with exact reverse-mode gradients and Adam.
//! - [`lqr`]: discounted LQR with analytic value functions and a
//!   machine-precision gradient oracle.
//! - [`envs`]: Pendulum and 2-D gridworld tasks behind a step/reset trait.
//! - [`policies`]: diagonal-Gaussian policies (linear or MLP mean head),
//!   tanh squashing, and the chain rule from distribution space to
//!   network parameters.
//! - [`trees`]: Extra-Trees regression, replay buffer, and Bellman-fitted Q.
//! - [`algos`]: the training procedures built from the above.
//! - [`harness`]: gradient-error metrics, experiment configs, multi-seed
//!   runner, and CSV/manifest output.

pub mod algos;
pub mod dists;
pub mod envs;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod lqr;
pub mod nnet;
pub mod policies;
pub mod rng;
pub mod trees;

pub use error::{Error, Result};
pub use rng::SeededRng;
