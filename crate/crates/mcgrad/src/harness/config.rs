//! Experiment configuration: TOML-loadable, schema-validated before any
//! work runs.

use crate::algos::{SacConfig, SacVariant, TestFnName, TestFnOptions, TreePgConfig};
use crate::envs::{Env, GridWorld2D, Pendulum};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Testfn,
    LqrGrad,
    LqrNoise,
    LqrTrain,
    TreePg,
    Sac,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Testfn => "testfn",
            ExperimentKind::LqrGrad => "lqr-grad",
            ExperimentKind::LqrNoise => "lqr-noise",
            ExperimentKind::LqrTrain => "lqr-train",
            ExperimentKind::TreePg => "tree-pg",
            ExperimentKind::Sac => "sac",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Which environment a training experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Corridor,
    Room,
    Pendulum,
}

impl EnvName {
    pub fn build(&self) -> Box<dyn Env> {
        match self {
            EnvName::Corridor => Box::new(GridWorld2D::corridor()),
            EnvName::Room => Box::new(GridWorld2D::room()),
            EnvName::Pendulum => Box::new(Pendulum::new()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvName::Corridor => "corridor",
            EnvName::Room => "room",
            EnvName::Pendulum => "pendulum",
        }
    }
}

impl std::str::FromStr for EnvName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corridor" => Ok(EnvName::Corridor),
            "room" => Ok(EnvName::Room),
            "pendulum" => Ok(EnvName::Pendulum),
            other => Err(Error::Config(format!("unknown environment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestFnExpConfig {
    pub functions: Vec<TestFnName>,
    pub estimators: Vec<EstimatorKind>,
    pub options: TestFnOptions,
}

impl Default for TestFnExpConfig {
    fn default() -> Self {
        Self {
            functions: TestFnName::ALL.to_vec(),
            estimators: EstimatorKind::ALL.to_vec(),
            options: TestFnOptions::default(),
        }
    }
}

/// Default LQR system-construction seed, shared across seeds of a sweep
/// so that every seed estimates gradients on identical matrices.
pub const DEFAULT_SYSTEM_SEED: u64 = 12061;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrGradExpConfig {
    /// `(n_states, n_actions)` pairs.
    pub sizes: Vec<[usize; 2]>,
    pub system_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub n_traj: Vec<usize>,
    /// Per-state action budgets as multiples of the action dimension.
    pub actions_per_dim: Vec<usize>,
}

impl Default for LqrGradExpConfig {
    fn default() -> Self {
        Self {
            sizes: vec![[2, 1], [2, 2], [4, 4]],
            system_seed: DEFAULT_SYSTEM_SEED,
            estimators: EstimatorKind::ALL.to_vec(),
            n_traj: vec![1, 10],
            actions_per_dim: vec![2, 6, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrNoiseExpConfig {
    pub sizes: Vec<[usize; 2]>,
    pub system_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub n_traj: usize,
    pub actions_per_dim: usize,
    pub alphas: Vec<f64>,
    /// Error frequencies; the default spans two decades.
    pub freqs: Vec<f64>,
}

impl Default for LqrNoiseExpConfig {
    fn default() -> Self {
        Self {
            sizes: vec![[2, 1], [2, 2], [4, 4]],
            system_seed: DEFAULT_SYSTEM_SEED,
            estimators: EstimatorKind::ALL.to_vec(),
            n_traj: 10,
            actions_per_dim: 20,
            alphas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            freqs: vec![0.1, 0.31622776601683794, 1.0, 3.1622776601683795, 10.0],
        }
    }
}

/// Appendix learning rates per system size.
pub fn lqr_train_learning_rate(n_states: usize, n_actions: usize) -> f64 {
    match (n_states, n_actions) {
        (2, 1) => 5e-2,
        (2, 2) => 1e-2,
        (4, 4) => 3e-3,
        (6, 6) => 5e-3,
        _ => 1e-2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LqrTrainExpConfig {
    pub sizes: Vec<[usize; 2]>,
    pub system_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub iterations: usize,
    /// Critic error amplitude; 0 uses the true Q.
    pub alpha: f64,
    pub freq: f64,
    /// Overrides the per-size Appendix learning rate when set.
    pub learning_rate: Option<f64>,
}

impl Default for LqrTrainExpConfig {
    fn default() -> Self {
        Self {
            sizes: vec![[2, 1]],
            system_seed: DEFAULT_SYSTEM_SEED,
            estimators: EstimatorKind::ALL.to_vec(),
            iterations: 300,
            alpha: 0.0,
            freq: 10.0,
            learning_rate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePgExpConfig {
    pub env: EnvName,
    #[serde(default = "TreePgConfig::gridworld_default")]
    pub train: TreePgConfig,
}

impl Default for TreePgExpConfig {
    fn default() -> Self {
        Self {
            env: EnvName::Corridor,
            train: TreePgConfig::gridworld_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacExpConfig {
    pub env: EnvName,
    pub variants: Vec<SacVariant>,
    pub train: SacConfig,
}

impl Default for SacExpConfig {
    fn default() -> Self {
        Self {
            env: EnvName::Pendulum,
            variants: vec![SacVariant::Rep, SacVariant::Mvd, SacVariant::Sf],
            train: SacConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub testfn: Option<TestFnExpConfig>,
    #[serde(default)]
    pub lqr_grad: Option<LqrGradExpConfig>,
    #[serde(default)]
    pub lqr_noise: Option<LqrNoiseExpConfig>,
    #[serde(default)]
    pub lqr_train: Option<LqrTrainExpConfig>,
    #[serde(default)]
    pub tree_pg: Option<TreePgExpConfig>,
    #[serde(default)]
    pub sac: Option<SacExpConfig>,
}

impl ExperimentConfig {
    /// A runnable default for the given kind with the provided seeds.
    pub fn default_for(kind: ExperimentKind, seeds: Vec<u64>) -> Self {
        let mut cfg = Self {
            kind,
            seeds,
            out_dir: None,
            threads: None,
            testfn: None,
            lqr_grad: None,
            lqr_noise: None,
            lqr_train: None,
            tree_pg: None,
            sac: None,
        };
        match kind {
            ExperimentKind::Testfn => cfg.testfn = Some(TestFnExpConfig::default()),
            ExperimentKind::LqrGrad => cfg.lqr_grad = Some(LqrGradExpConfig::default()),
            ExperimentKind::LqrNoise => cfg.lqr_noise = Some(LqrNoiseExpConfig::default()),
            ExperimentKind::LqrTrain => cfg.lqr_train = Some(LqrTrainExpConfig::default()),
            ExperimentKind::TreePg => cfg.tree_pg = Some(TreePgExpConfig::default()),
            ExperimentKind::Sac => cfg.sac = Some(SacExpConfig::default()),
        }
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be nonempty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        match self.kind {
            ExperimentKind::Testfn => {
                let c = self.testfn.as_ref().ok_or_else(|| miss("testfn"))?;
                if c.functions.is_empty() || c.estimators.is_empty() {
                    return Err(Error::Config("testfn needs functions and estimators".into()));
                }
                if !(c.options.lr > 0.0) {
                    return Err(Error::Config("testfn learning rate must be positive".into()));
                }
            }
            ExperimentKind::LqrGrad => {
                let c = self.lqr_grad.as_ref().ok_or_else(|| miss("lqr_grad"))?;
                validate_sizes(&c.sizes)?;
                if c.estimators.is_empty() || c.n_traj.is_empty() || c.actions_per_dim.is_empty() {
                    return Err(Error::Config("lqr_grad grids must be nonempty".into()));
                }
                if c.n_traj.iter().any(|&t| t == 0) || c.actions_per_dim.iter().any(|&a| a == 0) {
                    return Err(Error::Config("lqr_grad grid values must be positive".into()));
                }
            }
            ExperimentKind::LqrNoise => {
                let c = self.lqr_noise.as_ref().ok_or_else(|| miss("lqr_noise"))?;
                validate_sizes(&c.sizes)?;
                if c.estimators.is_empty() || c.alphas.is_empty() || c.freqs.is_empty() {
                    return Err(Error::Config("lqr_noise grids must be nonempty".into()));
                }
                if c.n_traj == 0 || c.actions_per_dim == 0 {
                    return Err(Error::Config("lqr_noise budgets must be positive".into()));
                }
                if c.alphas.iter().any(|&a| a < 0.0) || c.freqs.iter().any(|&f| f < 0.0) {
                    return Err(Error::Config("lqr_noise alphas and freqs must be >= 0".into()));
                }
            }
            ExperimentKind::LqrTrain => {
                let c = self.lqr_train.as_ref().ok_or_else(|| miss("lqr_train"))?;
                validate_sizes(&c.sizes)?;
                if c.estimators.is_empty() {
                    return Err(Error::Config("lqr_train needs estimators".into()));
                }
                if c.alpha < 0.0 || c.freq < 0.0 {
                    return Err(Error::Config("lqr_train alpha and freq must be >= 0".into()));
                }
            }
            ExperimentKind::TreePg => {
                let c = self.tree_pg.as_ref().ok_or_else(|| miss("tree_pg"))?;
                c.train.validate()?;
            }
            ExperimentKind::Sac => {
                let c = self.sac.as_ref().ok_or_else(|| miss("sac"))?;
                if c.variants.is_empty() {
                    return Err(Error::Config("sac needs at least one variant".into()));
                }
                c.train.validate()?;
            }
        }
        Ok(())
    }
}

fn miss(section: &str) -> Error {
    Error::Config(format!("missing [{section}] section for this experiment kind"))
}

fn validate_sizes(sizes: &[[usize; 2]]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::Config("sizes must be nonempty".into()));
    }
    for s in sizes {
        if s[0] == 0 || s[1] == 0 {
            return Err(Error::Config("system dimensions must be >= 1".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_kind() {
        for kind in [
            ExperimentKind::Testfn,
            ExperimentKind::LqrGrad,
            ExperimentKind::LqrNoise,
            ExperimentKind::LqrTrain,
            ExperimentKind::TreePg,
            ExperimentKind::Sac,
        ] {
            let cfg = ExperimentConfig::default_for(kind, vec![0, 1]);
            cfg.validate().unwrap_or_else(|e| panic!("{kind}: {e}"));
        }
    }

    #[test]
    fn empty_or_repeated_seeds_are_rejected() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Testfn, vec![]);
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![1, 1];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_roundtrip_and_parse() {
        let text = r#"
kind = "lqr-grad"
seeds = [0, 1, 2]

[lqr_grad]
sizes = [[2, 1]]
n_traj = [5]
actions_per_dim = [2, 4]
"#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::LqrGrad);
        let c = cfg.lqr_grad.unwrap();
        assert_eq!(c.sizes, vec![[2, 1]]);
        assert_eq!(c.n_traj, vec![5]);
        // defaulted fields fill in
        assert_eq!(c.system_seed, DEFAULT_SYSTEM_SEED);
        assert_eq!(c.estimators, EstimatorKind::ALL.to_vec());
    }

    #[test]
    fn missing_section_fails_validation() {
        let text = r#"
kind = "sac"
seeds = [0]
"#;
        // parse succeeds but validation demands the [sac] section...
        let parsed: std::result::Result<ExperimentConfig, _> = toml::from_str(text);
        let cfg = parsed.unwrap();
        assert!(cfg.validate().is_err());
    }
}
