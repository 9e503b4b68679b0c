//! Multi-seed experiment runner: schedules (cell × seed) tasks across a
//! worker pool, then writes raw CSV, seed-aggregated CSV, and a JSON run
//! manifest.
//!
//! Determinism contract: every cell derives its generator from
//! `(seed, content hash of the cell parameters)` only, so a cell's result
//! does not depend on which other cells ran, on scheduling, or on the
//! grid it is embedded in; rerunning an identical config reproduces the
//! raw CSV byte for byte.

use crate::algos::{
    lqr_train, optimize_test_function, sac_train, test_function, tree_mvd_pg,
};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::harness::config::{
    lqr_train_learning_rate, ExperimentConfig, ExperimentKind,
};
use crate::harness::metrics::{mean_and_ci95, GradReport};
use crate::lqr::{lqr_policy_gradient, make_lqr, LinearGaussianPolicy, LqrOracle, LqrSystem,
    NoisyQConfig, QSource, LQR_POLICY_SIGMA};
use crate::rng::SeededRng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

pub const CSV_SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Stable content hash for cell tags: combines values with SplitMix64.
fn tag(parts: &[u64]) -> u64 {
    let mut acc = 0x243f6a8885a308d3u64; // arbitrary fixed offset
    for &p in parts {
        acc = splitmix(acc ^ splitmix(p));
    }
    acc
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn cell_rng(seed: u64, parts: &[u64]) -> SeededRng {
    SeededRng::new(seed).split(tag(parts))
}

fn header(kind: &str, columns: &str) -> String {
    format!("# mcgrad csv {CSV_SCHEMA_VERSION} {kind}\n{columns}\n")
}

/// Render all output files for a config as `(file name, content)` pairs,
/// without touching the filesystem.
pub fn render_experiment(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Testfn => render_testfn(cfg),
        ExperimentKind::LqrGrad => render_lqr_grad(cfg),
        ExperimentKind::LqrNoise => render_lqr_noise(cfg),
        ExperimentKind::LqrTrain => render_lqr_train(cfg),
        ExperimentKind::TreePg => render_tree_pg(cfg),
        ExperimentKind::Sac => render_sac(cfg),
    }
}

/// Run a validated experiment config: renders all files, writes them to
/// the resolved output directory, and adds a JSON manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let start = Instant::now();
    let out_dir = resolve_out_dir(cfg);
    let rendered = render_experiment(cfg)?;
    std::fs::create_dir_all(&out_dir)?;
    let mut files = Vec::new();
    for (name, content) in &rendered {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        files.push(path);
    }
    let manifest = manifest_json(cfg, &rendered, start.elapsed().as_secs_f64())?;
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(&manifest_path, manifest)?;
    files.push(manifest_path);
    Ok(RunArtifacts { out_dir, files })
}

fn resolve_out_dir(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = &cfg.out_dir {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("MCGRAD_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir).join(cfg.kind.name());
        }
    }
    PathBuf::from("out").join(cfg.kind.name())
}

fn manifest_json(
    cfg: &ExperimentConfig,
    files: &[(String, String)],
    wall_seconds: f64,
) -> Result<String> {
    let git_revision = std::process::Command::new("git")
        .args(["rev-parse", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string());
    let manifest = serde_json::json!({
        "tool": "mcgrad",
        "version": env!("CARGO_PKG_VERSION"),
        "kind": cfg.kind.name(),
        "seeds": cfg.seeds,
        "config": cfg,
        "git_revision": git_revision,
        "wall_seconds": wall_seconds,
        "files": files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))
}

/// Aggregate rows grouped by a key; values are (mean, ci95, n) per
/// column. Group members are sorted by seed before summation so the
/// result is invariant to the order seeds were listed in.
fn aggregate<K: Ord + Clone>(
    rows: &[(K, u64, Vec<f64>)],
) -> BTreeMap<K, Vec<(f64, f64, usize)>> {
    let mut grouped: BTreeMap<K, Vec<(u64, Vec<f64>)>> = BTreeMap::new();
    for (key, seed, values) in rows {
        grouped
            .entry(key.clone())
            .or_default()
            .push((*seed, values.clone()));
    }
    grouped
        .into_iter()
        .map(|(key, mut group)| {
            group.sort_by_key(|(seed, _)| *seed);
            let n_cols = group[0].1.len();
            let mut out = Vec::with_capacity(n_cols);
            for c in 0..n_cols {
                let column: Vec<f64> = group.iter().map(|(_, v)| v[c]).collect();
                let (mean, ci) = mean_and_ci95(&column);
                out.push((mean, ci, column.len()));
            }
            (key, out)
        })
        .collect()
}

// ---- testfn ----

fn render_testfn(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    let c = cfg.testfn.as_ref().expect("validated");
    let mut tasks = Vec::new();
    for &function in &c.functions {
        for &estimator in &c.estimators {
            for &seed in &cfg.seeds {
                tasks.push((function, estimator, seed));
            }
        }
    }
    let results: Vec<Result<String>> = tasks
        .par_iter()
        .map(|&(function, estimator, seed)| {
            let f = test_function(function);
            let mut rng = cell_rng(seed, &[1, function as u64, estimator as u64]);
            let trace = optimize_test_function(&f, estimator, &c.options, &mut rng)?;
            let mut out = String::new();
            for p in &trace {
                let dist = f.distance_to_nearest_maximizer(&p.mu);
                out.push_str(&format!(
                    "{seed},{function},{estimator},{},{},{},{},{},{},{}\n",
                    p.iteration, p.mu[0], p.mu[1], p.sigma[0], p.sigma[1], p.f_mean, dist
                ));
            }
            Ok(out)
        })
        .collect();

    let mut raw = header(
        "testfn",
        "seed,function,estimator,iteration,mu0,mu1,sigma0,sigma1,f_mean,dist_to_max",
    );
    let mut agg_rows: Vec<((String, String, usize), u64, Vec<f64>)> = Vec::new();
    for (task, res) in tasks.iter().zip(results) {
        let block = res?;
        raw.push_str(&block);
        for line in block.lines() {
            let fields: Vec<&str> = line.split(',').collect();
            let iteration: usize = fields[3].parse().unwrap();
            agg_rows.push((
                (task.0.to_string(), task.1.to_string(), iteration),
                task.2,
                vec![
                    fields[8].parse().unwrap(),
                    fields[9].parse().unwrap(),
                ],
            ));
        }
    }
    let mut agg = header(
        "testfn-agg",
        "function,estimator,iteration,mean_f,ci95_f,mean_dist,ci95_dist,n_seeds",
    );
    for ((function, estimator, iteration), cols) in aggregate(&agg_rows) {
        agg.push_str(&format!(
            "{function},{estimator},{iteration},{},{},{},{},{}\n",
            cols[0].0, cols[0].1, cols[1].0, cols[1].1, cols[0].2
        ));
    }
    Ok(vec![
        ("raw_testfn.csv".into(), raw),
        ("agg_testfn.csv".into(), agg),
    ])
}

// ---- lqr shared ----

fn build_system(size: [usize; 2], system_seed: u64) -> Result<(LqrSystem, LqrOracle, LinearGaussianPolicy)> {
    let (sys, k_init) = make_lqr(size[0], size[1], system_seed)?;
    let pol = LinearGaussianPolicy::new(k_init, LQR_POLICY_SIGMA);
    let oracle = LqrOracle::new(&sys, &pol)?;
    Ok((sys, oracle, pol))
}

fn grad_report_files(
    prefix: &str,
    per_size: Vec<([usize; 2], Vec<GradReport>)>,
) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for (size, reports) in per_size {
        let label = format!("{}x{}", size[0], size[1]);
        let mut raw = header(&format!("{prefix}-{label}"), GradReport::CSV_HEADER);
        for r in &reports {
            raw.push_str(&r.csv_row());
            raw.push('\n');
        }
        let agg_rows: Vec<((String, usize, usize, String, String), u64, Vec<f64>)> = reports
            .iter()
            .map(|r| {
                (
                    (
                        r.estimator.to_string(),
                        r.n_traj,
                        r.n_actions,
                        format!("{}", r.alpha),
                        format!("{}", r.freq),
                    ),
                    r.seed,
                    vec![r.rel_abs_error, r.cosine_distance],
                )
            })
            .collect();
        let mut agg = header(
            &format!("{prefix}-{label}-agg"),
            "estimator,n_traj,n_actions,alpha,freq,mean_rel_abs_error,ci95_rel_abs_error,mean_cosine_distance,ci95_cosine_distance,n_seeds",
        );
        for ((estimator, n_traj, n_actions, alpha, freq), cols) in aggregate(&agg_rows) {
            agg.push_str(&format!(
                "{estimator},{n_traj},{n_actions},{alpha},{freq},{},{},{},{},{}\n",
                cols[0].0, cols[0].1, cols[1].0, cols[1].1, cols[0].2
            ));
        }
        files.push((format!("raw_{prefix}_{label}.csv"), raw));
        files.push((format!("agg_{prefix}_{label}.csv"), agg));
    }
    files
}

fn render_lqr_grad(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    let c = cfg.lqr_grad.as_ref().expect("validated");
    let mut per_size = Vec::new();
    for &size in &c.sizes {
        let (sys, oracle, pol) = build_system(size, c.system_seed)?;
        let mut tasks = Vec::new();
        for &estimator in &c.estimators {
            for &n_traj in &c.n_traj {
                for &mult in &c.actions_per_dim {
                    for &seed in &cfg.seeds {
                        tasks.push((estimator, n_traj, mult, seed));
                    }
                }
            }
        }
        let reports: Vec<Result<GradReport>> = tasks
            .par_iter()
            .map(|&(estimator, n_traj, mult, seed)| {
                let n_actions = mult * sys.n_actions();
                let mut rng = cell_rng(
                    seed,
                    &[2, size[0] as u64, size[1] as u64, estimator as u64, n_traj as u64, n_actions as u64],
                );
                let est = lqr_policy_gradient(
                    &sys,
                    &pol,
                    &oracle,
                    estimator,
                    n_traj,
                    n_actions,
                    &QSource::True,
                    &mut rng,
                )?;
                Ok(GradReport {
                    seed,
                    estimator,
                    n_traj,
                    n_actions,
                    alpha: 0.0,
                    freq: 0.0,
                    rel_abs_error: est.rel_abs_error,
                    cosine_distance: est.cosine_distance,
                })
            })
            .collect();
        per_size.push((size, reports.into_iter().collect::<Result<Vec<_>>>()?));
    }
    Ok(grad_report_files("lqr-grad", per_size))
}

fn render_lqr_noise(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    let c = cfg.lqr_noise.as_ref().expect("validated");
    let mut per_size = Vec::new();
    for &size in &c.sizes {
        let (sys, oracle, pol) = build_system(size, c.system_seed)?;
        let mut tasks = Vec::new();
        for &estimator in &c.estimators {
            for &alpha in &c.alphas {
                for &freq in &c.freqs {
                    for &seed in &cfg.seeds {
                        tasks.push((estimator, alpha, freq, seed));
                    }
                }
            }
        }
        let reports: Vec<Result<GradReport>> = tasks
            .par_iter()
            .map(|&(estimator, alpha, freq, seed)| {
                let n_actions = c.actions_per_dim * sys.n_actions();
                let mut rng = cell_rng(
                    seed,
                    &[
                        3,
                        size[0] as u64,
                        size[1] as u64,
                        estimator as u64,
                        alpha.to_bits(),
                        freq.to_bits(),
                    ],
                );
                let noise = NoisyQConfig::random(alpha, freq, sys.n_actions(), &mut rng)?;
                let est = lqr_policy_gradient(
                    &sys,
                    &pol,
                    &oracle,
                    estimator,
                    c.n_traj,
                    n_actions,
                    &QSource::Noisy(noise),
                    &mut rng,
                )?;
                Ok(GradReport {
                    seed,
                    estimator,
                    n_traj: c.n_traj,
                    n_actions,
                    alpha,
                    freq,
                    rel_abs_error: est.rel_abs_error,
                    cosine_distance: est.cosine_distance,
                })
            })
            .collect();
        per_size.push((size, reports.into_iter().collect::<Result<Vec<_>>>()?));
    }
    Ok(grad_report_files("lqr-noise", per_size))
}

fn render_lqr_train(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    let c = cfg.lqr_train.as_ref().expect("validated");
    let mut files = Vec::new();
    for &size in &c.sizes {
        let (sys, _oracle, pol) = build_system(size, c.system_seed)?;
        let lr = c
            .learning_rate
            .unwrap_or_else(|| lqr_train_learning_rate(size[0], size[1]));
        let mut tasks = Vec::new();
        for &estimator in &c.estimators {
            for &seed in &cfg.seeds {
                tasks.push((estimator, seed));
            }
        }
        let runs: Vec<Result<(EstimatorKind, u64, crate::algos::LqrTrainResult)>> = tasks
            .par_iter()
            .map(|&(estimator, seed)| {
                let mut rng = cell_rng(
                    seed,
                    &[
                        4,
                        size[0] as u64,
                        size[1] as u64,
                        estimator as u64,
                        c.alpha.to_bits(),
                        c.freq.to_bits(),
                    ],
                );
                let q_source = if c.alpha > 0.0 {
                    QSource::Noisy(NoisyQConfig::random(c.alpha, c.freq, size[1], &mut rng)?)
                } else {
                    QSource::True
                };
                let res = lqr_train(&sys, &pol.k, estimator, &q_source, c.iterations, lr, &mut rng)?;
                Ok((estimator, seed, res))
            })
            .collect();

        let label = format!("{}x{}", size[0], size[1]);
        let mut raw = header(
            &format!("lqr-train-{label}"),
            "seed,estimator,iteration,env_steps,j,destabilized",
        );
        let mut agg_rows: Vec<((String, usize), u64, Vec<f64>)> = Vec::new();
        for res in runs {
            let (estimator, seed, r) = res?;
            for (i, &(steps, j)) in r.curve.iter().enumerate() {
                raw.push_str(&format!(
                    "{seed},{estimator},{i},{steps},{j},{}\n",
                    u8::from(r.destabilized)
                ));
                agg_rows.push(((estimator.to_string(), i), seed, vec![j]));
            }
        }
        let mut agg = header(
            &format!("lqr-train-{label}-agg"),
            "estimator,iteration,mean_j,ci95_j,n_seeds",
        );
        for ((estimator, iteration), cols) in aggregate(&agg_rows) {
            agg.push_str(&format!(
                "{estimator},{iteration},{},{},{}\n",
                cols[0].0, cols[0].1, cols[0].2
            ));
        }
        files.push((format!("raw_lqr-train_{label}.csv"), raw));
        files.push((format!("agg_lqr-train_{label}.csv"), agg));
    }
    Ok(files)
}

fn render_tree_pg(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    let c = cfg.tree_pg.as_ref().expect("validated");
    let runs: Vec<Result<(u64, Vec<crate::algos::EpochStat>)>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let mut env = c.env.build();
            let stats = tree_mvd_pg(env.as_mut(), &c.train, seed)?;
            Ok((seed, stats))
        })
        .collect();
    let mut raw = header(
        &format!("tree-pg-{}", c.env.name()),
        "seed,env,epoch,env_steps,mean_eval_reward,goal_rate",
    );
    let mut agg_rows: Vec<(usize, u64, Vec<f64>)> = Vec::new();
    for res in runs {
        let (seed, stats) = res?;
        for s in &stats {
            raw.push_str(&format!(
                "{seed},{},{},{},{},{}\n",
                c.env.name(),
                s.epoch,
                s.env_steps,
                s.mean_eval_reward,
                s.goal_rate
            ));
            agg_rows.push((s.epoch, seed, vec![s.mean_eval_reward, s.goal_rate]));
        }
    }
    let mut agg = header(
        &format!("tree-pg-{}-agg", c.env.name()),
        "epoch,mean_eval_reward,ci95_eval_reward,mean_goal_rate,ci95_goal_rate,n_seeds",
    );
    for (epoch, cols) in aggregate(&agg_rows) {
        agg.push_str(&format!(
            "{epoch},{},{},{},{},{}\n",
            cols[0].0, cols[0].1, cols[1].0, cols[1].1, cols[0].2
        ));
    }
    let env_name = c.env.name();
    Ok(vec![
        (format!("raw_tree-pg_{env_name}.csv"), raw),
        (format!("agg_tree-pg_{env_name}.csv"), agg),
    ])
}

fn render_sac(cfg: &ExperimentConfig) -> Result<Vec<(String, String)>> {
    let c = cfg.sac.as_ref().expect("validated");
    let mut tasks = Vec::new();
    for &variant in &c.variants {
        for &seed in &cfg.seeds {
            tasks.push((variant, seed));
        }
    }
    let runs: Vec<Result<(crate::algos::SacVariant, u64, Vec<crate::algos::SacEpochStat>)>> =
        tasks
            .par_iter()
            .map(|&(variant, seed)| {
                let make_env = || c.env.build();
                let stats = sac_train(&make_env, variant, &c.train, seed)?;
                Ok((variant, seed, stats))
            })
            .collect();
    let mut raw = header(
        &format!("sac-{}", c.env.name()),
        "seed,variant,epoch,env_steps,mean_eval_reward,mean_critic_loss,n_updates",
    );
    let mut agg_rows: Vec<((String, usize), u64, Vec<f64>)> = Vec::new();
    for res in runs {
        let (variant, seed, stats) = res?;
        for s in &stats {
            raw.push_str(&format!(
                "{seed},{variant},{},{},{},{},{}\n",
                s.epoch, s.env_steps, s.mean_eval_reward, s.mean_critic_loss, s.n_updates
            ));
            agg_rows.push(((variant.to_string(), s.epoch), seed, vec![s.mean_eval_reward]));
        }
    }
    let mut agg = header(
        &format!("sac-{}-agg", c.env.name()),
        "variant,epoch,mean_eval_reward,ci95_eval_reward,n_seeds",
    );
    for ((variant, epoch), cols) in aggregate(&agg_rows) {
        agg.push_str(&format!(
            "{variant},{epoch},{},{},{}\n",
            cols[0].0, cols[0].1, cols[0].2
        ));
    }
    let env_name = c.env.name();
    Ok(vec![
        (format!("raw_sac_{env_name}.csv"), raw),
        (format!("agg_sac_{env_name}.csv"), agg),
    ])
}
