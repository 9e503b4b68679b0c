//! Command-line entry point: one subcommand per experiment family, a
//! shared config/seed/output interface, and CSV + manifest artifacts.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use mcgrad::harness::config::{EnvName, ExperimentConfig, ExperimentKind};
use mcgrad::harness::runner::run_experiment;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "mcgrad",
    version,
    about = "Monte Carlo gradient estimator experiments: test functions, LQR oracles, tree-critic policy gradients, and SAC"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed count ("25" runs seed-base..seed-base+25) or explicit comma
    /// list ("0,3,17"). Overrides the config file's seed list.
    #[arg(long, global = true)]
    seeds: Option<String>,

    /// Base offset applied when --seeds is a count.
    #[arg(long, global = true, default_value_t = 0)]
    seed_base: u64,

    /// Output directory (default: $MCGRAD_OUT_DIR/<kind> or ./out/<kind>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// TOML experiment config; defaults are built in per subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for the experiment sweep (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the 2-D test functions with each estimator.
    Testfn,
    /// Gradient error vs. trajectory/action budget on LQR systems.
    LqrGrad,
    /// Gradient error under the sinusoidal critic-error model.
    LqrNoise,
    /// Train LQR gains with each estimator.
    LqrTrain {
        /// Critic error amplitude (0 = true Q).
        #[arg(long)]
        alpha: Option<f64>,
        /// Critic error frequency.
        #[arg(long)]
        freq: Option<f64>,
    },
    /// Tree-critic on-policy policy gradient.
    TreePg {
        /// corridor | room | pendulum
        #[arg(long)]
        env: Option<String>,
    },
    /// Soft actor-critic on Pendulum.
    Sac {
        /// Comma list of variants (rep,mvd,sf,rep-extra,sf-extra).
        #[arg(long)]
        variants: Option<String>,
    },
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Testfn => ExperimentKind::Testfn,
            Command::LqrGrad => ExperimentKind::LqrGrad,
            Command::LqrNoise => ExperimentKind::LqrNoise,
            Command::LqrTrain { .. } => ExperimentKind::LqrTrain,
            Command::TreePg { .. } => ExperimentKind::TreePg,
            Command::Sac { .. } => ExperimentKind::Sac,
        }
    }
}

fn parse_seeds(spec: &str, base: u64) -> anyhow::Result<Vec<u64>> {
    if spec.contains(',') {
        spec.split(',')
            .map(|t| t.trim().parse::<u64>().context("bad seed list entry"))
            .collect()
    } else {
        let count: u64 = spec.parse().context("seeds must be a count or comma list")?;
        if count == 0 {
            bail!("seed count must be positive");
        }
        Ok((base..base + count).collect())
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let kind = cli.command.kind();

    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_file(path)
                .with_context(|| format!("loading {}", path.display()))?;
            if cfg.kind != kind {
                bail!(
                    "config file is for '{}' but the subcommand is '{}'",
                    cfg.kind,
                    kind
                );
            }
            cfg
        }
        None => ExperimentConfig::default_for(kind, (0..5).collect()),
    };

    if let Some(spec) = &cli.seeds {
        cfg.seeds = parse_seeds(spec, cli.seed_base)?;
    } else if cli.seed_base != 0 {
        cfg.seeds = cfg.seeds.iter().map(|s| s + cli.seed_base).collect();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }

    match &cli.command {
        Command::LqrTrain { alpha, freq } => {
            let section = cfg.lqr_train.get_or_insert_with(Default::default);
            if let Some(a) = alpha {
                section.alpha = *a;
            }
            if let Some(f) = freq {
                section.freq = *f;
            }
        }
        Command::TreePg { env: Some(name) } => {
            let section = cfg.tree_pg.get_or_insert_with(Default::default);
            section.env = name.parse::<EnvName>()?;
        }
        Command::Sac {
            variants: Some(list),
        } => {
            let section = cfg.sac.get_or_insert_with(Default::default);
            section.variants = list
                .split(',')
                .map(|v| v.trim().parse())
                .collect::<mcgrad::Result<Vec<_>>>()?;
        }
        _ => {}
    }

    if let Some(threads) = cli.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring worker pool")?;
    }

    cfg.validate().context("invalid experiment config")?;
    let artifacts = run_experiment(&cfg)?;
    eprintln!("wrote {} files to {}", artifacts.files.len(), artifacts.out_dir.display());
    for f in &artifacts.files {
        println!("{}", f.display());
    }
    Ok(())
}
