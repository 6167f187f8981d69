use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{emit_config, EnvName, ExperimentConfig};
use super::curves::{CurveRow, CURVES_HEADER};
use crate::envs::{BipolarChain, Cartpole2Env, Cartpole4Env, CartpoleGrid, CartpoleParams, ChainSpec, Environment, ParallelChains, ParallelChainsSpec};
use crate::harness::{
    aggregate, compute_regret, evaluate_tabular, make_schedule, run_concurrent, EnsembleTeam, Oracle, RunMetrics, TabularTeam, Team,
    ValueTeam,
};
use crate::rng::{derive_seed, stream, tags};
use crate::seed_agents::{Cartpole4Features, OneHotFamily};
use crate::tabular::{Belief, ChainBelief, TabularPosterior};
use crate::{Error, Result};

pub const OUTPUT_ROOT_VAR: &str = "SEEDRL_OUTPUT_ROOT";

/// Result of one `(K, instance)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceOutcome {
    pub metrics: RunMetrics,
    /// Headline metric: `regret`, `eval_reward` or `total_reward`.
    pub metric: &'static str,
    pub value: f64,
    /// Step or time at which the headline metric is reported.
    pub at: f64,
}

/// Environment seed: shared by every `K` and every algorithm.
pub fn env_seed(cfg: &ExperimentConfig, instance: usize) -> u64 {
    derive_seed(cfg.master_seed, &[tags::ENV, instance as u64])
}

pub fn run_seed(cfg: &ExperimentConfig, n_agents: usize, instance: usize) -> u64 {
    derive_seed(cfg.master_seed, &[tags::INSTANCE, instance as u64, n_agents as u64])
}

fn execute<E: Environment, T: Team<E>>(env: &E, team: &mut T, cfg: &ExperimentConfig, k: usize, seed: u64) -> Result<RunMetrics> {
    let schedule = make_schedule(k, cfg.schedule_kind(), cfg.horizon(), &mut stream(seed, &[tags::SCHEDULE]))?;
    Ok(run_concurrent(env, team, &schedule, cfg.mode(), seed, cfg.curve_points)?.0)
}

fn chain_run<E, B>(env: &E, belief: B, cfg: &ExperimentConfig, k: usize, seed: u64) -> Result<RunMetrics>
where
    E: crate::envs::Tabulated<State = usize>,
    B: Belief,
{
    if let Some(tab) = cfg.tabular() {
        let mut team = TabularTeam::new(belief, tab, seed)?;
        return execute(env, &mut team, cfg, k, seed);
    }
    let kind = cfg.value_kind().ok_or_else(|| Error::Config(format!("{:?} cannot run on a chain", cfg.algorithm)))?;
    let mut team = ValueTeam::new(kind, OneHotFamily::for_env(env)?, cfg.buffer_capacity, seed)?;
    execute(env, &mut team, cfg, k, seed)
}

fn regret_outcome<E: Oracle>(metrics: RunMetrics, env: &E, cfg: &ExperimentConfig) -> Result<InstanceOutcome> {
    let budget = cfg.action_budget();
    let value = compute_regret(metrics.mean_reward(), env, budget)?;
    Ok(InstanceOutcome { metrics: RunMetrics { regret: Some(value), ..metrics }, metric: "regret", value, at: budget as f64 })
}

/// Builds instance `instance`'s environment and runs `K` agents on it.
pub fn run_instance(cfg: &ExperimentConfig, n_agents: usize, instance: usize) -> Result<InstanceOutcome> {
    let env_rng = &mut stream(env_seed(cfg, instance), &[tags::ENV]);
    let seed = run_seed(cfg, n_agents, instance);
    match cfg.env {
        EnvName::Bipolar => {
            let env = BipolarChain { spec: ChainSpec::sample(cfg.n_vertices, env_rng)? };
            let m = chain_run(&env, ChainBelief::bipolar(cfg.n_vertices)?, cfg, n_agents, seed)?;
            regret_outcome(m, &env, cfg)
        }
        EnvName::Parallel => {
            let env = ParallelChains { spec: ParallelChainsSpec::sample(cfg.n_chains, cfg.chain_length, cfg.sigma0_sq, env_rng)? };
            let belief = ChainBelief::parallel(cfg.n_chains, cfg.chain_length, cfg.sigma0_sq)?;
            let m = chain_run(&env, belief, cfg, n_agents, seed)?;
            regret_outcome(m, &env, cfg)
        }
        EnvName::Cartpole2 => {
            let env = Cartpole2Env::new(CartpoleParams::tabular(), CartpoleGrid::new(cfg.grid_phi, cfg.grid_phi_dot)?)?;
            let tab = cfg.tabular().ok_or_else(|| Error::Config(format!("{:?} cannot run on cartpole2", cfg.algorithm)))?;
            let post = TabularPosterior::new(env.grid.n_cells(), env.n_actions(), cfg.reward_noise_var)?;
            let mut team = TabularTeam::new(post, tab, seed)?;
            let m = execute(&env, &mut team, cfg, n_agents, seed)?;
            let eval = evaluate_tabular(&team.belief, &env, cfg.eval_steps())?;
            Ok(InstanceOutcome {
                metrics: RunMetrics { eval_reward: Some(eval.reward), ..m },
                metric: "eval_reward",
                value: eval.reward,
                at: cfg.eval_steps() as f64,
            })
        }
        EnvName::Cartpole4 => {
            let env = Cartpole4Env::new(CartpoleParams::continuous())?;
            let (ens, epsilon) = cfg.ensemble(n_agents).ok_or_else(|| Error::Config(format!("{:?} cannot run on cartpole4", cfg.algorithm)))?;
            let mut team = EnsembleTeam::new(ens, epsilon, n_agents, env.n_actions(), Cartpole4Features, cfg.buffer_capacity, seed)?;
            let m = execute(&env, &mut team, cfg, n_agents, seed)?;
            let value = m.total_reward();
            let at = m.curve.last().map_or(0.0, |c| c.0);
            Ok(InstanceOutcome { metrics: m, metric: "total_reward", value, at })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    #[serde(rename = "K")]
    pub n_agents: usize,
    pub instance: usize,
    pub env_seed: u64,
    pub run_seed: u64,
    pub seconds: f64,
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: String,
    pub instances: Vec<InstanceRecord>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub curves_path: PathBuf,
    pub manifest_path: PathBuf,
    pub lines: Vec<String>,
}

/// Output directory after applying the root override.
pub fn resolve_output_dir(cfg: &ExperimentConfig, root: Option<&Path>) -> PathBuf {
    match root {
        Some(r) if cfg.output_dir.is_relative() => r.join(&cfg.output_dir),
        _ => cfg.output_dir.clone(),
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Runs the sweep, writes `curves.csv` then `manifest.json` into `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let started = Instant::now();
    let mut curves = format!("{CURVES_HEADER}\n");
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for &k in &cfg.k_values {
        let mut values = Vec::new();
        let mut metric = "";
        for instance in 0..cfg.instances() {
            let t0 = Instant::now();
            let out = run_instance(cfg, k, instance)?;
            for &(time, value) in &out.metrics.curve {
                CurveRow { n_agents: k, instance, metric: "reward".into(), time_or_step: time, value }.write_to(&mut curves);
            }
            CurveRow { n_agents: k, instance, metric: out.metric.into(), time_or_step: out.at, value: out.value }.write_to(&mut curves);
            records.push(InstanceRecord {
                n_agents: k,
                instance,
                env_seed: env_seed(cfg, instance),
                run_seed: run_seed(cfg, k, instance),
                seconds: t0.elapsed().as_secs_f64(),
            });
            values.push(out.value);
            metric = out.metric;
        }
        let a = aggregate(&values);
        lines.push(format!("K={k} {metric} mean={:.4} se={:.4} n={}", a.mean, a.se, a.n));
    }
    let curves_path = out_dir.join("curves.csv");
    write_atomic(&curves_path, &curves)?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: emit_config(cfg)?,
        instances: records,
        total_seconds: started.elapsed().as_secs_f64(),
    };
    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&manifest_path, &json)?;
    Ok(ExperimentReport { curves_path, manifest_path, lines })
}
