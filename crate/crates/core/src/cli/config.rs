use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::harness::{Mode, ScheduleHorizon, ScheduleKind, TabularConfig, TabularKind, ValueKind};
use crate::seed_agents::{EnsembleConfig, Optimizer, SeedLsviConfig, SeedTdConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    Bipolar,
    Parallel,
    Cartpole2,
    Cartpole4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Psrl,
    Ucrl,
    ThompsonResample,
    SeedTabular,
    SeedLsvi,
    SeedTd,
    SeedEnsemble,
    EpsGreedyDqn,
}

impl Algorithm {
    pub fn tabular_kind(self) -> Option<TabularKind> {
        match self {
            Algorithm::Psrl => Some(TabularKind::Psrl),
            Algorithm::Ucrl => Some(TabularKind::Ucrl),
            Algorithm::ThompsonResample => Some(TabularKind::ThompsonResample),
            Algorithm::SeedTabular => Some(TabularKind::SeedSampling),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Synchronous,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Single,
    Parallel,
}

/// One experiment. Optional fields take environment-dependent defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvName,
    pub algorithm: Algorithm,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_instances: Option<usize>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleName>,
    #[serde(default = "one")]
    pub rate: f64,
    /// Action budget per agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<usize>,
    /// Wall-clock budget; replaces `actions` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    #[serde(default = "default_mode")]
    pub mode: ModeName,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,

    #[serde(default = "default_n_vertices")]
    pub n_vertices: usize,
    #[serde(default = "default_n_chains")]
    pub n_chains: usize,
    #[serde(default = "default_chain_length")]
    pub chain_length: usize,
    #[serde(default = "default_sigma0_sq")]
    pub sigma0_sq: f64,
    #[serde(default = "default_grid")]
    pub grid_phi: usize,
    #[serde(default = "default_grid")]
    pub grid_phi_dot: usize,

    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub reward_noise_var: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_horizon: Option<usize>,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsvi_horizon: Option<usize>,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minibatch: Option<usize>,
    #[serde(default = "default_optimizer")]
    pub optimizer: Optimizer,

    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_models: Option<usize>,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "one_usize")]
    pub steps_per_action: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_k_values() -> Vec<usize> {
    vec![1, 10, 100]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_mode() -> ModeName {
    ModeName::Single
}
fn default_max_batch() -> usize {
    64
}
fn default_curve_points() -> usize {
    20
}
fn default_n_vertices() -> usize {
    50
}
fn default_n_chains() -> usize {
    4
}
fn default_chain_length() -> usize {
    4
}
fn default_sigma0_sq() -> f64 {
    100.0
}
fn default_grid() -> usize {
    20
}
fn default_delta() -> f64 {
    crate::tabular::DEFAULT_DELTA
}
fn default_discount() -> f64 {
    0.99
}
fn default_optimizer() -> Optimizer {
    Optimizer::Adam
}
fn default_hidden() -> Vec<usize> {
    vec![50, 50]
}

impl ExperimentConfig {
    /// Every optional field at its default.
    pub fn minimal(env: EnvName, algorithm: Algorithm) -> Self {
        Self {
            env,
            algorithm,
            k_values: default_k_values(),
            n_instances: None,
            master_seed: 0,
            output_dir: default_output_dir(),
            schedule: None,
            rate: 1.0,
            actions: None,
            time_limit: None,
            mode: default_mode(),
            max_batch: default_max_batch(),
            curve_points: default_curve_points(),
            n_vertices: default_n_vertices(),
            n_chains: default_n_chains(),
            chain_length: default_chain_length(),
            sigma0_sq: default_sigma0_sq(),
            grid_phi: default_grid(),
            grid_phi_dot: default_grid(),
            delta: default_delta(),
            reward_noise_var: 1.0,
            plan_horizon: None,
            eval_horizon: None,
            noise_var: None,
            prior_var: None,
            lsvi_horizon: None,
            discount: default_discount(),
            learning_rate: None,
            sgd_iters: None,
            minibatch: None,
            optimizer: default_optimizer(),
            n_models: None,
            hidden: default_hidden(),
            prior_scale: None,
            epsilon: None,
            steps_per_action: 1,
            buffer_capacity: None,
        }
    }

    fn is_chain(&self) -> bool {
        matches!(self.env, EnvName::Bipolar | EnvName::Parallel)
    }

    pub fn instances(&self) -> usize {
        self.n_instances.unwrap_or(if self.is_chain() { 100 } else { 10 })
    }

    pub fn schedule_kind(&self) -> ScheduleKind {
        let name = self.schedule.unwrap_or(match self.env {
            EnvName::Cartpole4 => ScheduleName::Synchronous,
            _ => ScheduleName::Poisson,
        });
        match name {
            ScheduleName::Synchronous => ScheduleKind::Synchronous,
            ScheduleName::Poisson => ScheduleKind::Poisson { rate: self.rate },
        }
    }

    pub fn horizon(&self) -> ScheduleHorizon {
        if let Some(t) = self.time_limit {
            return ScheduleHorizon::Time(t);
        }
        if let Some(h) = self.actions {
            return ScheduleHorizon::Actions(h);
        }
        match self.env {
            EnvName::Bipolar => ScheduleHorizon::Actions(2 * self.n_vertices),
            EnvName::Parallel => ScheduleHorizon::Actions(self.chain_length),
            EnvName::Cartpole2 => ScheduleHorizon::Time(1000.0),
            EnvName::Cartpole4 => ScheduleHorizon::Actions(3000),
        }
    }

    /// Action budget used for planning and for the regret oracle.
    pub fn action_budget(&self) -> usize {
        match self.horizon() {
            ScheduleHorizon::Actions(h) => h,
            ScheduleHorizon::Time(t) => (t * self.rate).ceil().max(1.0) as usize,
        }
    }

    pub fn mode(&self) -> Mode {
        match self.mode {
            ModeName::Single => Mode::Single,
            ModeName::Parallel => Mode::Parallel { max_batch: self.max_batch },
        }
    }

    pub fn eval_steps(&self) -> usize {
        self.eval_horizon.unwrap_or(1000)
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var.unwrap_or(match (self.algorithm, self.env) {
            (Algorithm::EpsGreedyDqn, _) => 0.0,
            (_, EnvName::Bipolar) => 0.001,
            _ => 0.01,
        })
    }

    pub fn prior_var(&self) -> f64 {
        self.prior_var.unwrap_or(match self.env {
            EnvName::Bipolar => 0.01,
            EnvName::Parallel => self.sigma0_sq,
            _ => 1.0,
        })
    }

    pub fn tabular(&self) -> Option<TabularConfig> {
        let plan_horizon = self.plan_horizon.or(match self.env {
            EnvName::Cartpole2 => Some(20),
            _ => None,
        });
        self.algorithm.tabular_kind().map(|kind| TabularConfig { kind, plan_horizon, delta: self.delta })
    }

    pub fn value_kind(&self) -> Option<ValueKind> {
        match self.algorithm {
            Algorithm::SeedLsvi => Some(ValueKind::Lsvi(SeedLsviConfig {
                planning_horizon: self.lsvi_horizon.unwrap_or(self.action_budget()),
                noise_var: self.noise_var(),
                prior_var: self.prior_var(),
            })),
            Algorithm::SeedTd => Some(ValueKind::Td(SeedTdConfig {
                sgd_iters: self.sgd_iters.unwrap_or(200),
                learning_rate: self.learning_rate.unwrap_or(if self.env == EnvName::Bipolar { 0.01 } else { 1.0 }),
                discount: self.discount,
                minibatch_size: self.minibatch,
                noise_var: self.noise_var(),
                prior_var: self.prior_var(),
                optimizer: self.optimizer,
            })),
            _ => None,
        }
    }

    /// Ensemble settings for `k` agents; the DQN baseline is a single
    /// unperturbed model without a prior network.
    pub fn ensemble(&self, k: usize) -> Option<(EnsembleConfig, f64)> {
        let dqn = match self.algorithm {
            Algorithm::SeedEnsemble => false,
            Algorithm::EpsGreedyDqn => true,
            _ => return None,
        };
        let cfg = EnsembleConfig {
            n_models: if dqn { 1 } else { self.n_models.unwrap_or(k.min(30)) },
            hidden: self.hidden.clone(),
            prior_scale: if dqn { 0.0 } else { self.prior_scale.unwrap_or(3.0) },
            noise_var: if dqn { 0.0 } else { self.noise_var() },
            discount: self.discount,
            learning_rate: self.learning_rate.unwrap_or(1e-3),
            minibatch_size: self.minibatch.unwrap_or(16),
            steps_per_action: self.steps_per_action,
        };
        let epsilon = self.epsilon.unwrap_or(if dqn { 0.1 } else { 0.0 });
        Some((cfg, epsilon))
    }

    /// Rejects inconsistent settings before anything runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return bad("k_values must be a nonempty list of positive counts".into());
        }
        if self.instances() == 0 {
            return bad("n_instances must be at least 1".into());
        }
        if self.time_limit.is_some() && self.actions.is_some() {
            return bad("set at most one of actions and time_limit".into());
        }
        if self.curve_points == 0 || self.max_batch == 0 {
            return bad("curve_points and max_batch must be positive".into());
        }
        let compatible = match self.algorithm {
            Algorithm::Psrl | Algorithm::Ucrl | Algorithm::ThompsonResample | Algorithm::SeedTabular => {
                self.env != EnvName::Cartpole4
            }
            Algorithm::SeedLsvi | Algorithm::SeedTd => self.is_chain(),
            Algorithm::SeedEnsemble | Algorithm::EpsGreedyDqn => self.env == EnvName::Cartpole4,
        };
        if !compatible {
            return bad(format!("algorithm {:?} does not run on env {:?}", self.algorithm, self.env));
        }
        if let Some(t) = self.tabular() {
            if !(t.delta > 0.0 && t.delta < 1.0) || t.plan_horizon == Some(0) {
                return bad("delta must lie in (0, 1) and plan_horizon must be positive".into());
            }
        }
        match self.value_kind() {
            Some(ValueKind::Lsvi(c)) => c.validate()?,
            Some(ValueKind::Td(c)) => c.validate()?,
            None => {}
        }
        for &k in &self.k_values {
            if let Some((c, eps)) = self.ensemble(k) {
                c.validate()?;
                if !(0.0..=1.0).contains(&eps) {
                    return bad(format!("epsilon must lie in [0, 1], got {eps}"));
                }
            }
        }
        if self.buffer_capacity == Some(0) {
            return bad("buffer_capacity must be positive".into());
        }
        Ok(())
    }
}

/// Parses and validates a TOML document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn emit_config(cfg: &ExperimentConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_defaulted() {
        let cfg = parse_config("env = \"bipolar\"\nalgorithm = \"seed_lsvi\"\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::minimal(EnvName::Bipolar, Algorithm::SeedLsvi));
        assert_eq!(cfg.instances(), 100);
        assert_eq!(cfg.horizon(), ScheduleHorizon::Actions(100));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("env = \"bipolar\"\nalgorithm = \"psrl\"\nfoo = 1\n").unwrap_err();
        assert!(err.to_string().contains("foo"), "{err}");
    }

    #[test]
    fn bad_names_and_types_are_rejected() {
        assert!(parse_config("env = \"maze\"\nalgorithm = \"psrl\"\n").is_err());
        assert!(parse_config("env = \"bipolar\"\nalgorithm = \"sarsa\"\n").is_err());
        assert!(parse_config("env = \"bipolar\"\nalgorithm = \"psrl\"\nk_values = \"ten\"\n").is_err());
        assert!(parse_config("algorithm = \"psrl\"\n").is_err());
        assert!(parse_config("env = \"cartpole4\"\nalgorithm = \"seed_lsvi\"\n").is_err());
    }

    #[test]
    fn round_trip() {
        let mut cfg = ExperimentConfig::minimal(EnvName::Cartpole4, Algorithm::EpsGreedyDqn);
        cfg.k_values = vec![30];
        cfg.learning_rate = Some(0.0005);
        cfg.time_limit = Some(12.5);
        cfg.hidden = vec![8, 4];
        cfg.master_seed = u64::MAX >> 1;
        let text = emit_config(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn dqn_preset() {
        let cfg = ExperimentConfig::minimal(EnvName::Cartpole4, Algorithm::EpsGreedyDqn);
        let (e, eps) = cfg.ensemble(100).unwrap();
        assert_eq!((e.n_models, e.prior_scale, e.noise_var, eps), (1, 0.0, 0.0, 0.1));
        let seed = ExperimentConfig::minimal(EnvName::Cartpole4, Algorithm::SeedEnsemble);
        assert_eq!(seed.ensemble(100).unwrap().0.n_models, 30);
        assert_eq!(seed.ensemble(4).unwrap().0.n_models, 4);
    }
}
