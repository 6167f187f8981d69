use rand::Rng;
use serde::{Deserialize, Serialize};

use super::buffer::BufferState;
use super::family::OneHotFamily;
use super::lsvi::OneHotStats;
use super::seed::AgentSeed;
use crate::rvf::{AdamState, RegConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedTdConfig {
    /// Gradient iterations per action (`N`).
    pub sgd_iters: usize,
    pub learning_rate: f64,
    pub discount: f64,
    /// `None` uses the whole buffer for every gradient.
    pub minibatch_size: Option<usize>,
    pub noise_var: f64,
    pub prior_var: f64,
    pub optimizer: Optimizer,
}

impl SeedTdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sgd_iters == 0 {
            return Err(Error::InvalidParameter("seed TD needs at least one iteration".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidParameter(format!("discount must lie in [0, 1), got {}", self.discount)));
        }
        if self.minibatch_size == Some(0) {
            return Err(Error::InvalidParameter("minibatch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidParameter("learning rate must be non-negative".into()));
        }
        RegConfig { noise_var: self.noise_var, prior_var: self.prior_var, anchor: vec![] }.validate()
    }
}

/// An agent's current parameters and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct TdState {
    pub theta: Vec<f64>,
    pub adam: AdamState,
}

impl TdState {
    pub fn new(theta: Vec<f64>, learning_rate: f64) -> Self {
        let adam = AdamState::new(theta.len(), learning_rate);
        Self { theta, adam }
    }
}

/// `N` gradient iterations on
/// `L(θ) = (1/v) Σ_j (r_j + γ max_a Q(s'_j, a; θ̃_{n-1}) + z_j − Q(s_j, a_j; θ))² + (1/λ)‖θ − θ̂‖²`
/// starting from the agent's current parameters. The full-buffer gradient uses
/// `stats` (synced here); the minibatch variant draws indices with `rng` and
/// rescales to the buffer size.
pub fn seed_td_update<R: Rng + ?Sized>(
    td: &mut TdState,
    buf: &BufferState<usize>,
    stats: &mut OneHotStats,
    seed: &AgentSeed,
    family: &OneHotFamily,
    cfg: &SeedTdConfig,
    rng: &mut R,
) -> Result<()> {
    cfg.validate()?;
    let d = family.dim();
    if td.theta.len() != d || seed.theta_hat.len() != d {
        return Err(Error::ShapeMismatch { expected: d, actual: td.theta.len().min(seed.theta_hat.len()) });
    }
    let (inv_v, inv_l) = (1.0 / cfg.noise_var, 1.0 / cfg.prior_var);
    let mut values = vec![0.0; family.n_states];
    let mut grad = vec![0.0; d];
    if cfg.minibatch_size.is_none() {
        stats.sync(family, buf, seed)?;
    }
    for _ in 0..cfg.sgd_iters {
        for (s, v) in values.iter_mut().enumerate() {
            *v = family.max_q(&td.theta, s);
        }
        for i in 0..d {
            grad[i] = 2.0 * inv_l * (td.theta[i] - seed.theta_hat[i]);
        }
        match cfg.minibatch_size {
            None => {
                for i in 0..d {
                    if stats.count[i] == 0.0 {
                        continue;
                    }
                    let boot: f64 = stats.successors[i].iter().map(|&(s, c)| c as f64 * values[s as usize]).sum();
                    grad[i] += 2.0 * inv_v * (stats.count[i] * td.theta[i] - stats.target_sum[i] - cfg.discount * boot);
                }
            }
            Some(m) if !buf.slots.is_empty() => {
                let scale = buf.slots.len() as f64 / m as f64;
                for _ in 0..m {
                    let t = &buf.slots[rng.random_range(0..buf.slots.len())];
                    let boot = if t.terminal { 0.0 } else { values[t.next_state] };
                    let y = t.reward + cfg.discount * boot + seed.noise(t.obs_index);
                    let i = family.index(t.state, t.action);
                    grad[i] += 2.0 * inv_v * scale * (td.theta[i] - y);
                }
            }
            Some(_) => {}
        }
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (t, g) in td.theta.iter_mut().zip(&grad) {
                    *t -= cfg.learning_rate * g;
                }
            }
            Optimizer::Adam => {
                td.adam.lr = cfg.learning_rate;
                td.adam.adam_step(&mut td.theta, &grad)?;
            }
        }
    }
    Ok(())
}
