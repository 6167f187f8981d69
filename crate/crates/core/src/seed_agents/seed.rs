use crate::rng::keyed_normal;

const NOISE_TAG: u64 = 0x4E;
const THETA_TAG: u64 = 0x54;

/// Fixed randomness of one agent (or ensemble model): the initial parameter
/// draw `θ̂ ~ N(θ̄, λI)` and the noise `z_j ~ N(0, v)` attached to observation `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSeed {
    pub agent_id: usize,
    pub master: u64,
    pub noise_var: f64,
    pub theta_hat: Vec<f64>,
}

impl AgentSeed {
    pub fn new(agent_id: usize, master: u64, noise_var: f64, prior_mean: &[f64], prior_var: f64) -> Self {
        let sd = prior_var.sqrt();
        let theta_hat = prior_mean
            .iter()
            .enumerate()
            .map(|(i, m)| m + sd * keyed_normal(&[master, THETA_TAG, i as u64]))
            .collect();
        Self { agent_id, master, noise_var, theta_hat }
    }

    #[inline]
    pub fn noise(&self, obs_index: usize) -> f64 {
        if self.noise_var == 0.0 {
            return 0.0;
        }
        self.noise_var.sqrt() * keyed_normal(&[self.master, NOISE_TAG, obs_index as u64])
    }
}

/// `z_{k,j}`: the same value on every call for a given seed and index.
pub fn noise_for(seed: &AgentSeed, obs_index: usize) -> f64 {
    seed.noise(obs_index)
}
