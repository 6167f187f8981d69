use serde::{Deserialize, Serialize};

use crate::envs::Transition;
use crate::{Error, Result};

/// Dirichlet beliefs over next states, dense over `(s, a, s')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior {
    n_states: usize,
    n_actions: usize,
    prior: f64,
    alpha: Vec<f64>,
    /// Observation count per `(s, a)`.
    counts: Vec<u64>,
    /// Next states with a nonzero count, per `(s, a)`, in first-seen order.
    observed: Vec<Vec<u32>>,
}

impl DirichletPosterior {
    pub fn new(n_states: usize, n_actions: usize, prior: f64) -> Result<Self> {
        if !(prior > 0.0) {
            return Err(Error::InvalidParameter(format!("Dirichlet prior must be positive, got {prior}")));
        }
        let pairs = n_states * n_actions;
        Ok(Self {
            n_states,
            n_actions,
            prior,
            alpha: vec![prior; pairs * n_states],
            counts: vec![0; pairs],
            observed: vec![Vec::new(); pairs],
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    /// Concentrations of the `(s, a)` row.
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.n_actions + action) * self.n_states;
        &self.alpha[start..start + self.n_states]
    }

    pub fn count(&self, state: usize, action: usize) -> u64 {
        self.counts[state * self.n_actions + action]
    }

    pub fn observed(&self, state: usize, action: usize) -> &[u32] {
        &self.observed[state * self.n_actions + action]
    }

    fn check(&self, state: usize, action: usize, next: usize) -> Result<()> {
        for (index, size) in [(state, self.n_states), (action, self.n_actions), (next, self.n_states)] {
            if index >= size {
                return Err(Error::OutOfRange { index, size });
            }
        }
        Ok(())
    }

    /// Adds one count to `alpha(s, a, s')`.
    pub fn update(&mut self, t: &Transition<usize>) -> Result<()> {
        self.add(t.state, t.action, t.next_state, 1)
    }

    pub fn add(&mut self, state: usize, action: usize, next: usize, count: u64) -> Result<()> {
        self.check(state, action, next)?;
        let pair = state * self.n_actions + action;
        let idx = pair * self.n_states + next;
        if self.alpha[idx] == self.prior && count > 0 {
            self.observed[pair].push(next as u32);
        }
        self.alpha[idx] += count as f64;
        self.counts[pair] += count;
        Ok(())
    }
}

/// Independent Gaussian beliefs over the mean reward of each `(s, a)` with a
/// known observation variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRewardPosterior {
    n_actions: usize,
    pub mu: Vec<f64>,
    pub var: Vec<f64>,
    pub obs_noise_var: f64,
}

impl GaussianRewardPosterior {
    pub fn new(n_states: usize, n_actions: usize, mu0: f64, var0: f64, obs_noise_var: f64) -> Result<Self> {
        if !(var0 > 0.0) || !(obs_noise_var > 0.0) {
            return Err(Error::InvalidParameter("reward variances must be positive".into()));
        }
        Ok(Self {
            n_actions,
            mu: vec![mu0; n_states * n_actions],
            var: vec![var0; n_states * n_actions],
            obs_noise_var,
        })
    }

    pub fn mean(&self, state: usize, action: usize) -> f64 {
        self.mu[state * self.n_actions + action]
    }

    pub fn variance(&self, state: usize, action: usize) -> f64 {
        self.var[state * self.n_actions + action]
    }

    /// Conjugate update: `var' = 1/(1/var + 1/v)`, `mu' = var' (mu/var + r/v)`.
    pub fn update(&mut self, t: &Transition<usize>) -> Result<()> {
        let i = t.state * self.n_actions + t.action;
        if i >= self.mu.len() {
            return Err(Error::OutOfRange { index: i, size: self.mu.len() });
        }
        let (mu, var) = (self.mu[i], self.var[i]);
        let post = 1.0 / (1.0 / var + 1.0 / self.obs_noise_var);
        self.mu[i] = post * (mu / var + t.reward / self.obs_noise_var);
        self.var[i] = post;
        Ok(())
    }
}

/// The shared tabular belief: transitions and rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPosterior {
    pub transitions: DirichletPosterior,
    pub rewards: GaussianRewardPosterior,
}

impl TabularPosterior {
    /// Prior `alpha0 = 1`, `mu0 = 0`, `sigma0^2 = 1`, with reward noise variance `obs_noise_var`.
    pub fn new(n_states: usize, n_actions: usize, obs_noise_var: f64) -> Result<Self> {
        Ok(Self {
            transitions: DirichletPosterior::new(n_states, n_actions, 1.0)?,
            rewards: GaussianRewardPosterior::new(n_states, n_actions, 0.0, 1.0, obs_noise_var)?,
        })
    }

    pub fn n_states(&self) -> usize {
        self.transitions.n_states()
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.n_actions()
    }

    pub fn observe(&mut self, t: &Transition<usize>) -> Result<()> {
        self.transitions.update(t)?;
        self.rewards.update(t)
    }
}
