use rand::Rng;

use super::buffer::BufferState;
use super::seed::AgentSeed;
use crate::envs::CartpoleState4;
use crate::rvf::{features_cartpole4, glorot_init, AdamState, MlpParams, MlpShape, MlpWorkspace};
use crate::{Error, Result};

/// Maps environment states to network inputs.
pub trait Featurizer<S>: Sync {
    fn dim(&self) -> usize;
    fn features(&self, state: &S, out: &mut Vec<f64>);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Cartpole4Features;

impl Featurizer<CartpoleState4> for Cartpole4Features {
    fn dim(&self) -> usize {
        6
    }

    fn features(&self, state: &CartpoleState4, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&features_cartpole4(state));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_models: usize,
    pub hidden: Vec<usize>,
    pub prior_scale: f64,
    pub noise_var: f64,
    pub discount: f64,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    /// Gradient steps taken on an agent's model after each of its actions.
    pub steps_per_action: usize,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_models == 0 || self.minibatch_size == 0 {
            return Err(Error::InvalidParameter("ensemble needs at least one model and a positive minibatch".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidParameter(format!("discount must lie in [0, 1), got {}", self.discount)));
        }
        if !(self.noise_var >= 0.0) || !(self.prior_scale >= 0.0) || !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidParameter("negative ensemble hyperparameter".into()));
        }
        Ok(())
    }
}

/// One member of the ensemble: its network (with frozen prior), its fixed
/// noise stream and its optimizer moments.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub params: MlpParams,
    pub seed: AgentSeed,
    pub adam: AdamState,
}

impl EnsembleModel {
    pub fn new<R: Rng + ?Sized>(index: usize, master: u64, input: usize, n_actions: usize, cfg: &EnsembleConfig, rng: &mut R) -> Result<Self> {
        let shape = MlpShape { input, hidden: cfg.hidden.clone(), output: n_actions, skip: true };
        let params = glorot_init(shape, cfg.prior_scale, rng)?;
        let adam = AdamState::new(params.trainable.len(), cfg.learning_rate);
        let seed = AgentSeed { agent_id: index, master, noise_var: cfg.noise_var, theta_hat: Vec::new() };
        Ok(Self { params, seed, adam })
    }

    pub fn q_values(&self, x: &[f64], ws: &mut MlpWorkspace, out: &mut Vec<f64>) -> Result<()> {
        self.params.q_eval_into(x, ws, out)
    }
}

/// Each agent bound to a model drawn uniformly from `0..n_models`.
pub fn ensemble_assign<R: Rng + ?Sized>(n_agents: usize, n_models: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n_models == 0 {
        return Err(Error::InvalidParameter("ensemble needs at least one model".into()));
    }
    Ok((0..n_agents).map(|_| rng.random_range(0..n_models)).collect())
}

/// One minibatch gradient step of seed TD on `model`, bootstrapping from the
/// parameters before the step. A no-op on an empty buffer.
pub fn ensemble_train_step<S, F: Featurizer<S>, R: Rng + ?Sized>(
    model: &mut EnsembleModel,
    buf: &BufferState<S>,
    featurizer: &F,
    cfg: &EnsembleConfig,
    rng: &mut R,
) -> Result<()> {
    if buf.slots.is_empty() {
        return Ok(());
    }
    let shape = model.params.shape.clone();
    let mut ws = MlpWorkspace::default();
    let mut x = Vec::with_capacity(featurizer.dim());
    let mut q = Vec::with_capacity(shape.output);
    let mut grad = vec![0.0; model.params.trainable.len()];
    let inv_m = 1.0 / cfg.minibatch_size as f64;
    for _ in 0..cfg.minibatch_size {
        let t = &buf.slots[rng.random_range(0..buf.slots.len())];
        let boot = if t.terminal || cfg.discount == 0.0 {
            0.0
        } else {
            featurizer.features(&t.next_state, &mut x);
            model.params.q_eval_into(&x, &mut ws, &mut q)?;
            q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        let target = t.reward + cfg.discount * boot + model.seed.noise(t.obs_index);
        featurizer.features(&t.state, &mut x);
        model.params.q_eval_into(&x, &mut ws, &mut q)?;
        let residual = q[t.action] - target;
        shape.accumulate_gradient(&model.params.trainable, &mut ws, t.action, residual * inv_m, &mut grad)?;
    }
    model.adam.lr = cfg.learning_rate;
    model.adam.adam_step(&mut model.params.trainable, &grad)
}

/// Trains every model listed in `due` for `steps_per_action` minibatch steps.
pub fn ensemble_step<S, F: Featurizer<S>, R: Rng + ?Sized>(
    models: &mut [EnsembleModel],
    due: &[usize],
    buf: &BufferState<S>,
    featurizer: &F,
    cfg: &EnsembleConfig,
    rng: &mut R,
) -> Result<()> {
    for &e in due {
        let model = models.get_mut(e).ok_or(Error::OutOfRange { index: e, size: cfg.n_models })?;
        for _ in 0..cfg.steps_per_action {
            ensemble_train_step(model, buf, featurizer, cfg, rng)?;
        }
    }
    Ok(())
}
