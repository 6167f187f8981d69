use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::run::{ActContext, Team};
use crate::envs::{Environment, Reveal, Tabulated, Transition};
use crate::rng::{derive_seed, tags};
use crate::rvf::MlpWorkspace;
use crate::seed_agents::{
    ensemble_assign, ensemble_step, greedy_action, lsvi_from_stats, seed_td_update, AgentSeed, EnsembleConfig,
    EnsembleModel, Featurizer, OneHotFamily, OneHotStats, OverwritePerm, SeedLsviConfig, SeedTdConfig, SharedBuffer,
    TdState,
};
use crate::tabular::{
    finite_horizon_policy, value_iteration, Belief, FiniteHorizonPolicy, Horizon, MdpSample, SeedCache, TabularSeed,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabularKind {
    /// One posterior draw at the agent's first action, followed for the whole budget.
    Psrl,
    /// The shared optimistic MDP, replanned at every action.
    Ucrl,
    /// A fresh posterior draw at every action.
    ThompsonResample,
    /// The agent's seeded posterior draw at every action.
    SeedSampling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularConfig {
    pub kind: TabularKind,
    /// Cap on the lookahead of replanning agents; `None` plans to the end of the budget.
    pub plan_horizon: Option<usize>,
    pub delta: f64,
}

/// Tabular agents sharing one posterior.
#[derive(Debug, Clone)]
pub struct TabularTeam<B> {
    pub belief: B,
    pub cfg: TabularConfig,
    master: u64,
    observations: usize,
    latest_time: f64,
}

impl<B: Belief> TabularTeam<B> {
    pub fn new(belief: B, cfg: TabularConfig, master: u64) -> Result<Self> {
        if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", cfg.delta)));
        }
        if cfg.plan_horizon == Some(0) {
            return Err(Error::InvalidParameter("plan horizon must be positive".into()));
        }
        Ok(Self { belief, cfg, master, observations: 0, latest_time: f64::NEG_INFINITY })
    }

    /// Writes the MDP agent `agent` would plan on right now into its scratch buffer.
    pub fn build_mdp(&self, agent: &mut TabularAgent) -> Result<Option<Vec<f64>>> {
        match self.cfg.kind {
            TabularKind::Psrl | TabularKind::ThompsonResample => {
                self.belief.thompson_into(&mut agent.rng, &mut agent.mdp);
                Ok(None)
            }
            TabularKind::SeedSampling => {
                self.belief.seeded_into(&agent.seed, &mut agent.cache, &mut agent.mdp)?;
                Ok(None)
            }
            TabularKind::Ucrl => {
                let opt = self.belief.optimistic(self.cfg.delta)?;
                agent.mdp = opt.mdp;
                Ok(opt.radius.iter().any(|&r| r > 0.0).then_some(opt.radius))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TabularAgent {
    pub id: usize,
    seed: TabularSeed,
    cache: SeedCache,
    rng: ChaCha8Rng,
    mdp: MdpSample,
    psrl: Option<(usize, FiniteHorizonPolicy)>,
}

impl TabularAgent {
    /// The MDP of the agent's most recent plan.
    pub fn last_mdp(&self) -> &MdpSample {
        &self.mdp
    }

    /// The fixed policy of a PSRL agent, once drawn.
    pub fn psrl_policy(&self) -> Option<&FiniteHorizonPolicy> {
        self.psrl.as_ref().map(|(_, p)| p)
    }
}

impl<E: Tabulated, B: Belief> Team<E> for TabularTeam<B> {
    type Agent = TabularAgent;

    fn spawn(&self, env: &E, agent_id: usize) -> Result<TabularAgent> {
        if env.n_states() != self.belief.n_states() || env.n_actions() != self.belief.n_actions() {
            return Err(Error::ShapeMismatch { expected: self.belief.n_states(), actual: env.n_states() });
        }
        let id = agent_id as u64;
        Ok(TabularAgent {
            id: agent_id,
            seed: TabularSeed::new(derive_seed(self.master, &[tags::SEED, id])),
            cache: SeedCache::default(),
            rng: ChaCha8Rng::seed_from_u64(derive_seed(self.master, &[tags::AGENT, id])),
            mdp: self.belief.blank(),
            psrl: None,
        })
    }

    fn act(&self, env: &E, agent: &mut TabularAgent, ctx: &ActContext<'_, E::State>) -> Result<usize> {
        let s = env.index(ctx.state);
        if self.cfg.kind == TabularKind::Psrl {
            if agent.psrl.is_none() {
                self.build_mdp(agent)?;
                let policy = finite_horizon_policy(&agent.mdp, ctx.remaining.max(1), None)?;
                agent.psrl = Some((ctx.step, policy));
            }
            let (start, policy) = agent.psrl.as_ref().expect("policy drawn");
            return Ok(policy.action(ctx.step - start, s));
        }
        let radius = self.build_mdp(agent)?;
        let h = self.cfg.plan_horizon.map_or(ctx.remaining, |cap| cap.min(ctx.remaining)).max(1);
        let plan = value_iteration(&agent.mdp, Horizon::Finite(h), radius.as_deref())?;
        Ok(plan.policy[s])
    }

    fn commit(&mut self, env: &E, _agent: &mut TabularAgent, t: Transition<E::State>, reveal: Option<Reveal>) -> Result<()> {
        let indexed = Transition {
            state: env.index(&t.state),
            action: t.action,
            reward: t.reward,
            next_state: env.index(&t.next_state),
            terminal: t.terminal,
            agent_id: t.agent_id,
            obs_index: self.observations,
            time: t.time,
        };
        self.belief.observe(&indexed)?;
        if let Some(r) = reveal {
            self.belief.reveal(&r)?;
        }
        self.observations += 1;
        self.latest_time = self.latest_time.max(t.time);
        Ok(())
    }

    fn observations(&self) -> usize {
        self.observations
    }

    fn latest_time(&self) -> f64 {
        self.latest_time
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValueKind {
    Lsvi(SeedLsviConfig),
    Td(SeedTdConfig),
}

impl ValueKind {
    fn noise_var(&self) -> f64 {
        match self {
            ValueKind::Lsvi(c) => c.noise_var,
            ValueKind::Td(c) => c.noise_var,
        }
    }

    fn prior_var(&self) -> f64 {
        match self {
            ValueKind::Lsvi(c) => c.prior_var,
            ValueKind::Td(c) => c.prior_var,
        }
    }
}

/// Seed LSVI or seed TD agents with one-hot linear values over a shared buffer.
/// Revealed edges enter the buffer as synthetic observations.
#[derive(Debug)]
pub struct ValueTeam {
    pub kind: ValueKind,
    pub family: OneHotFamily,
    pub buffer: SharedBuffer<usize>,
    prior_mean: Vec<f64>,
    master: u64,
    latest_time: f64,
}

impl ValueTeam {
    pub fn new(kind: ValueKind, family: OneHotFamily, capacity: Option<usize>, master: u64) -> Result<Self> {
        match &kind {
            ValueKind::Lsvi(c) => c.validate()?,
            ValueKind::Td(c) => c.validate()?,
        }
        let prior_mean = vec![0.0; family.dim()];
        Ok(Self { kind, family, buffer: SharedBuffer::new(capacity)?, prior_mean, master, latest_time: f64::NEG_INFINITY })
    }

    /// The agent's current value weights given the shared buffer.
    pub fn fit(&self, agent: &mut ValueAgent) -> Result<()> {
        let buf = self.buffer.read();
        match &self.kind {
            ValueKind::Lsvi(cfg) => {
                agent.stats.sync(&self.family, &buf, &agent.seed)?;
                agent.theta = lsvi_from_stats(&self.family, &agent.stats, &agent.seed, cfg)?;
            }
            ValueKind::Td(cfg) => {
                let td = agent.td.as_mut().expect("TD agents carry optimizer state");
                seed_td_update(td, &buf, &mut agent.stats, &agent.seed, &self.family, cfg, &mut agent.rng)?;
                agent.theta.clone_from(&td.theta);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ValueAgent {
    pub id: usize,
    pub seed: AgentSeed,
    pub theta: Vec<f64>,
    stats: OneHotStats,
    td: Option<TdState>,
    rng: ChaCha8Rng,
    perm: Option<OverwritePerm>,
}

impl<E: Tabulated<State = usize>> Team<E> for ValueTeam {
    type Agent = ValueAgent;

    fn spawn(&self, env: &E, agent_id: usize) -> Result<ValueAgent> {
        if env.n_states() != self.family.n_states || env.n_actions() != self.family.n_actions {
            return Err(Error::ShapeMismatch { expected: self.family.n_states, actual: env.n_states() });
        }
        let id = agent_id as u64;
        let seed = AgentSeed::new(
            agent_id,
            derive_seed(self.master, &[tags::SEED, id]),
            self.kind.noise_var(),
            &self.prior_mean,
            self.kind.prior_var(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.master, &[tags::AGENT, id]));
        let perm = match self.buffer.read().capacity {
            Some(cap) => Some(OverwritePerm::random(cap, &mut rng)?),
            None => None,
        };
        let td = match &self.kind {
            ValueKind::Td(cfg) => Some(TdState::new(seed.theta_hat.clone(), cfg.learning_rate)),
            ValueKind::Lsvi(_) => None,
        };
        Ok(ValueAgent { id: agent_id, theta: seed.theta_hat.clone(), seed, stats: OneHotStats::new(&self.family), td, rng, perm })
    }

    fn act(&self, _env: &E, agent: &mut ValueAgent, ctx: &ActContext<'_, usize>) -> Result<usize> {
        self.fit(agent)?;
        Ok(self.family.greedy(&agent.theta, *ctx.state))
    }

    fn commit(&mut self, env: &E, agent: &mut ValueAgent, t: Transition<usize>, reveal: Option<Reveal>) -> Result<()> {
        let (state, action, time, agent_id) = (t.state, t.action, t.time, t.agent_id);
        self.buffer.append(t, agent.perm.as_mut())?;
        if let Some(r) = reveal {
            for (s, a, reward, next, terminal) in env.revealed_edges(&r) {
                if (s, a) == (state, action) {
                    continue;
                }
                let synthetic = Transition { state: s, action: a, reward, next_state: next, terminal, agent_id, obs_index: 0, time };
                self.buffer.append(synthetic, agent.perm.as_mut())?;
            }
        }
        self.latest_time = self.latest_time.max(time);
        Ok(())
    }

    fn observations(&self) -> usize {
        self.buffer.len()
    }

    fn latest_time(&self) -> f64 {
        self.latest_time
    }
}

/// Agents bound to members of a trained MLP ensemble, acting greedily with
/// probability `1 - epsilon` and uniformly at random otherwise.
pub struct EnsembleTeam<S, F> {
    pub cfg: EnsembleConfig,
    pub epsilon: f64,
    pub models: Vec<EnsembleModel>,
    pub assignment: Vec<usize>,
    pub buffer: SharedBuffer<S>,
    featurizer: F,
    master: u64,
    train_rng: ChaCha8Rng,
    latest_time: f64,
}

impl<S: Clone, F: Featurizer<S>> EnsembleTeam<S, F> {
    pub fn new(cfg: EnsembleConfig, epsilon: f64, n_agents: usize, n_actions: usize, featurizer: F, capacity: Option<usize>, master: u64) -> Result<Self> {
        cfg.validate()?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in [0, 1], got {epsilon}")));
        }
        let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(master, &[tags::MODEL]));
        let models = (0..cfg.n_models)
            .map(|e| EnsembleModel::new(e, derive_seed(master, &[tags::MODEL, e as u64]), featurizer.dim(), n_actions, &cfg, &mut init_rng))
            .collect::<Result<Vec<_>>>()?;
        let assignment = ensemble_assign(n_agents, cfg.n_models, &mut ChaCha8Rng::seed_from_u64(derive_seed(master, &[tags::ASSIGN])))?;
        Ok(Self {
            cfg,
            epsilon,
            models,
            assignment,
            buffer: SharedBuffer::new(capacity)?,
            featurizer,
            master,
            train_rng: ChaCha8Rng::seed_from_u64(derive_seed(master, &[tags::SCHEDULE, 1])),
            latest_time: f64::NEG_INFINITY,
        })
    }
}

pub struct EnsembleAgent {
    pub id: usize,
    pub model: usize,
    rng: ChaCha8Rng,
    ws: MlpWorkspace,
    x: Vec<f64>,
    q: Vec<f64>,
}

impl<E, F> Team<E> for EnsembleTeam<E::State, F>
where
    E: Environment,
    F: Featurizer<E::State>,
{
    type Agent = EnsembleAgent;

    fn spawn(&self, _env: &E, agent_id: usize) -> Result<EnsembleAgent> {
        let model = *self.assignment.get(agent_id).ok_or(Error::OutOfRange { index: agent_id, size: self.assignment.len() })?;
        Ok(EnsembleAgent {
            id: agent_id,
            model,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(self.master, &[tags::ACTION, agent_id as u64])),
            ws: MlpWorkspace::default(),
            x: Vec::new(),
            q: Vec::new(),
        })
    }

    fn act(&self, env: &E, agent: &mut EnsembleAgent, ctx: &ActContext<'_, E::State>) -> Result<usize> {
        if self.epsilon > 0.0 && agent.rng.random::<f64>() < self.epsilon {
            return Ok(agent.rng.random_range(0..env.n_actions()));
        }
        self.featurizer.features(ctx.state, &mut agent.x);
        self.models[agent.model].q_values(&agent.x, &mut agent.ws, &mut agent.q)?;
        Ok(greedy_action(&agent.q, |a| env.legal(ctx.state, a)))
    }

    fn commit(&mut self, _env: &E, agent: &mut EnsembleAgent, t: Transition<E::State>, _reveal: Option<Reveal>) -> Result<()> {
        let time = t.time;
        self.buffer.append(t, None)?;
        let buf = self.buffer.read();
        ensemble_step(&mut self.models, &[agent.model], &buf, &self.featurizer, &self.cfg, &mut self.train_rng)?;
        self.latest_time = self.latest_time.max(time);
        Ok(())
    }

    fn observations(&self) -> usize {
        self.buffer.len()
    }

    fn latest_time(&self) -> f64 {
        self.latest_time
    }
}
