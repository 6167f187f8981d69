use rayon::prelude::*;

use super::schedule::{Event, Schedule};
use crate::envs::{Environment, Reveal, Transition};
use crate::rng::{stream, tags};
use crate::{Error, Result};

/// What an agent knows when it is due to act.
#[derive(Debug, Clone, Copy)]
pub struct ActContext<'a, S> {
    pub state: &'a S,
    /// 0-based index of this action among the agent's actions.
    pub step: usize,
    /// Actions left in the agent's budget, this one included.
    pub remaining: usize,
    pub time: f64,
}

/// Shared state of a group of agents plus the per-agent strategy.
///
/// `act` only reads shared state, so agents may plan in parallel; `commit`
/// folds one transition into the shared state and is always called in event order.
pub trait Team<E: Environment>: Sync {
    type Agent: Send;

    fn spawn(&self, env: &E, agent_id: usize) -> Result<Self::Agent>;

    fn act(&self, env: &E, agent: &mut Self::Agent, ctx: &ActContext<'_, E::State>) -> Result<usize>;

    fn commit(&mut self, env: &E, agent: &mut Self::Agent, t: Transition<E::State>, reveal: Option<Reveal>) -> Result<()>;

    /// Number of observations in the shared store.
    fn observations(&self) -> usize;

    /// Time stamp of the newest shared observation.
    fn latest_time(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Events one at a time in schedule order.
    Single,
    /// Consecutive events of distinct agents plan concurrently against the same
    /// shared state, then commit in schedule order.
    Parallel { max_batch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub n_agents: usize,
    pub per_agent_reward: Vec<f64>,
    pub actions_taken: Vec<usize>,
    /// `(time, cumulative reward per agent)` samples.
    pub curve: Vec<(f64, f64)>,
    pub observations: usize,
    /// Plans that could see an observation stamped later than the plan.
    pub causality_violations: usize,
    /// Events after which the shared store had shrunk.
    pub monotonicity_violations: usize,
    pub eval_reward: Option<f64>,
    pub regret: Option<f64>,
}

impl RunMetrics {
    pub fn mean_reward(&self) -> f64 {
        self.per_agent_reward.iter().sum::<f64>() / self.n_agents as f64
    }

    pub fn total_reward(&self) -> f64 {
        self.per_agent_reward.iter().sum()
    }
}

struct Tracker {
    total: f64,
    n_agents: usize,
    sample_times: Vec<f64>,
    next_sample: usize,
    curve: Vec<(f64, f64)>,
}

impl Tracker {
    fn advance_to(&mut self, time: f64) {
        while self.next_sample < self.sample_times.len() && self.sample_times[self.next_sample] < time {
            self.curve.push((self.sample_times[self.next_sample], self.total / self.n_agents as f64));
            self.next_sample += 1;
        }
    }
}

/// Runs every agent of `schedule` against `env`, sharing information through
/// `team`. Start states come from per-agent streams of `master`. Agents whose
/// episode has ended skip their remaining actions.
pub fn run_concurrent<E: Environment, T: Team<E>>(
    env: &E,
    team: &mut T,
    schedule: &Schedule,
    mode: Mode,
    master: u64,
    curve_points: usize,
) -> Result<(RunMetrics, Vec<T::Agent>)> {
    let k = schedule.n_agents();
    if let Mode::Parallel { max_batch: 0 } = mode {
        return Err(Error::InvalidParameter("parallel batch size must be positive".into()));
    }
    let mut agents: Vec<Option<T::Agent>> = (0..k).map(|id| team.spawn(env, id).map(Some)).collect::<Result<_>>()?;
    let mut states: Vec<E::State> = (0..k).map(|id| env.initial_state(&mut stream(master, &[tags::START, id as u64]))).collect();
    let mut done = vec![false; k];
    let budgets: Vec<usize> = schedule.times.iter().map(Vec::len).collect();
    let mut per_agent_reward = vec![0.0; k];
    let mut actions_taken = vec![0; k];
    let end = schedule.end_time();
    let mut tracker = Tracker {
        total: 0.0,
        n_agents: k,
        sample_times: (1..=curve_points).map(|i| end * i as f64 / curve_points as f64).collect(),
        next_sample: 0,
        curve: Vec::new(),
    };
    let mut causality_violations = 0;
    let mut monotonicity_violations = 0;
    let mut last_obs = team.observations();

    let events = schedule.events();
    let mut i = 0;
    while i < events.len() {
        let mut batch: Vec<Event> = Vec::new();
        match mode {
            Mode::Single => {
                batch.push(events[i]);
                i += 1;
            }
            Mode::Parallel { max_batch } => {
                let mut seen = std::collections::HashSet::new();
                while i < events.len() && batch.len() < max_batch && seen.insert(events[i].agent) {
                    batch.push(events[i]);
                    i += 1;
                }
            }
        }
        batch.retain(|e| !done[e.agent]);
        if batch.is_empty() {
            continue;
        }
        tracker.advance_to(batch[0].time);
        if team.latest_time() > batch[0].time {
            causality_violations += batch.len();
        }
        let mut taken: Vec<(Event, T::Agent)> =
            batch.iter().map(|e| (*e, agents[e.agent].take().expect("agent present"))).collect();
        let shared: &T = team;
        let plan = |(e, agent): &mut (Event, T::Agent)| {
            let ctx = ActContext { state: &states[e.agent], step: e.step, remaining: budgets[e.agent] - e.step, time: e.time };
            shared.act(env, agent, &ctx)
        };
        let actions: Vec<Result<usize>> = match mode {
            Mode::Single => taken.iter_mut().map(plan).collect(),
            Mode::Parallel { .. } => taken.par_iter_mut().map(plan).collect(),
        };
        for ((e, mut agent), action) in taken.into_iter().zip(actions) {
            let action = action?;
            let step = env.step(&states[e.agent], action)?;
            let t = Transition {
                state: states[e.agent].clone(),
                action,
                reward: step.reward,
                next_state: step.next.clone(),
                terminal: step.terminal,
                agent_id: e.agent,
                obs_index: 0,
                time: e.time,
            };
            team.commit(env, &mut agent, t, step.reveal)?;
            agents[e.agent] = Some(agent);
            per_agent_reward[e.agent] += step.reward;
            actions_taken[e.agent] += 1;
            tracker.total += step.reward;
            states[e.agent] = step.next;
            done[e.agent] = step.terminal;
            let obs = team.observations();
            if obs < last_obs {
                monotonicity_violations += 1;
            }
            last_obs = obs;
        }
    }
    tracker.advance_to(f64::INFINITY);
    let agents = agents.into_iter().map(|a| a.expect("agent present")).collect();
    let metrics = RunMetrics {
        n_agents: k,
        per_agent_reward,
        actions_taken,
        curve: tracker.curve,
        observations: team.observations(),
        causality_violations,
        monotonicity_violations,
        eval_reward: None,
        regret: None,
    };
    Ok((metrics, agents))
}
