use crate::envs::{BipolarChain, Cartpole2Env, Environment, ParallelChains, Reveal, Tabulated};
use crate::tabular::{expected_mdp, finite_horizon_policy, value_iteration, Belief, ChainBelief, Horizon, TabularPosterior};
use crate::{Error, Result};

/// Environments whose optimal expected return is computable.
pub trait Oracle {
    /// Optimal expected return of one agent over `horizon` actions from its start state.
    fn optimal_value(&self, horizon: usize) -> Result<f64>;
}

impl Oracle for BipolarChain {
    fn optimal_value(&self, horizon: usize) -> Result<f64> {
        let mut belief = ChainBelief::bipolar(self.spec.n_vertices)?;
        belief.reveal(&Reveal::Bipolar { theta_left: self.spec.theta_left, theta_right: self.spec.theta_right })?;
        let plan = value_iteration(&belief.expected(), Horizon::Finite(horizon.max(1)), None)?;
        Ok(plan.values[self.spec.start_vertex])
    }
}

impl Oracle for ParallelChains {
    fn optimal_value(&self, horizon: usize) -> Result<f64> {
        let s = &self.spec;
        let mut belief = ChainBelief::parallel(s.n_chains, s.chain_length, s.sigma0_sq)?;
        for (chain, &theta) in s.final_rewards.iter().enumerate() {
            belief.reveal(&Reveal::Chain { chain, theta })?;
        }
        let plan = value_iteration(&belief.expected(), Horizon::Finite(horizon.max(1)), None)?;
        Ok(plan.values[0])
    }
}

impl Oracle for Cartpole2Env {
    fn optimal_value(&self, _horizon: usize) -> Result<f64> {
        Err(Error::NoOracle("the swing-up task".into()))
    }
}

/// Optimal per-agent value minus the realized mean per-agent reward.
pub fn compute_regret<E: Oracle>(realized_mean: f64, env: &E, horizon: usize) -> Result<f64> {
    Ok(env.optimal_value(horizon)? - realized_mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub reward: f64,
    /// Total observation count of the posterior that was evaluated.
    pub posterior_observations: u64,
}

/// Plans on the posterior-mean MDP and rolls the plan out from the rest state.
pub fn evaluate_tabular(post: &TabularPosterior, env: &Cartpole2Env, horizon: usize) -> Result<EvalResult> {
    let mdp = expected_mdp(post);
    let policy = finite_horizon_policy(&mdp, horizon, None)?;
    let mut state = Cartpole2Env::rest_state();
    let mut reward = 0.0;
    for step in 0..horizon {
        let a = policy.action(step, env.index(&state));
        let st = env.step(&state, a)?;
        reward += st.reward;
        state = st.next;
    }
    let posterior_observations = (0..post.n_states())
        .flat_map(|s| (0..post.n_actions()).map(move |a| (s, a)))
        .map(|(s, a)| post.transitions.count(s, a))
        .sum();
    Ok(EvalResult { reward, posterior_observations })
}
