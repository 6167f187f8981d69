use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::envs::{BipolarChain, Cartpole2Env, CartpoleGrid, CartpoleParams, ChainSpec, Environment, ParallelChains, ParallelChainsSpec, Reveal, Step, Tabulated, Transition};
use crate::rng::{stream, tags};
use crate::seed_agents::{OneHotFamily, Optimizer, SeedLsviConfig, SeedTdConfig};
use crate::tabular::{ChainBelief, TabularPosterior};
use crate::Result;

/// One state, two actions with fixed rewards.
struct Bandit;

impl Environment for Bandit {
    type State = usize;

    fn n_actions(&self) -> usize {
        2
    }

    fn initial_state<R: rand::Rng + ?Sized>(&self, _rng: &mut R) -> usize {
        0
    }

    fn step(&self, _state: &usize, action: usize) -> Result<Step<usize>> {
        Ok(Step { next: 0, reward: [0.2, 0.9][action], terminal: false, reveal: None })
    }
}

impl Tabulated for Bandit {
    fn n_states(&self) -> usize {
        1
    }

    fn index(&self, _state: &usize) -> usize {
        0
    }
}

fn cfg(kind: TabularKind) -> TabularConfig {
    TabularConfig { kind, plan_horizon: None, delta: 0.05 }
}

fn transition(state: usize, action: usize, reward: f64, next: usize, terminal: bool, time: f64) -> Transition<usize> {
    Transition { state, action, reward, next_state: next, terminal, agent_id: 0, obs_index: 0, time }
}

fn parallel_env(instance: u64) -> ParallelChains {
    let mut rng = ChaCha8Rng::seed_from_u64(instance);
    ParallelChains { spec: ParallelChainsSpec::sample(4, 4, 100.0, &mut rng).unwrap() }
}

fn lsvi() -> ValueKind {
    ValueKind::Lsvi(SeedLsviConfig { planning_horizon: 8, noise_var: 0.01, prior_var: 100.0 })
}

#[test]
fn single_agent_matches_hand_loop() {
    let env = Bandit;
    let schedule = make_schedule(1, ScheduleKind::Synchronous, ScheduleHorizon::Actions(30), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    for kind in [TabularKind::ThompsonResample, TabularKind::SeedSampling, TabularKind::Ucrl, TabularKind::Psrl] {
        let mut team = TabularTeam::new(TabularPosterior::new(1, 2, 0.1).unwrap(), cfg(kind), 5).unwrap();
        let (metrics, _) = run_concurrent(&env, &mut team, &schedule, Mode::Single, 9, 0).unwrap();

        let mut reference = TabularTeam::new(TabularPosterior::new(1, 2, 0.1).unwrap(), cfg(kind), 5).unwrap();
        let mut agent = Team::<Bandit>::spawn(&reference, &env, 0).unwrap();
        let mut state = env.initial_state(&mut stream(9, &[tags::START, 0]));
        let mut total = 0.0;
        for step in 0..30 {
            let ctx = ActContext { state: &state, step, remaining: 30 - step, time: (step + 1) as f64 };
            let a = reference.act(&env, &mut agent, &ctx).unwrap();
            let st = env.step(&state, a).unwrap();
            total += st.reward;
            reference.commit(&env, &mut agent, transition(state, a, st.reward, st.next, false, ctx.time), None).unwrap();
            state = st.next;
        }
        assert_eq!(metrics.per_agent_reward, vec![total], "{kind:?}");
        assert_eq!(metrics.actions_taken, vec![30]);
    }
}

#[test]
fn observation_changes_other_agents_plan() {
    let env = BipolarChain { spec: ChainSpec::new(6, true).unwrap() };
    let mut team = TabularTeam::new(ChainBelief::bipolar(6).unwrap(), cfg(TabularKind::SeedSampling), 3).unwrap();
    let mut first = Team::<BipolarChain>::spawn(&team, &env, 0).unwrap();
    let mut second = Team::<BipolarChain>::spawn(&team, &env, 1).unwrap();
    let ctx = ActContext { state: &3, step: 0, remaining: 12, time: 1.0 };
    team.act(&env, &mut second, &ctx).unwrap();
    assert_eq!(second.last_mdp().reward(1, 0).abs(), 6.0);
    let reveal = Reveal::Bipolar { theta_left: 6.0, theta_right: -6.0 };
    team.commit(&env, &mut first, transition(1, 0, 6.0, 0, true, 1.0), Some(reveal)).unwrap();
    let after_action = team.act(&env, &mut second, &ctx).unwrap();
    assert_eq!(after_action, 0);
    assert_eq!(second.last_mdp().reward(1, 0), 6.0);
    assert_eq!(second.last_mdp().reward(4, 1), -6.0);
}

#[test]
fn value_team_sees_other_agents_data() {
    let env = parallel_env(1);
    let mut team = ValueTeam::new(lsvi(), OneHotFamily::for_env(&env).unwrap(), None, 8).unwrap();
    let mut a0 = Team::<ParallelChains>::spawn(&team, &env, 0).unwrap();
    let mut a1 = Team::<ParallelChains>::spawn(&team, &env, 1).unwrap();
    let ctx = ActContext { state: &0, step: 0, remaining: 4, time: 1.0 };
    team.act(&env, &mut a1, &ctx).unwrap();
    let before = a1.theta.clone();
    team.commit(&env, &mut a0, transition(0, 2, 0.0, 9, false, 0.5), None).unwrap();
    team.act(&env, &mut a1, &ctx).unwrap();
    assert_ne!(before, a1.theta);
}

fn run_parallel_chains(kind: ValueKind, mode: Mode, master: u64) -> RunMetrics {
    let env = parallel_env(master);
    let mut team = ValueTeam::new(kind, OneHotFamily::for_env(&env).unwrap(), None, master).unwrap();
    let schedule = make_schedule(6, ScheduleKind::Poisson { rate: 1.0 }, ScheduleHorizon::Actions(4), &mut stream(master, &[tags::SCHEDULE])).unwrap();
    run_concurrent(&env, &mut team, &schedule, mode, master, 4).unwrap().0
}

#[test]
fn single_threaded_runs_are_bit_identical() {
    let td = ValueKind::Td(SeedTdConfig {
        sgd_iters: 5,
        learning_rate: 0.1,
        discount: 0.99,
        minibatch_size: Some(4),
        noise_var: 0.01,
        prior_var: 100.0,
        optimizer: Optimizer::Adam,
    });
    for kind in [lsvi(), td] {
        let a = run_parallel_chains(kind.clone(), Mode::Single, 17);
        let b = run_parallel_chains(kind, Mode::Single, 17);
        assert_eq!(a, b);
        assert_eq!(a.curve.len(), 4);
    }
}

#[test]
fn causality_and_monotonicity_hold() {
    for mode in [Mode::Single, Mode::Parallel { max_batch: 4 }] {
        let m = run_parallel_chains(lsvi(), mode, 3);
        assert_eq!(m.causality_violations, 0);
        assert_eq!(m.monotonicity_violations, 0);
        let acted: usize = m.actions_taken.iter().sum();
        assert!(m.observations >= acted);
    }
}

#[test]
fn psrl_policy_is_constant() {
    let env = BipolarChain { spec: ChainSpec::new(10, false).unwrap() };
    let mut team = TabularTeam::new(ChainBelief::bipolar(10).unwrap(), cfg(TabularKind::Psrl), 4).unwrap();
    let mut agent = Team::<BipolarChain>::spawn(&team, &env, 0).unwrap();
    let mut other = Team::<BipolarChain>::spawn(&team, &env, 1).unwrap();
    team.act(&env, &mut agent, &ActContext { state: &5, step: 0, remaining: 20, time: 1.0 }).unwrap();
    let policy = agent.psrl_policy().unwrap().clone();
    let reveal = Reveal::Bipolar { theta_left: -10.0, theta_right: 10.0 };
    team.commit(&env, &mut other, transition(1, 0, -10.0, 0, true, 1.5), Some(reveal)).unwrap();
    for step in 1..20 {
        team.act(&env, &mut agent, &ActContext { state: &5, step, remaining: 20 - step, time: 2.0 }).unwrap();
        assert_eq!(agent.psrl_policy().unwrap(), &policy);
    }
}

#[test]
fn ucrl_agents_share_one_plan() {
    let env = BipolarChain { spec: ChainSpec::new(10, true).unwrap() };
    let team = TabularTeam::new(ChainBelief::bipolar(10).unwrap(), cfg(TabularKind::Ucrl), 4).unwrap();
    let mut agents: Vec<_> = (0..5).map(|k| Team::<BipolarChain>::spawn(&team, &env, k).unwrap()).collect();
    let ctx = ActContext { state: &5, step: 0, remaining: 20, time: 1.0 };
    let actions: Vec<usize> = agents.iter_mut().map(|a| team.act(&env, a, &ctx).unwrap()).collect();
    assert!(actions.windows(2).all(|w| w[0] == w[1]));
    assert!(agents.windows(2).all(|w| w[0].last_mdp() == w[1].last_mdp()));

    let post_env = Bandit;
    let mut post = TabularTeam::new(TabularPosterior::new(1, 2, 0.1).unwrap(), cfg(TabularKind::Ucrl), 4).unwrap();
    let mut agents: Vec<_> = (0..3).map(|k| Team::<Bandit>::spawn(&post, &post_env, k).unwrap()).collect();
    post.commit(&post_env, &mut agents[0], transition(0, 1, 0.9, 0, false, 0.1), None).unwrap();
    let ctx = ActContext { state: &0, step: 0, remaining: 5, time: 1.0 };
    for a in agents.iter_mut() {
        post.act(&post_env, a, &ctx).unwrap();
    }
    assert!(agents.windows(2).all(|w| w[0].last_mdp() == w[1].last_mdp()));
}

#[test]
fn parallel_mode_matches_in_distribution() {
    let runs = 30;
    let run = |mode: Mode, r: u64| {
        let env = parallel_env(1000 + r);
        let mut team = TabularTeam::new(ChainBelief::parallel(4, 4, 100.0).unwrap(), cfg(TabularKind::SeedSampling), 50 + r).unwrap();
        let schedule = make_schedule(10, ScheduleKind::Synchronous, ScheduleHorizon::Actions(4), &mut stream(r, &[tags::SCHEDULE])).unwrap();
        let m = run_concurrent(&env, &mut team, &schedule, mode, 50 + r, 0).unwrap().0;
        compute_regret(m.mean_reward(), &env, 4).unwrap()
    };
    let diffs: Vec<f64> = (0..runs).map(|r| run(Mode::Single, r) - run(Mode::Parallel { max_batch: 10 }, r)).collect();
    let agg = aggregate(&diffs);
    assert!(agg.mean.abs() <= 3.0 * agg.se.max(1e-9), "{agg:?}");
}

#[test]
fn synchronous_batches_all_see_the_same_state() {
    let env = parallel_env(2);
    let schedule = make_schedule(8, ScheduleKind::Synchronous, ScheduleHorizon::Actions(4), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut team = TabularTeam::new(ChainBelief::parallel(4, 4, 100.0).unwrap(), cfg(TabularKind::SeedSampling), 6).unwrap();
    let (m, _) = run_concurrent(&env, &mut team, &schedule, Mode::Parallel { max_batch: 8 }, 6, 0).unwrap();
    assert_eq!(m.causality_violations, 0);
    assert_eq!(m.actions_taken, vec![4; 8]);
}

fn one_cell_env() -> Cartpole2Env {
    Cartpole2Env::new(CartpoleParams::tabular(), CartpoleGrid::new(1, 1).unwrap()).unwrap()
}

fn constant_rollout(env: &Cartpole2Env, action: usize, horizon: usize) -> f64 {
    let mut s = Cartpole2Env::rest_state();
    let mut total = 0.0;
    for _ in 0..horizon {
        let st = env.step(&s, action).unwrap();
        total += st.reward;
        s = st.next;
    }
    total
}

#[test]
fn evaluation_with_forced_posterior_is_optimal() {
    let env = one_cell_env();
    let h = 200;
    let returns: Vec<f64> = (0..3).map(|a| constant_rollout(&env, a, h)).collect();
    let mut post = TabularPosterior::new(1, 3, 0.01).unwrap();
    for (a, &ret) in returns.iter().enumerate() {
        for _ in 0..1000 {
            post.observe(&transition(0, a, ret / h as f64, 0, false, 0.0)).unwrap();
        }
    }
    let snapshot = post.clone();
    let best = returns.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eval = evaluate_tabular(&post, &env, h).unwrap();
    assert!((eval.reward - best).abs() < 1e-9);
    assert_eq!(eval.posterior_observations, 3000);
    assert_eq!(post, snapshot);

    let prior_only = TabularPosterior::new(1, 3, 0.01).unwrap();
    assert!(evaluate_tabular(&prior_only, &env, h).unwrap().reward <= best + 1e-12);
}
