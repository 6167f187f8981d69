//! Benchmark environments.
//!
//! Every step function is a pure function of `(state, action, instance)`. The
//! only randomness lives in instance creation (parallel-chains rewards, the
//! bipolar sign) and in start states, both of which take an explicit generator.

mod cartpole;
mod chains;

pub use cartpole::{
    cartpole_accel, cartpole_reward2, cartpole_reward4, cartpole_step2, cartpole_step4,
    discretize_cartpole, Cartpole2Env, Cartpole4Env, CartpoleGrid, CartpoleParams,
    CartpoleState2, CartpoleState4, StateRef,
};
pub use chains::{
    BipolarChain, ChainSpec, Direction, ParallelAction, ParallelChains, ParallelChainsSpec,
    ParallelNode,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::Result;

/// Information broadcast to every agent when a chain endpoint is reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Reveal {
    /// Both bipolar endpoint weights.
    Bipolar { theta_left: f64, theta_right: f64 },
    /// The final-edge weight of one parallel chain (0-based chain index).
    Chain { chain: usize, theta: f64 },
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step<S> {
    pub next: S,
    pub reward: f64,
    pub terminal: bool,
    pub reveal: Option<Reveal>,
}

/// One shared observation `(s, a, r, s')` plus bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    /// The episode ended on arrival at `next_state`; no bootstrapping past it.
    pub terminal: bool,
    pub agent_id: usize,
    /// Global append order, dense from 0. Assigned by the shared store.
    pub obs_index: usize,
    /// Schedule time of the action that produced this observation.
    pub time: f64,
}

/// An environment with a finite action set.
pub trait Environment: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    fn n_actions(&self) -> usize;

    /// Whether `action` may be taken in `state`. Defaults to every action.
    fn legal(&self, _state: &Self::State, _action: usize) -> bool {
        true
    }

    /// Start state for one agent.
    fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    fn step(&self, state: &Self::State, action: usize) -> Result<Step<Self::State>>;

    /// Edges disclosed by `reveal` as `(state, action, reward, next, terminal)`.
    fn revealed_edges(&self, _reveal: &Reveal) -> Vec<(Self::State, usize, f64, Self::State, bool)> {
        Vec::new()
    }
}

/// An environment whose states map onto a finite index set.
pub trait Tabulated: Environment {
    fn n_states(&self) -> usize;
    fn index(&self, state: &Self::State) -> usize;
}
