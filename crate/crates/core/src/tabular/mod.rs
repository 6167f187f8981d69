//! Tabular posteriors, the four tabular exploration strategies and exact planners.

mod belief;
mod planning;
mod posterior;
mod sampling;

pub use belief::{Belief, ChainBelief, SeedCache};
pub use planning::{finite_horizon_policy, value_iteration, FiniteHorizonPolicy, Horizon, Plan};
pub use posterior::{DirichletPosterior, GaussianRewardPosterior, TabularPosterior};
pub use sampling::{
    expected_mdp, optimistic_mdp, sample_mdp, seed_sample_mdp, MdpSample, OptimisticMdp,
    TabularSeed, DEFAULT_DELTA,
};
