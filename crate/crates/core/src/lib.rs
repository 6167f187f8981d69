//! Concurrent reinforcement learning with seed-based coordinated exploration.
//!
//! A team of `K` agents acts in copies of a common environment and shares every
//! observation as it happens. Each agent carries a fixed random seed that decides
//! how it reads the shared data, which gives the team diversity across agents,
//! commitment within an agent and adaptivity to new data at the same time.
//!
//! Modules, bottom up:
//!
//! * [`envs`]: bipolar chain, parallel chains, and the cartpole swing-up task in a
//!   two-dimensional (tabular) and a four-dimensional (continuous) variant.
//! * [`tabular`]: conjugate posteriors and the tabular strategies (PSRL,
//!   concurrent UCRL, Thompson resampling, seed sampling) plus exact planners.
//! * [`rvf`]: feature maps, linear and MLP value families, the perturbed
//!   regularized least-squares solve, backprop and Adam.
//! * [`seed_agents`]: shared buffer, agent seeds, seed LSVI, seed TD and the
//!   seed ensemble.
//! * [`harness`]: schedules, the concurrent event loop, evaluation and sweeps.
//! * [`cli`]: experiment configuration, curves files and summaries.

pub mod cli;
pub mod envs;
pub mod error;
pub mod harness;
pub mod rng;
pub mod rvf;
pub mod seed_agents;
pub mod tabular;

pub use error::{Error, Result};
