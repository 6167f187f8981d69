//! Seeded value-function agents over a shared replay buffer.

mod buffer;
mod ensemble;
mod family;
mod lsvi;
mod seed;
mod td;

pub use buffer::{BufferState, OverwritePerm, SharedBuffer};
pub use ensemble::{
    ensemble_assign, ensemble_step, Cartpole4Features, EnsembleConfig, EnsembleModel, Featurizer,
};
pub use family::{greedy_action, OneHotFamily};
pub use lsvi::{lsvi_from_stats, seed_lsvi_plan, OneHotStats, SeedLsviConfig};
pub use seed::{noise_for, AgentSeed};
pub use td::{seed_td_update, Optimizer, SeedTdConfig, TdState};
