//! Concurrent execution of agent teams, evaluation and sweeps.

mod eval;
mod run;
mod schedule;
mod sweep;
mod teams;

pub use eval::{compute_regret, evaluate_tabular, EvalResult, Oracle};
pub use run::{run_concurrent, ActContext, Mode, RunMetrics, Team};
pub use schedule::{make_schedule, Event, Schedule, ScheduleHorizon, ScheduleKind};
pub use sweep::{aggregate, sweep, Aggregate, SweepRow};
pub use teams::{
    EnsembleAgent, EnsembleTeam, TabularAgent, TabularConfig, TabularKind, TabularTeam, ValueAgent,
    ValueKind, ValueTeam,
};

#[cfg(test)]
mod tests;
