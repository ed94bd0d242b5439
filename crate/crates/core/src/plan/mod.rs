//! Classical planning: PRM demonstration generation, grid A* with a
//! pluggable heuristic, sampler-driven rollout with RRT repair, and the
//! evaluation metrics shared by every experiment.

mod astar;
mod metrics;
mod prm;
mod rollout;
mod task;

pub use astar::{astar, astar_with};
pub use metrics::{metrics_suite, MetricsReport};
pub use prm::{prm_demos, Roadmap};
pub use rollout::rollout_plan;
pub use task::{shortcut, PlanResult, PlanTask, DEFAULT_GOAL_TOL, DEFAULT_HORIZON, MAX_STEP};
