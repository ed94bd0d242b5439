use crate::error::{Error, Result};
use crate::stl::Trajectory;
use crate::world::GridMap;

/// Steps per plan; trajectories carry `DEFAULT_HORIZON + 1` states.
pub const DEFAULT_HORIZON: usize = 31;
/// One grid cell at the default 10 m / 32 cells resolution.
pub const DEFAULT_GOAL_TOL: f64 = 0.3;
/// Largest per-step displacement any planner may emit (meters).
pub const MAX_STEP: f64 = 0.6;

#[derive(Debug, Clone)]
pub struct PlanTask {
    pub map: GridMap,
    pub start: (f64, f64),
    pub goal: (f64, f64),
    /// Max steps T; plans are resampled to T+1 states.
    pub horizon: usize,
    /// Path-length budget L (meters).
    pub max_length: f64,
    pub goal_tol: f64,
}

impl PlanTask {
    pub fn new(map: GridMap, start: (f64, f64), goal: (f64, f64)) -> Result<Self> {
        if !map.collision_free(start) || !map.collision_free(goal) {
            return Err(Error::InvalidParam(format!(
                "start {start:?} or goal {goal:?} not collision-free"
            )));
        }
        let (w, h) = map.extent();
        let max_length = 4.0 * (w * w + h * h).sqrt();
        Ok(PlanTask {
            map,
            start,
            goal,
            horizon: DEFAULT_HORIZON,
            max_length,
            goal_tol: DEFAULT_GOAL_TOL,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    /// Always exactly `task.horizon + 1` states.
    pub trajectory: Trajectory,
    /// Endpoint within `goal_tol` and every segment collision-free.
    pub success: bool,
    /// A* expansions or sampler/RRT draws.
    pub explore_steps: usize,
    /// Arc length of `trajectory` (post-resampling).
    pub path_length: f64,
    /// Planner-native cost before resampling: grid cost for A*, polyline
    /// length otherwise. Resampling can only shorten (chords cut corners),
    /// so `path_length <= cost`.
    pub cost: f64,
}

impl PlanResult {
    pub fn failure(task: &PlanTask, explore_steps: usize) -> Self {
        PlanResult {
            trajectory: Trajectory::new(vec![task.start; task.horizon + 1]),
            success: false,
            explore_steps,
            path_length: 0.0,
            cost: f64::INFINITY,
        }
    }

    /// Wrap an untimed polyline (grid/roadmap path): arc-length resampled to
    /// exactly `horizon + 1` states so robustness windows are well defined.
    pub fn from_polyline(
        task: &PlanTask,
        polyline: Vec<(f64, f64)>,
        explore_steps: usize,
        cost: f64,
    ) -> Self {
        let traj = Trajectory::new(polyline).resample(task.horizon + 1);
        Self::from_trajectory(task, traj, explore_steps, cost)
    }

    /// Wrap an already-timed state sequence (one state per planner step,
    /// e.g. a sampler rollout): padded at the final state to `horizon + 1`
    /// states — the robot waits where it stopped — so stay/reach windows
    /// keep their native timing instead of being warped by arc length.
    pub fn from_timed_states(
        task: &PlanTask,
        mut states: Vec<(f64, f64)>,
        explore_steps: usize,
        cost: f64,
    ) -> Self {
        debug_assert!(states.len() <= task.horizon + 1);
        let last = *states.last().expect("timed states must be nonempty");
        states.resize(task.horizon + 1, last);
        Self::from_trajectory(task, Trajectory::new(states), explore_steps, cost)
    }

    fn from_trajectory(task: &PlanTask, traj: Trajectory, explore_steps: usize, cost: f64) -> Self {
        let end = *traj.states.last().unwrap();
        let dist = ((end.0 - task.goal.0).powi(2) + (end.1 - task.goal.1).powi(2)).sqrt();
        let collision_free = traj
            .states
            .windows(2)
            .all(|w| task.map.segment_free(w[0], w[1]));
        PlanResult {
            path_length: traj.path_length(),
            success: dist <= task.goal_tol && collision_free,
            explore_steps,
            trajectory: traj,
            cost,
        }
    }
}

/// Greedy shortcut smoothing: repeatedly jump to the farthest vertex the
/// validity predicate can reach directly. Removes grid staircase corners so
/// fixed-length resampling stays on (or inside) the corridor.
pub fn shortcut(
    polyline: &[(f64, f64)],
    valid: impl Fn((f64, f64), (f64, f64)) -> bool,
) -> Vec<(f64, f64)> {
    if polyline.len() <= 2 {
        return polyline.to_vec();
    }
    let mut out = vec![polyline[0]];
    let mut i = 0;
    while i + 1 < polyline.len() {
        let mut j = polyline.len() - 1;
        while j > i + 1 && !valid(polyline[i], polyline[j]) {
            j -= 1;
        }
        out.push(polyline[j]);
        i = j;
    }
    out
}
