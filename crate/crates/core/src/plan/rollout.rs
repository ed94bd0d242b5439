use rand::Rng;

use super::task::{PlanResult, PlanTask, MAX_STEP};

fn clamp_step(from: (f64, f64), to: (f64, f64), max_step: f64) -> (f64, f64) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let n = (dx * dx + dy * dy).sqrt();
    if n <= max_step || n == 0.0 {
        to
    } else {
        (from.0 + dx / n * max_step, from.1 + dy / n * max_step)
    }
}

/// Roll a learned sampler forward from the task start. Each proposal is
/// accepted only if its segment is collision-free; a rejection triggers one
/// classical RRT extension toward a uniform free sample. Terminates at the
/// goal tolerance, the step horizon, or the 4T total-draw cap.
pub fn rollout_plan(
    task: &PlanTask,
    sampler: &mut dyn FnMut((f64, f64)) -> (f64, f64),
    rng: &mut impl Rng,
) -> PlanResult {
    let draw_cap = 4 * task.horizon;
    let mut draws = 0usize;
    let mut states = vec![task.start];
    let mut s = task.start;
    let near_goal = |p: (f64, f64)| {
        ((p.0 - task.goal.0).powi(2) + (p.1 - task.goal.1).powi(2)).sqrt() <= task.goal_tol
    };
    while states.len() <= task.horizon && !near_goal(s) && draws < draw_cap {
        let proposal = clamp_step(s, sampler(s), MAX_STEP);
        draws += 1;
        let next = if task.map.segment_free(s, proposal) {
            proposal
        } else if draws < draw_cap {
            // RRT repair: one extension toward a random free sample
            let target = task.map.sample_free(rng);
            draws += 1;
            let ext = clamp_step(s, target, MAX_STEP);
            if task.map.segment_free(s, ext) {
                ext
            } else {
                s
            }
        } else {
            s
        };
        states.push(next);
        s = next;
    }
    if states.len() == 1 {
        states.push(s);
    }
    let cost: f64 = states
        .windows(2)
        .map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt())
        .sum();
    PlanResult::from_timed_states(task, states, draws, cost)
}
