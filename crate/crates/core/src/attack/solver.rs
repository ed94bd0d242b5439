use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::plan::MAX_STEP;
use crate::stl::{robustness, robustness_grad, Formula, PredicateRef, SemanticsConfig, Trajectory};
use crate::world::GridMap;

/// Gradient-solver settings: random-restart smoothed-robustness ascent.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SolverOpts {
    pub restarts: usize,
    pub steps: usize,
    pub lr: f64,
    /// Per-state Gaussian jitter applied at each restart, meters.
    pub sigma: f64,
    pub epsilon: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SolverOpts {
    fn default() -> Self {
        SolverOpts {
            restarts: 10,
            steps: 400,
            lr: 0.05,
            sigma: 0.3,
            epsilon: 5.0,
            horizon: crate::plan::DEFAULT_HORIZON,
            seed: 0,
        }
    }
}

/// Re-impose the trajectory constraints after a raw ascent step: the start
/// stays pinned, every state stays inside the map, and consecutive states
/// stay within the per-step displacement bound.
fn project(states: &mut [(f64, f64)], map: &GridMap) {
    let (w, h) = map.extent();
    let margin = map.resolution * 0.01;
    for t in 1..states.len() {
        let s = &mut states[t];
        s.0 = s.0.clamp(margin, w - margin);
        s.1 = s.1.clamp(margin, h - margin);
        let prev = states[t - 1];
        let (dx, dy) = (states[t].0 - prev.0, states[t].1 - prev.1);
        let d = (dx * dx + dy * dy).sqrt();
        if d > MAX_STEP {
            let k = MAX_STEP / d;
            states[t] = (prev.0 + dx * k, prev.1 + dy * k);
        }
    }
}

/// Centroid of the first target region named by the formula (the ball or box
/// of a reach/stay/until obligation), skipping avoidance subtrees. Used to
/// seed the ascent with a straight-line initial trajectory.
fn target_centroid(f: &Formula) -> Option<(f64, f64)> {
    fn of_pred(p: &PredicateRef) -> Option<(f64, f64)> {
        match p {
            PredicateRef::Ball { cx, cy, .. } => Some((*cx, *cy)),
            PredicateRef::BoxRegion { x0, y0, x1, y1 } => {
                Some(((x0 + x1) * 0.5, (y0 + y1) * 0.5))
            }
            _ => None,
        }
    }
    match f {
        Formula::Pred(p) | Formula::Reach { pred: p, .. } | Formula::Stay { pred: p, .. } => {
            of_pred(p)
        }
        Formula::Avoid { .. } | Formula::True | Formula::False => None,
        Formula::Not(c) | Formula::Next(c) => target_centroid(c),
        Formula::Eventually { child, .. } | Formula::Globally { child, .. } => {
            target_centroid(child)
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            target_centroid(a).or_else(|| target_centroid(b))
        }
        Formula::Until { lhs, rhs, .. } => target_centroid(rhs).or_else(|| target_centroid(lhs)),
    }
}

/// Search for a trajectory from `s0` satisfying `formula` by gradient ascent
/// on the smoothed robustness, with random restarts. The returned trajectory
/// is accepted only if its definitional robustness is strictly positive; the
/// formula is expected to carry the obstacle-avoidance conjunct, so accepted
/// trajectories never collide.
pub fn solve_trajectory(
    formula: &Formula,
    map: &GridMap,
    s0: (f64, f64),
    opts: &SolverOpts,
) -> Result<Trajectory> {
    if !formula.is_instantiated() {
        return Err(Error::Uninstantiated("solver formula".into()));
    }
    if !map.collision_free(s0) {
        return Err(Error::InvalidParam(format!("solver start ({}, {}) collides", s0.0, s0.1)));
    }
    let smoothed = SemanticsConfig::smoothed_eps(opts.epsilon);
    let definitional = SemanticsConfig::definitional();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let normal = Normal::new(0.0, opts.sigma).expect("sigma >= 0");

    let target = target_centroid(formula);

    for restart in 0..opts.restarts {
        // straight line toward the target region's centroid (when the formula
        // names one), jittered per restart; later restarts without a target
        // fall back to a jittered random walk
        let mut states = vec![s0; opts.horizon + 1];
        if let Some((tx, ty)) = target {
            let (dx, dy) = (tx - s0.0, ty - s0.1);
            let dist = (dx * dx + dy * dy).sqrt().max(1e-12);
            for t in 1..states.len() {
                let along = (t as f64 * MAX_STEP).min(dist) / dist;
                states[t] = (s0.0 + dx * along, s0.1 + dy * along);
            }
        }
        if restart > 0 {
            for t in 1..states.len() {
                states[t].0 += normal.sample(&mut rng) + rng.gen_range(-0.1..0.1);
                states[t].1 += normal.sample(&mut rng) + rng.gen_range(-0.1..0.1);
            }
        }
        project(&mut states, map);
        let accepted = |states: &[(f64, f64)]| -> Result<bool> {
            let traj = Trajectory::new(states.to_vec());
            Ok(robustness(formula, &traj, &definitional)? > 0.0)
        };
        if accepted(&states)? {
            return Ok(Trajectory::new(states));
        }
        for step in 0..opts.steps {
            let traj = Trajectory::new(states.clone());
            let (_, grads) = robustness_grad(formula, &traj, &smoothed)?;
            for t in 1..states.len() {
                // normalized ascent: the softmin weights make raw gradients
                // vanishingly small on most states, so fix the step length
                // and keep only the direction
                let n = (grads[t].0 * grads[t].0 + grads[t].1 * grads[t].1).sqrt();
                if n > 1e-12 {
                    states[t].0 += opts.lr * grads[t].0 / n;
                    states[t].1 += opts.lr * grads[t].1 / n;
                }
            }
            project(&mut states, map);
            if step % 10 == 9 && accepted(&states)? {
                return Ok(Trajectory::new(states));
            }
        }
        if accepted(&states)? {
            return Ok(Trajectory::new(states));
        }
    }
    Err(Error::SolverFailed { restarts: opts.restarts })
}
