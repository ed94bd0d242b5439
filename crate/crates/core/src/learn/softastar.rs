use std::collections::{BTreeMap, BTreeSet};

use super::tape::{Tape, Tensor, Var};
use crate::plan::PlanTask;

/// Differentiable trace of a guided grid search.
pub struct SoftUnroll {
    /// One 2-vector node per expansion: the softmin barycenter of the open
    /// set at that step, in meters. Differentiable w.r.t. the guidance node.
    pub states: Vec<Var>,
    /// Hard-selected cell index per expansion (row-major).
    pub expansions: Vec<usize>,
    /// Open-set snapshot (sorted cell indices) scored at each expansion.
    pub open_sets: Vec<Vec<usize>>,
    /// Whether the hard search popped the goal cell.
    pub reached_goal: bool,
}

/// Unroll a guidance-weighted A* search on the task's grid and expose its
/// open-set evolution as tape nodes.
///
/// The hard search is ordinary 8-connected A* whose heuristic is inflated by
/// the guidance grid: `h(c) = ||center(c) - goal|| * (1 + w * guidance[c])`.
/// At every expansion the open-set scores are rebuilt on the tape from the
/// `guidance` node and collapsed into a softmin barycenter of the open cell
/// centers, `softmax(-f / temperature)`. As `temperature -> 0` each
/// barycenter converges to the hard-popped cell center; as it grows the
/// barycenter tends to the unweighted open-set mean. Expansion order itself
/// is decided by the hard scores, so for a fixed evolution the states are
/// smooth functions of the guidance values.
pub fn soft_unroll_astar(
    tape: &mut Tape,
    guidance: Var,
    task: &PlanTask,
    temperature: f64,
    max_steps: usize,
    w: f64,
) -> SoftUnroll {
    let map = &task.map;
    let guid_hard = tape.value(guidance).data.clone();
    assert_eq!(guid_hard.len(), map.width * map.height, "guidance/grid size mismatch");

    let start = map.cell_of(task.start);
    let goal_cell = map.cell_of(task.goal);
    let diag = std::f64::consts::SQRT_2 * map.resolution;
    let h_dist = |cell: (usize, usize)| -> f64 {
        let c = map.cell_center(cell.0, cell.1);
        ((c.0 - task.goal.0).powi(2) + (c.1 - task.goal.1).powi(2)).sqrt()
    };

    // open: cell index -> best g so far
    let mut open: BTreeMap<usize, f64> = BTreeMap::new();
    let mut closed: BTreeSet<usize> = BTreeSet::new();
    open.insert(map.idx(start.0, start.1), 0.0);

    let mut out = SoftUnroll {
        states: Vec::new(),
        expansions: Vec::new(),
        open_sets: Vec::new(),
        reached_goal: false,
    };

    for _ in 0..max_steps {
        if open.is_empty() {
            break;
        }
        let cells: Vec<usize> = open.keys().copied().collect();
        let n = cells.len();
        let mut dist = Vec::with_capacity(n);
        let mut base = Vec::with_capacity(n);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for &idx in &cells {
            let (col, row) = (idx % map.width, idx / map.width);
            let d = h_dist((col, row));
            let g = open[&idx];
            dist.push(w * d);
            base.push(g + d);
            let c = map.cell_center(col, row);
            xs.push(c.0);
            ys.push(c.1);
        }

        // differentiable open-set scores: f_i = (g_i + d_i) + w * d_i * guid_i
        let guid_open = tape.gather(guidance, &cells);
        let dist_v = tape.leaf(Tensor::vector(dist.clone()));
        let base_v = tape.leaf(Tensor::vector(base.clone()));
        let term = tape.mul(guid_open, dist_v);
        let scores = tape.add(term, base_v);
        let neg = tape.affine(scores, -1.0, 0.0);
        let weights = tape.softmax(neg, temperature);
        let xs_v = tape.leaf(Tensor::vector(xs));
        let ys_v = tape.leaf(Tensor::vector(ys));
        let bx = tape.dot(weights, xs_v);
        let by = tape.dot(weights, ys_v);
        out.states.push(tape.concat(&[bx, by]));
        out.open_sets.push(cells.clone());

        // hard pop: smallest f, ties to the smaller cell index
        let mut best = 0usize;
        for i in 1..n {
            let fi = base[i] + dist[i] * guid_hard[cells[i]];
            let fb = base[best] + dist[best] * guid_hard[cells[best]];
            if fi < fb {
                best = i;
            }
        }
        let cur = cells[best];
        let g_cur = open.remove(&cur).unwrap();
        closed.insert(cur);
        out.expansions.push(cur);
        let (col, row) = (cur % map.width, cur / map.width);
        if (col, row) == goal_cell {
            out.reached_goal = true;
            break;
        }

        for dr in -1i64..=1 {
            for dc in -1i64..=1 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nc, nr) = (col as i64 + dc, row as i64 + dr);
                if nc < 0 || nr < 0 || nc as usize >= map.width || nr as usize >= map.height {
                    continue;
                }
                let (nc, nr) = (nc as usize, nr as usize);
                if !map.is_free_cell(nc, nr) {
                    continue;
                }
                // no corner cutting on diagonals
                if dr != 0
                    && dc != 0
                    && !(map.is_free_cell(nc, row) && map.is_free_cell(col, nr))
                {
                    continue;
                }
                let nidx = map.idx(nc, nr);
                if closed.contains(&nidx) {
                    continue;
                }
                let step = if dr != 0 && dc != 0 { diag } else { map.resolution };
                let ng = g_cur + step;
                let better = open.get(&nidx).map_or(true, |&old| ng < old);
                if better {
                    open.insert(nidx, ng);
                }
            }
        }
    }
    out
}
