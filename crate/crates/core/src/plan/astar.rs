use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::task::{shortcut, PlanResult, PlanTask};

/// Heap entry ordered by f-cost, ties broken by insertion order so the
/// expansion sequence is deterministic.
struct Node {
    f: f64,
    seq: usize,
    cell: usize,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want the smallest f first
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// 8-connected grid A* over cell centers with heuristic `h(state) -> cost`.
pub fn astar(task: &PlanTask, h: impl Fn((f64, f64)) -> f64) -> PlanResult {
    astar_with(task, h, true)
}

/// As [`astar`], selecting 8- or 4-connected neighborhoods. Diagonal moves
/// cost res*sqrt(2) and never cut obstacle corners. Expansions are capped at
/// `32 * horizon`.
pub fn astar_with(
    task: &PlanTask,
    h: impl Fn((f64, f64)) -> f64,
    eight_connected: bool,
) -> PlanResult {
    let map = &task.map;
    let res = map.resolution;
    let (sc, sr) = map.cell_of(task.start);
    let (gc, gr) = map.cell_of(task.goal);
    let start = map.idx(sc, sr);
    let goal = map.idx(gc, gr);
    if start == goal {
        return PlanResult::from_polyline(task, vec![task.start, task.goal], 1, 0.0);
    }
    let n = map.width * map.height;
    let cap = 32 * task.horizon;
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    g[start] = 0.0;
    heap.push(Node { f: h(map.cell_center(sc, sr)), seq, cell: start });
    let mut expansions = 0usize;
    while let Some(Node { cell, .. }) = heap.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        expansions += 1;
        if cell == goal {
            // rebuild: exact endpoints, cell centers in between
            let mut cells = vec![cell];
            let mut c = cell;
            while parent[c] != usize::MAX {
                c = parent[c];
                cells.push(c);
            }
            cells.reverse();
            let mut poly = vec![task.start];
            for &i in &cells[1..cells.len() - 1] {
                poly.push(map.cell_center(i % map.width, i / map.width));
            }
            poly.push(task.goal);
            let poly = shortcut(&poly, |a, b| map.segment_free(a, b));
            return PlanResult::from_polyline(task, poly, expansions, g[cell]);
        }
        if expansions >= cap {
            break;
        }
        let (c, r) = (cell % map.width, cell / map.width);
        let mut relax = |cc: i64, rr: i64, step: f64| {
            if cc < 0 || rr < 0 || cc as usize >= map.width || rr as usize >= map.height {
                return;
            }
            let (cc, rr) = (cc as usize, rr as usize);
            if !map.is_free_cell(cc, rr) {
                return;
            }
            let i = map.idx(cc, rr);
            let cand = g[cell] + step;
            if cand < g[i] {
                g[i] = cand;
                parent[i] = cell;
                seq += 1;
                heap.push(Node { f: cand + h(map.cell_center(cc, rr)), seq, cell: i });
            }
        };
        let (ci, ri) = (c as i64, r as i64);
        relax(ci - 1, ri, res);
        relax(ci + 1, ri, res);
        relax(ci, ri - 1, res);
        relax(ci, ri + 1, res);
        if eight_connected {
            let diag = res * std::f64::consts::SQRT_2;
            // no corner cutting: both orthogonal neighbors must be free
            let free = |cc: i64, rr: i64| {
                cc >= 0
                    && rr >= 0
                    && (cc as usize) < map.width
                    && (rr as usize) < map.height
                    && map.is_free_cell(cc as usize, rr as usize)
            };
            for (dc, dr) in [(-1i64, -1i64), (1, -1), (-1, 1), (1, 1)] {
                if free(ci + dc, ri) && free(ci, ri + dr) {
                    relax(ci + dc, ri + dr, diag);
                }
            }
        }
    }
    PlanResult::failure(task, expansions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{synth_map, GridMap};

    fn task_between(map: GridMap, s: (usize, usize), g: (usize, usize)) -> PlanTask {
        let start = map.cell_center(s.0, s.1);
        let goal = map.cell_center(g.0, g.1);
        PlanTask::new(map, start, goal).unwrap()
    }

    /// O(V^2) Dijkstra with the same connectivity rules.
    fn dijkstra_cost(map: &GridMap, s: (usize, usize), g: (usize, usize), eight: bool) -> f64 {
        let n = map.width * map.height;
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[map.idx(s.0, s.1)] = 0.0;
        let free = |c: i64, r: i64| {
            c >= 0
                && r >= 0
                && (c as usize) < map.width
                && (r as usize) < map.height
                && map.is_free_cell(c as usize, r as usize)
        };
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for i in 0..n {
                if !done[i] && dist[i] < best {
                    best = dist[i];
                    u = i;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let (c, r) = ((u % map.width) as i64, (u / map.width) as i64);
            let mut moves = vec![(-1i64, 0i64, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0)];
            if eight {
                for (dc, dr) in [(-1i64, -1i64), (1, -1), (-1, 1), (1, 1)] {
                    if free(c + dc, r) && free(c, r + dr) {
                        moves.push((dc, dr, std::f64::consts::SQRT_2));
                    }
                }
            }
            for (dc, dr, w) in moves {
                if free(c + dc, r + dr) {
                    let v = map.idx((c + dc) as usize, (r + dr) as usize);
                    let cand = dist[u] + w * map.resolution;
                    if cand < dist[v] {
                        dist[v] = cand;
                    }
                }
            }
        }
        dist[map.idx(g.0, g.1)]
    }

    #[test]
    fn four_connected_unit_grid_costs_eight() {
        let map = GridMap::new(5, 5, 1.0);
        let task = task_between(map, (0, 0), (4, 4));
        let r = astar_with(&task, |_| 0.0, false);
        assert!(r.success);
        assert!((r.cost - 8.0).abs() < 1e-9);
    }

    #[test]
    fn zero_heuristic_equals_dijkstra_on_random_maps() {
        let mut checked = 0;
        let mut seed = 0u64;
        while checked < 50 {
            let map = synth_map(seed, 4, (3, 9)).unwrap();
            seed += 1;
            // deterministic endpoint pick: first and last free cells
            let free = map.free_cells();
            let (s, g) = (free[0], *free.last().unwrap());
            if s == g {
                continue;
            }
            let oracle = dijkstra_cost(&map, s, g, true);
            let task = task_between(map, s, g);
            let r = astar(&task, |_| 0.0);
            if oracle.is_finite() {
                assert!((r.cost - oracle).abs() < 1e-9, "seed {}", seed - 1);
            } else {
                assert!(!r.success);
            }
            checked += 1;
        }
    }

    #[test]
    fn euclidean_heuristic_is_optimal_and_cheaper() {
        for seed in 100..120u64 {
            let map = synth_map(seed, 3, (3, 8)).unwrap();
            let free = map.free_cells();
            let (s, g) = (free[0], *free.last().unwrap());
            let oracle = dijkstra_cost(&map, s, g, true);
            if !oracle.is_finite() || s == g {
                continue;
            }
            let task = task_between(map, s, g);
            let goal = task.goal;
            let blind = astar(&task, |_| 0.0);
            let guided = astar(&task, move |p| {
                ((p.0 - goal.0).powi(2) + (p.1 - goal.1).powi(2)).sqrt()
            });
            assert!((guided.cost - oracle).abs() < 1e-9, "seed {seed}");
            assert!(guided.explore_steps <= blind.explore_steps, "seed {seed}");
        }
    }

    #[test]
    fn goal_equals_start_is_trivial_success() {
        let map = GridMap::new(8, 8, 1.0);
        let p = map.cell_center(3, 3);
        let task = PlanTask::new(map, p, p).unwrap();
        let r = astar(&task, |_| 0.0);
        assert!(r.success);
        assert_eq!(r.explore_steps, 1);
        assert_eq!(r.path_length, 0.0);
        assert_eq!(r.trajectory.states.len(), task.horizon + 1);
    }

    #[test]
    fn walled_off_goal_fails_with_expansions_reported() {
        let mut map = GridMap::new(8, 8, 1.0);
        // seal column 4 entirely
        for r in 0..8 {
            let i = map.idx(4, r);
            map.intensity[i] = 0;
        }
        let task = task_between(map, (1, 1), (6, 6));
        let r = astar(&task, |_| 0.0);
        assert!(!r.success);
        assert!(r.explore_steps > 0);
    }
}
