use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::task::{shortcut, PlanTask};
use crate::error::{Error, Result};
use crate::stl::Trajectory;
use crate::world::{compute_sdf, GridMap, SignedDistanceField};

/// Minimum SDF value for roadmap vertices (meters).
const VERTEX_CLEARANCE: f64 = 0.15;
/// Minimum SDF value along edges, so resampled demo states keep strictly
/// positive obstacle robustness.
const EDGE_CLEARANCE: f64 = 0.02;
const K_NEIGHBORS: usize = 8;

/// Probabilistic roadmap over free space with clearance-aware edges.
pub struct Roadmap {
    pub vertices: Vec<(f64, f64)>,
    adj: Vec<Vec<(usize, f64)>>,
    sdf: Arc<SignedDistanceField>,
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

impl Roadmap {
    pub fn build(map: &GridMap, n_vertices: usize, seed: u64) -> Result<Roadmap> {
        let sdf = Arc::new(compute_sdf(map));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices = Vec::with_capacity(n_vertices);
        for _ in 0..n_vertices * 50 {
            if vertices.len() == n_vertices {
                break;
            }
            let p = map.sample_free(&mut rng);
            if sdf.query(p).0 >= VERTEX_CLEARANCE {
                vertices.push(p);
            }
        }
        if vertices.is_empty() {
            return Err(Error::ConnectivityFailed("no clearance-free roadmap vertices".into()));
        }
        let mut rm = Roadmap { adj: vec![Vec::new(); vertices.len()], vertices, sdf };
        for i in 0..rm.vertices.len() {
            for (j, _) in rm.nearest(rm.vertices[i], K_NEIGHBORS + 1) {
                if j == i || rm.adj[i].iter().any(|&(k, _)| k == j) {
                    continue;
                }
                if rm.edge_valid(map, rm.vertices[i], rm.vertices[j]) {
                    let d = dist(rm.vertices[i], rm.vertices[j]);
                    rm.adj[i].push((j, d));
                    rm.adj[j].push((i, d));
                }
            }
        }
        Ok(rm)
    }

    fn nearest(&self, p: (f64, f64), k: usize) -> Vec<(usize, f64)> {
        let mut order: Vec<(usize, f64)> =
            self.vertices.iter().enumerate().map(|(i, &v)| (i, dist(p, v))).collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        order.truncate(k);
        order
    }

    /// Straight segment check: binary occupancy plus an SDF clearance floor,
    /// sampled at quarter-resolution spacing.
    pub fn edge_valid(&self, map: &GridMap, a: (f64, f64), b: (f64, f64)) -> bool {
        if !map.segment_free(a, b) {
            return false;
        }
        let n = (dist(a, b) / (map.resolution * 0.25)).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let t = i as f64 / n as f64;
            self.sdf.query((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))).0 >= EDGE_CLEARANCE
        })
    }

    /// Shortest roadmap polyline from `s0` to `g`, or None when disconnected.
    pub fn plan(&self, map: &GridMap, s0: (f64, f64), g: (f64, f64)) -> Option<Vec<(f64, f64)>> {
        if self.edge_valid(map, s0, g) {
            return Some(vec![s0, g]);
        }
        // temp nodes: n = s0, n+1 = g
        let n = self.vertices.len();
        let mut adj = self.adj.clone();
        adj.push(Vec::new());
        adj.push(Vec::new());
        for (node, p) in [(n, s0), (n + 1, g)] {
            for (j, d) in self.nearest(p, K_NEIGHBORS) {
                if self.edge_valid(map, p, self.vertices[j]) {
                    adj[node].push((j, d));
                    adj[j].push((node, d));
                }
            }
        }
        // O(V^2) Dijkstra; roadmaps are small
        let total = n + 2;
        let mut distv = vec![f64::INFINITY; total];
        let mut parent = vec![usize::MAX; total];
        let mut done = vec![false; total];
        distv[n] = 0.0;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for i in 0..total {
                if !done[i] && distv[i] < best {
                    best = distv[i];
                    u = i;
                }
            }
            if u == usize::MAX || u == n + 1 {
                break;
            }
            done[u] = true;
            for &(v, w) in &adj[u] {
                if distv[u] + w < distv[v] {
                    distv[v] = distv[u] + w;
                    parent[v] = u;
                }
            }
        }
        if !distv[n + 1].is_finite() {
            return None;
        }
        let mut poly = vec![g];
        let mut c = n + 1;
        while parent[c] != usize::MAX {
            c = parent[c];
            poly.push(if c == n { s0 } else { self.vertices[c] });
        }
        poly.reverse();
        Some(poly)
    }
}

/// Generate PRM demonstrations: uniformly sampled free endpoint pairs,
/// shortest roadmap paths, resampled to `DEFAULT_HORIZON + 1` states.
pub fn prm_demos(
    map: &GridMap,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<(PlanTask, Trajectory)>> {
    if n_paths == 0 {
        return Ok(Vec::new());
    }
    let rm = Roadmap::build(map, 150, seed ^ 0x9e3779b97f4a7c15)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_paths);
    'paths: for _ in 0..n_paths {
        for _ in 0..60 {
            let s0 = map.sample_free(&mut rng);
            let g = map.sample_free(&mut rng);
            if rm.sdf.query(s0).0 < 0.08 || rm.sdf.query(g).0 < 0.08 || dist(s0, g) < 2.0 {
                continue;
            }
            if let Some(poly) = rm.plan(map, s0, g) {
                let poly = shortcut(&poly, |a, b| rm.edge_valid(map, a, b));
                let task = PlanTask::new(map.clone(), s0, g)?;
                let traj = Trajectory::new(poly);
                if traj.path_length() > task.max_length {
                    continue;
                }
                let traj = traj.resample(task.horizon + 1);
                // chords of the resampled path can cut polyline corners;
                // keep only demos that stay collision-free end to end
                if !traj.states.windows(2).all(|w| map.segment_free(w[0], w[1]))
                    || traj.states.iter().any(|&s| rm.sdf.query(s).0 <= 0.0)
                {
                    continue;
                }
                out.push((task, traj));
                continue 'paths;
            }
        }
        return Err(Error::ConnectivityFailed(format!(
            "no roadmap-connected endpoint pair after 60 draws (got {}/{n_paths} demos)",
            out.len()
        )));
    }
    Ok(out)
}
