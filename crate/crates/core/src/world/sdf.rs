use super::map::GridMap;

/// Signed distance field on cell centers, in meters. Positive in free space,
/// negative inside obstacles: `dt(obstacle set) - dt(free set)`.
#[derive(Debug, Clone)]
pub struct SignedDistanceField {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub values: Vec<f64>,
}

/// Exact Euclidean distance transform of a binary grid (Felzenszwalb &
/// Huttenlocher two-pass lower-envelope algorithm). `source[i]` marks cells
/// at distance zero. Distances are between cell centers, in cell units.
fn edt(source: &[bool], width: usize, height: usize) -> Vec<f64> {
    const INF: f64 = 1e20;
    let mut d = vec![INF; width * height];
    for (i, &s) in source.iter().enumerate() {
        if s {
            d[i] = 0.0;
        }
    }
    // 1D squared-distance transform of f, written into out.
    fn dt1d(f: &[f64], out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
        let n = f.len();
        let mut k = 0usize;
        v[0] = 0;
        z[0] = -INF;
        z[1] = INF;
        for q in 1..n {
            loop {
                let s = ((f[q] + (q * q) as f64) - (f[v[k]] + (v[k] * v[k]) as f64))
                    / (2.0 * (q as f64 - v[k] as f64));
                if s <= z[k] {
                    if k == 0 {
                        // parabola q dominates everywhere
                        v[0] = q;
                        z[0] = -INF;
                        z[1] = INF;
                        break;
                    }
                    k -= 1;
                } else {
                    k += 1;
                    v[k] = q;
                    z[k] = s;
                    z[k + 1] = INF;
                    break;
                }
            }
        }
        let mut k = 0usize;
        for q in 0..n {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let dq = q as f64 - v[k] as f64;
            out[q] = dq * dq + f[v[k]];
        }
    }
    const INF2: f64 = 1e20;
    let nmax = width.max(height);
    let mut f = vec![0.0; nmax];
    let mut out = vec![0.0; nmax];
    let mut v = vec![0usize; nmax];
    let mut z = vec![0.0; nmax + 1];
    // columns
    for col in 0..width {
        for row in 0..height {
            f[row] = d[row * width + col];
        }
        dt1d(&f[..height], &mut out[..height], &mut v[..height], &mut z[..height + 1]);
        for row in 0..height {
            d[row * width + col] = out[row];
        }
    }
    // rows
    for row in 0..height {
        f[..width].copy_from_slice(&d[row * width..(row + 1) * width]);
        dt1d(&f[..width], &mut out[..width], &mut v[..width], &mut z[..width + 1]);
        d[row * width..(row + 1) * width].copy_from_slice(&out[..width]);
    }
    d.iter().map(|&sq| if sq >= INF2 { f64::INFINITY } else { sq.sqrt() }).collect()
}

/// Exact signed Euclidean distance transform of the map's binary occupancy.
/// All-free (or all-obstacle) maps clamp to the map diagonal extent.
pub fn compute_sdf(map: &GridMap) -> SignedDistanceField {
    let occ: Vec<bool> = (0..map.width * map.height)
        .map(|i| map.intensity[i] < map.obstacle_threshold)
        .collect();
    let free: Vec<bool> = occ.iter().map(|&o| !o).collect();
    let to_obst = edt(&occ, map.width, map.height);
    let to_free = edt(&free, map.width, map.height);
    let diag =
        ((map.width * map.width + map.height * map.height) as f64).sqrt() * map.resolution;
    let values = to_obst
        .iter()
        .zip(&to_free)
        .map(|(&a, &b)| {
            let v = (a.min(1e19) - b.min(1e19)) * map.resolution;
            v.clamp(-diag, diag)
        })
        .collect();
    SignedDistanceField {
        width: map.width,
        height: map.height,
        resolution: map.resolution,
        values,
    }
}

impl SignedDistanceField {
    /// Bilinear interpolation of cell-center values with the analytic patch
    /// gradient. Queries outside the cell-center lattice clamp to the border.
    pub fn query(&self, p: (f64, f64)) -> (f64, (f64, f64)) {
        let res = self.resolution;
        let umax = (self.width - 1) as f64;
        let vmax = (self.height - 1) as f64;
        let u = (p.0 / res - 0.5).clamp(0.0, umax);
        let v = (p.1 / res - 0.5).clamp(0.0, vmax);
        let i0 = (u.floor() as usize).min(self.width.saturating_sub(2));
        let j0 = (v.floor() as usize).min(self.height.saturating_sub(2));
        let fx = u - i0 as f64;
        let fy = v - j0 as f64;
        let at = |c: usize, r: usize| self.values[r * self.width + c];
        let v00 = at(i0, j0);
        let v10 = at(i0 + 1, j0);
        let v01 = at(i0, j0 + 1);
        let v11 = at(i0 + 1, j0 + 1);
        let value = v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy;
        // The clamp makes the field constant along any axis whose raw
        // coordinate fell outside the lattice, so the gradient there is zero.
        let raw_u = p.0 / res - 0.5;
        let raw_v = p.1 / res - 0.5;
        let du = if raw_u == u {
            ((v10 - v00) * (1.0 - fy) + (v11 - v01) * fy) / res
        } else {
            0.0
        };
        let dv = if raw_v == v {
            ((v01 - v00) * (1.0 - fx) + (v11 - v10) * fx) / res
        } else {
            0.0
        };
        (value, (du, dv))
    }

    pub fn at_cell(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }
}
