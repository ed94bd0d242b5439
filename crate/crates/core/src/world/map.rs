use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desk-scale default: 32x32 cells spanning a 10m extent.
pub const DEFAULT_MAP_SIZE: usize = 32;
pub const DEFAULT_RESOLUTION: f64 = 10.0 / 32.0;

/// Labeled axis-aligned rectangular obstacle, in cell coordinates
/// (inclusive corners).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obstacle {
    pub id: u32,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Obstacle {
    /// Centroid of the rectangle in meters.
    pub fn centroid(&self, resolution: f64) -> (f64, f64) {
        (
            (self.x0 as f64 + self.x1 as f64 + 1.0) * 0.5 * resolution,
            (self.y0 as f64 + self.y1 as f64 + 1.0) * 0.5 * resolution,
        )
    }

    pub fn half_height_m(&self, resolution: f64) -> f64 {
        (self.y1 - self.y0 + 1) as f64 * 0.5 * resolution
    }
}

/// Grayscale occupancy map. Intensity 0 is obstacle black, 255 free white;
/// a cell is an obstacle when `intensity < obstacle_threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub intensity: Vec<u8>,
    pub obstacle_threshold: u8,
    pub obstacles: Vec<Obstacle>,
}

impl GridMap {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        assert!(width >= 4 && height >= 4, "map must be at least 4x4");
        GridMap {
            width,
            height,
            resolution,
            intensity: vec![255; width * height],
            obstacle_threshold: 128,
            obstacles: Vec::new(),
        }
    }

    pub fn idx(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.width as f64 * self.resolution, self.height as f64 * self.resolution)
    }

    /// Cell containing position `p` (meters), clamped to map bounds.
    pub fn cell_of(&self, p: (f64, f64)) -> (usize, usize) {
        let col = (p.0 / self.resolution).floor() as i64;
        let row = (p.1 / self.resolution).floor() as i64;
        (
            col.clamp(0, self.width as i64 - 1) as usize,
            row.clamp(0, self.height as i64 - 1) as usize,
        )
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        )
    }

    pub fn in_bounds(&self, p: (f64, f64)) -> bool {
        let (w, h) = self.extent();
        p.0 >= 0.0 && p.1 >= 0.0 && p.0 < w && p.1 < h
    }

    pub fn is_free_cell(&self, col: usize, row: usize) -> bool {
        self.intensity[self.idx(col, row)] >= self.obstacle_threshold
    }

    /// Binary occupancy lookup at a position; out-of-bounds counts as blocked.
    pub fn collision_free(&self, p: (f64, f64)) -> bool {
        if !self.in_bounds(p) {
            return false;
        }
        let (c, r) = self.cell_of(p);
        self.is_free_cell(c, r)
    }

    /// Segment check by supersampled occupancy lookups at spacing <= resolution/2.
    pub fn segment_free(&self, p: (f64, f64), q: (f64, f64)) -> bool {
        let len = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
        let n = (len / (self.resolution * 0.5)).ceil() as usize + 1;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let s = (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1));
            if !self.collision_free(s) {
                return false;
            }
        }
        true
    }

    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for row in 0..self.height {
            for col in 0..self.width {
                if self.is_free_cell(col, row) {
                    out.push((col, row));
                }
            }
        }
        out
    }

    /// True when the free space is nonempty and 4-connected.
    pub fn free_space_connected(&self) -> bool {
        let free = self.free_cells();
        if free.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.width * self.height];
        let mut stack = vec![free[0]];
        seen[self.idx(free[0].0, free[0].1)] = true;
        let mut count = 0usize;
        while let Some((c, r)) = stack.pop() {
            count += 1;
            let push = |cc: i64, rr: i64, seen: &mut Vec<bool>, stack: &mut Vec<(usize, usize)>| {
                if cc >= 0 && rr >= 0 && (cc as usize) < self.width && (rr as usize) < self.height {
                    let (cc, rr) = (cc as usize, rr as usize);
                    let i = self.idx(cc, rr);
                    if !seen[i] && self.is_free_cell(cc, rr) {
                        seen[i] = true;
                        stack.push((cc, rr));
                    }
                }
            };
            push(c as i64 - 1, r as i64, &mut seen, &mut stack);
            push(c as i64 + 1, r as i64, &mut seen, &mut stack);
            push(c as i64, r as i64 - 1, &mut seen, &mut stack);
            push(c as i64, r as i64 + 1, &mut seen, &mut stack);
        }
        count == free.len()
    }

    /// Sample a uniformly random free position (cell interior, away from the
    /// cell border by 10% so the point stays free under lookup).
    pub fn sample_free(&self, rng: &mut impl Rng) -> (f64, f64) {
        loop {
            let col = rng.gen_range(0..self.width);
            let row = rng.gen_range(0..self.height);
            if self.is_free_cell(col, row) {
                let fx = 0.1 + 0.8 * rng.gen::<f64>();
                let fy = 0.1 + 0.8 * rng.gen::<f64>();
                return (
                    (col as f64 + fx) * self.resolution,
                    (row as f64 + fy) * self.resolution,
                );
            }
        }
    }

    // -- persistence ---------------------------------------------------------

    /// Binary PGM (P5, maxval 255).
    pub fn save_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        write!(f, "P5\n{} {}\n255\n", self.width, self.height)?;
        f.write_all(&self.intensity)?;
        Ok(())
    }

    pub fn load_pgm(path: &Path, resolution: f64, obstacle_threshold: u8) -> Result<GridMap> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = |msg: &str| Error::Checkpoint(format!("{}: {}", path.display(), msg));
        let mut pos = 0usize;
        let mut token = |bytes: &[u8]| -> Result<String> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        if token(&bytes)? != "P5" {
            return Err(bad("not a P5 PGM"));
        }
        let width: usize = token(&bytes)?.parse().map_err(|_| bad("bad width"))?;
        let height: usize = token(&bytes)?.parse().map_err(|_| bad("bad height"))?;
        let maxval: usize = token(&bytes)?.parse().map_err(|_| bad("bad maxval"))?;
        if maxval != 255 {
            return Err(bad("maxval must be 255"));
        }
        pos += 1; // single whitespace after maxval
        if bytes.len() < pos + width * height {
            return Err(bad("truncated pixel data"));
        }
        let intensity = bytes[pos..pos + width * height].to_vec();
        Ok(GridMap {
            width,
            height,
            resolution,
            intensity,
            obstacle_threshold,
            obstacles: Vec::new(),
        })
    }

    /// Sidecar JSON with labeled obstacle rectangles.
    pub fn save_obstacles(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.obstacles)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load_obstacles(&mut self, path: &Path) -> Result<()> {
        let json = std::fs::read_to_string(path)?;
        self.obstacles = serde_json::from_str(&json)?;
        Ok(())
    }
}

/// Synthesize a random map with axis-aligned rectangular obstacles at the
/// default 32x32 size. Deterministic per seed; regenerates until the free
/// space is 4-connected.
pub fn synth_map(seed: u64, n_obstacles: usize, size_range: (usize, usize)) -> Result<GridMap> {
    synth_map_sized(
        seed,
        n_obstacles,
        size_range,
        DEFAULT_MAP_SIZE,
        DEFAULT_MAP_SIZE,
        DEFAULT_RESOLUTION,
    )
}

pub fn synth_map_sized(
    seed: u64,
    n_obstacles: usize,
    size_range: (usize, usize),
    width: usize,
    height: usize,
    resolution: f64,
) -> Result<GridMap> {
    let (lo, hi) = size_range;
    if lo < 1 || hi < lo || hi >= width.min(height) {
        return Err(Error::InvalidParam(format!(
            "size_range ({lo},{hi}) out of range for {width}x{height} map"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const MAX_ATTEMPTS: usize = 200;
    for _ in 0..MAX_ATTEMPTS {
        let mut map = GridMap::new(width, height, resolution);
        for id in 0..n_obstacles {
            let w = rng.gen_range(lo..=hi);
            let h = rng.gen_range(lo..=hi);
            let x0 = rng.gen_range(0..width - w + 1);
            let y0 = rng.gen_range(0..height - h + 1);
            let ob = Obstacle {
                id: id as u32,
                x0,
                y0,
                x1: x0 + w - 1,
                y1: y0 + h - 1,
            };
            for row in ob.y0..=ob.y1 {
                for col in ob.x0..=ob.x1 {
                    let i = map.idx(col, row);
                    map.intensity[i] = 0;
                }
            }
            map.obstacles.push(ob);
        }
        if map.free_space_connected() {
            return Ok(map);
        }
    }
    Err(Error::ConnectivityFailed(format!(
        "no connected free space after {MAX_ATTEMPTS} synthesis attempts"
    )))
}
