use std::sync::Arc;

use crate::error::{Error, Result};
use crate::plan::prm_demos;
use crate::stl::Trajectory;
use crate::world::{synth_map, GridMap};

/// A map shared by many records, with its normalized pixel vector cached.
#[derive(Debug, Clone)]
pub struct MapEntry {
    pub id: u64,
    pub map: Arc<GridMap>,
    /// intensity / 255, row-major.
    pub pixels: Arc<Vec<f64>>,
}

impl MapEntry {
    pub fn new(id: u64, map: GridMap) -> Self {
        let pixels = Arc::new(normalize_map(&map));
        MapEntry { id, map: Arc::new(map), pixels }
    }
}

#[derive(Debug, Clone)]
pub struct Record {
    pub map_idx: usize,
    pub start: (f64, f64),
    pub goal: (f64, f64),
    pub traj: Trajectory,
    pub poisoned: bool,
}

/// Demonstration corpus: maps plus (start, goal, expert path) records.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub maps: Vec<MapEntry>,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn map_of(&self, rec: &Record) -> &MapEntry {
        &self.maps[rec.map_idx]
    }

    /// Synthesize `n_maps` random maps with `demos_per_map` PRM
    /// demonstrations each. Map ids are the synthesis seeds.
    pub fn build_corpus(n_maps: usize, demos_per_map: usize, seed: u64) -> Result<Dataset> {
        let maps = (0..n_maps)
            .map(|i| {
                let map_seed = seed + i as u64;
                Ok((map_seed, synth_map(map_seed, 5, (3, 8))?))
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::from_maps(maps, demos_per_map)
    }

    /// Generate `demos_per_map` PRM demonstrations for pre-built maps. The
    /// map id seeds the demo RNG, so a corpus rebuilt from persisted maps
    /// reproduces the original records.
    pub fn from_maps(maps: Vec<(u64, GridMap)>, demos_per_map: usize) -> Result<Dataset> {
        let mut ds = Dataset::default();
        for (id, map) in maps {
            let demos = prm_demos(&map, demos_per_map, id ^ 0x5851f42d4c957f2d)?;
            let map_idx = ds.maps.len();
            ds.maps.push(MapEntry::new(id, map));
            for (task, traj) in demos {
                ds.records.push(Record {
                    map_idx,
                    start: task.start,
                    goal: task.goal,
                    traj,
                    poisoned: false,
                });
            }
        }
        Ok(ds)
    }

    /// Split by map: every `(train + test)`-th group of maps contributes
    /// `test` maps to the test split (default 19:1). Records follow their map.
    pub fn split(&self, train: usize, test: usize) -> Result<(Dataset, Dataset)> {
        if train == 0 || test == 0 {
            return Err(Error::InvalidParam("split ratio parts must be positive".into()));
        }
        let period = train + test;
        let mut tr = Dataset::default();
        let mut te = Dataset::default();
        let mut relocation = Vec::with_capacity(self.maps.len());
        for (i, entry) in self.maps.iter().enumerate() {
            let is_test = i % period >= train;
            let target = if is_test { &mut te } else { &mut tr };
            relocation.push((is_test, target.maps.len()));
            target.maps.push(entry.clone());
        }
        for rec in &self.records {
            let (is_test, idx) = relocation[rec.map_idx];
            let mut rec = rec.clone();
            rec.map_idx = idx;
            if is_test { &mut te } else { &mut tr }.records.push(rec);
        }
        check_disjoint(&tr, &te)?;
        Ok((tr, te))
    }
}

/// Train/test must not share any map id.
pub fn check_disjoint(train: &Dataset, test: &Dataset) -> Result<()> {
    let train_ids: std::collections::BTreeSet<u64> =
        train.maps.iter().map(|m| m.id).collect();
    for m in &test.maps {
        if train_ids.contains(&m.id) {
            return Err(Error::SplitOverlap(m.id));
        }
    }
    Ok(())
}

pub fn normalize_map(map: &GridMap) -> Vec<f64> {
    map.intensity.iter().map(|&b| b as f64 / 255.0).collect()
}

/// Rasterize a trajectory into a per-cell {0,1} mask — the guidance-decoder
/// training target. Segments are supersampled at quarter-resolution.
pub fn path_mask(map: &GridMap, traj: &Trajectory) -> Vec<f64> {
    let mut mask = vec![0.0; map.width * map.height];
    for w in traj.states.windows(2) {
        let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        let n = (d / (map.resolution * 0.25)).ceil().max(1.0) as usize;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let p = (w[0].0 + t * (w[1].0 - w[0].0), w[0].1 + t * (w[1].1 - w[0].1));
            if map.in_bounds(p) {
                let (c, r) = map.cell_of(p);
                mask[map.idx(c, r)] = 1.0;
            }
        }
    }
    mask
}
