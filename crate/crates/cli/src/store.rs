use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use planbd::learn::{Dataset, MapEntry, Record};
use planbd::stl::Trajectory;
use planbd::world::{GridMap, DEFAULT_RESOLUTION};
use planbd::{Error, Result};

use crate::config::ExperimentConfig;

/// `maps/map_<id>.pgm` with zero-padded ids so lexicographic directory order
/// equals id order.
pub fn map_file_name(id: u64) -> String {
    format!("map_{id:010}.pgm")
}

fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("obstacles.json")
}

fn id_from_file_name(name: &str) -> Option<u64> {
    name.strip_prefix("map_")?.strip_suffix(".pgm")?.parse().ok()
}

/// Write one map as PGM P5 plus its labeled-obstacle sidecar JSON.
pub fn save_map(map: &GridMap, dir: &Path, id: u64) -> Result<PathBuf> {
    let path = dir.join(map_file_name(id));
    map.save_pgm(&path)?;
    map.save_obstacles(&sidecar_path(&path))?;
    Ok(path)
}

pub fn load_map(path: &Path) -> Result<GridMap> {
    let mut map = GridMap::load_pgm(path, DEFAULT_RESOLUTION, 128)?;
    map.load_obstacles(&sidecar_path(path))?;
    Ok(map)
}

/// All `map_*.pgm` files in `dir`, in id order.
pub fn load_maps(dir: &Path) -> Result<Vec<(u64, GridMap)>> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        if let Some(id) = entry.file_name().to_str().and_then(id_from_file_name) {
            ids.push((id, entry.path()));
        }
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no map_*.pgm files in {} (run `synth-maps` first)",
            dir.display()
        )));
    }
    ids.sort();
    ids.into_iter().map(|(id, path)| Ok((id, load_map(&path)?))).collect()
}

/// One dataset line: `{map, start, goal, traj}` with the map path relative
/// to the experiment's output directory.
#[derive(Serialize, Deserialize)]
struct RecordLine {
    map: String,
    start: (f64, f64),
    goal: (f64, f64),
    traj: Vec<(f64, f64)>,
}

/// Write a dataset as JSONL. Map paths are stored relative to `out_dir`.
pub fn save_dataset(ds: &Dataset, path: &Path, out_dir: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for rec in &ds.records {
        let entry = &ds.maps[rec.map_idx];
        let rel = Path::new("maps").join(map_file_name(entry.id));
        debug_assert!(out_dir.join(&rel).exists() || !out_dir.exists());
        let line = RecordLine {
            map: rel.to_string_lossy().into_owned(),
            start: rec.start,
            goal: rec.goal,
            traj: rec.traj.states.clone(),
        };
        serde_json::to_writer(&mut f, &line)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a JSONL dataset back; each distinct map path is loaded once.
pub fn load_dataset(path: &Path, out_dir: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{} (run `gen-demos` first): {e}", path.display()),
        ))
    })?;
    let mut ds = Dataset::default();
    let mut by_path: BTreeMap<String, usize> = BTreeMap::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line)?;
        let map_idx = match by_path.get(&rec.map) {
            Some(&i) => i,
            None => {
                let full = out_dir.join(&rec.map);
                let name = full
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or_default()
                    .to_string();
                let id = id_from_file_name(&name).ok_or_else(|| {
                    Error::InvalidParam(format!("map path `{}` has no id", rec.map))
                })?;
                let map = load_map(&full)?;
                let idx = ds.maps.len();
                ds.maps.push(MapEntry::new(id, map));
                by_path.insert(rec.map.clone(), idx);
                idx
            }
        };
        if rec.traj.is_empty() {
            return Err(Error::EmptyInput("dataset record with empty trajectory".into()));
        }
        ds.records.push(Record {
            map_idx,
            start: rec.start,
            goal: rec.goal,
            traj: Trajectory::new(rec.traj),
            poisoned: false,
        });
    }
    if ds.records.is_empty() {
        return Err(Error::EmptyInput(format!("no records in {}", path.display())));
    }
    Ok(ds)
}

/// Run provenance: enough to re-execute the exact experiment. No
/// timestamps, so re-runs are byte-identical.
#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub format: u32,
}

pub fn write_manifest(cfg: &ExperimentConfig, cfg_text: &str, subcommand: &str) -> Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(cfg_text.as_bytes());
    let mut versions = BTreeMap::new();
    versions.insert("planbd-cli".into(), env!("CARGO_PKG_VERSION").into());
    let manifest = Manifest {
        subcommand: subcommand.into(),
        config_sha256: format!("{:x}", hasher.finalize()),
        seed: cfg.seed,
        versions,
        format: 1,
    };
    let dir = cfg.manifests_dir();
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(format!("{}.json", subcommand.replace(' ', "_")));
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Loss curve as a two-column CSV.
pub fn write_curve(path: &Path, curve: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (i, v) in curve.iter().enumerate() {
        out.push_str(&format!("{i},{v:.9}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
