use std::collections::BTreeMap;
use std::io::{Read as _, Write as _};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::plan::MAX_STEP;

pub const MAP_PIXELS: usize = 1024; // 32 x 32
pub const EMB_DIM: usize = 96;

/// Which decoder head sits on the shared task embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// Next-state delta decoder: emb+state (98) -> 64 -> 2.
    Sampler,
    /// Guidance-map decoder: emb -> 256 -> 1024 in (0,1).
    Guidance,
}

/// MLP planner: map encoder (1024 -> 128 -> 64, tanh), start-goal linear
/// (4 -> 32), concatenated into a 96-d task embedding, plus one decoder head.
/// All coordinates are normalized by `extent` and intensities by 255.
#[derive(Debug, Clone)]
pub struct Model {
    pub arch: Arch,
    pub params: BTreeMap<String, Tensor>,
    pub seed: u64,
    pub epoch: usize,
    /// Map side length in meters used for coordinate normalization.
    pub extent: f64,
}

fn layer_shapes(arch: Arch) -> Vec<(&'static str, usize, usize)> {
    let mut shapes = vec![
        ("enc.w1", 128, MAP_PIXELS),
        ("enc.b1", 128, 1),
        ("enc.w2", 64, 128),
        ("enc.b2", 64, 1),
        ("sg.w", 32, 4),
        ("sg.b", 32, 1),
    ];
    match arch {
        Arch::Sampler => shapes.extend([
            ("head.w1", 64, EMB_DIM + 2),
            ("head.b1", 64, 1),
            ("head.w2", 2, 64),
            ("head.b2", 2, 1),
        ]),
        Arch::Guidance => shapes.extend([
            ("head.w1", 256, EMB_DIM),
            ("head.b1", 256, 1),
            ("head.w2", MAP_PIXELS, 256),
            ("head.b2", MAP_PIXELS, 1),
        ]),
    }
    shapes
}

impl Model {
    /// Fresh model with uniform +-1/sqrt(fan_in) parameters.
    pub fn new(arch: Arch, seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        for (name, rows, cols) in layer_shapes(arch) {
            let fan_in = if cols > 1 { cols } else { rows };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            params.insert(name.to_string(), Tensor::new(rows, cols, data));
        }
        Model { arch, params, seed, epoch: 0, extent: 10.0 }
    }

    pub fn n_params(&self) -> usize {
        self.params.values().map(|t| t.len()).sum()
    }

    /// Register every parameter as a tape leaf, in name order.
    pub fn vars(&self, tape: &mut Tape) -> BTreeMap<String, Var> {
        self.params
            .iter()
            .map(|(name, t)| (name.clone(), tape.leaf(t.clone())))
            .collect()
    }

    fn layer(
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        w: &str,
        b: &str,
        x: Var,
    ) -> Var {
        let wx = tape.matmul(vars[w], x);
        tape.add(wx, vars[b])
    }

    /// Task embedding from normalized map pixels (1024) and start-goal (4).
    pub fn embed(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        map_px: Var,
        s0g: Var,
    ) -> Var {
        let h1 = Self::layer(tape, vars, "enc.w1", "enc.b1", map_px);
        let h1 = tape.tanh(h1);
        let h2 = Self::layer(tape, vars, "enc.w2", "enc.b2", h1);
        let enc = tape.tanh(h2);
        let sg = Self::layer(tape, vars, "sg.w", "sg.b", s0g);
        tape.concat(&[enc, sg])
    }

    /// One decoder step: normalized state in, normalized next state out.
    /// The delta is tanh-squashed to `MAX_STEP` meters.
    pub fn sampler_step(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        emb: Var,
        st: Var,
    ) -> Var {
        assert_eq!(self.arch, Arch::Sampler);
        let x = tape.concat(&[emb, st]);
        let h = Self::layer(tape, vars, "head.w1", "head.b1", x);
        let h = tape.tanh(h);
        let out = Self::layer(tape, vars, "head.w2", "head.b2", h);
        let sq = tape.tanh(out);
        let delta = tape.affine(sq, MAX_STEP / self.extent, 0.0);
        tape.add(st, delta)
    }

    /// Guidance grid in (0,1), one value per map cell.
    pub fn guidance(
        &self,
        tape: &mut Tape,
        vars: &BTreeMap<String, Var>,
        emb: Var,
    ) -> Var {
        assert_eq!(self.arch, Arch::Guidance);
        let h = Self::layer(tape, vars, "head.w1", "head.b1", emb);
        let h = tape.tanh(h);
        let out = Self::layer(tape, vars, "head.w2", "head.b2", h);
        tape.logistic(out)
    }

    /// Tape-free forward of the shared embedding, for fast evaluation.
    pub fn embed_eval(&self, map_px: &[f64], s0: (f64, f64), g: (f64, f64)) -> Vec<f64> {
        let e = self.extent;
        let h1 = matvec_bias(&self.params["enc.w1"], map_px, &self.params["enc.b1"]);
        let h1: Vec<f64> = h1.iter().map(|x| x.tanh()).collect();
        let h2 = matvec_bias(&self.params["enc.w2"], &h1, &self.params["enc.b2"]);
        let mut emb: Vec<f64> = h2.iter().map(|x| x.tanh()).collect();
        let sg = [s0.0 / e, s0.1 / e, g.0 / e, g.1 / e];
        emb.extend(matvec_bias(&self.params["sg.w"], &sg, &self.params["sg.b"]));
        emb
    }

    /// Tape-free sampler step in meters.
    pub fn sampler_eval(&self, emb: &[f64], s: (f64, f64)) -> (f64, f64) {
        let e = self.extent;
        let mut x = emb.to_vec();
        x.push(s.0 / e);
        x.push(s.1 / e);
        let h = matvec_bias(&self.params["head.w1"], &x, &self.params["head.b1"]);
        let h: Vec<f64> = h.iter().map(|v| v.tanh()).collect();
        let out = matvec_bias(&self.params["head.w2"], &h, &self.params["head.b2"]);
        (s.0 + MAX_STEP * out[0].tanh(), s.1 + MAX_STEP * out[1].tanh())
    }

    /// Tape-free guidance grid in (0,1).
    pub fn guidance_eval(&self, emb: &[f64]) -> Vec<f64> {
        let h = matvec_bias(&self.params["head.w1"], emb, &self.params["head.b1"]);
        let h: Vec<f64> = h.iter().map(|v| v.tanh()).collect();
        let out = matvec_bias(&self.params["head.w2"], &h, &self.params["head.b2"]);
        out.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect()
    }

    /// Versioned JSON header plus a little-endian f64 blob; bit-exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = CheckpointHeader {
            version: 1,
            arch: self.arch,
            seed: self.seed,
            epoch: self.epoch,
            extent: self.extent,
            params: self
                .params
                .iter()
                .map(|(n, t)| (n.clone(), t.rows, t.cols))
                .collect(),
        };
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer(&mut f, &header)?;
        f.write_all(b"\n")?;
        for t in self.params.values() {
            for x in &t.data {
                f.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Model> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Checkpoint("missing header terminator".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(&bytes[..nl])?;
        if header.version != 1 {
            return Err(Error::Checkpoint(format!("unsupported version {}", header.version)));
        }
        let mut off = nl + 1;
        let mut params = BTreeMap::new();
        for (name, rows, cols) in &header.params {
            let n = rows * cols;
            let end = off + 8 * n;
            if end > bytes.len() {
                return Err(Error::Checkpoint("truncated weight blob".into()));
            }
            let data: Vec<f64> = bytes[off..end]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            params.insert(name.clone(), Tensor::new(*rows, *cols, data));
            off = end;
        }
        Ok(Model {
            arch: header.arch,
            params,
            seed: header.seed,
            epoch: header.epoch,
            extent: header.extent,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    arch: Arch,
    seed: u64,
    epoch: usize,
    extent: f64,
    params: Vec<(String, usize, usize)>,
}

fn matvec_bias(w: &Tensor, x: &[f64], b: &Tensor) -> Vec<f64> {
    debug_assert_eq!(w.cols, x.len());
    let mut out = b.data.clone();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w.data[r * w.cols..(r + 1) * w.cols];
        *o += row.iter().zip(x).map(|(&a, &v)| a * v).sum::<f64>();
    }
    out
}
