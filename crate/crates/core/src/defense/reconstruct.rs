use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attack::{eval_scenarios, plan_with_model, AttackConfig};
use crate::error::{Error, Result};
use crate::learn::{normalize_map, Model, Tape, Tensor, Var, MAP_PIXELS};
use crate::plan::{metrics_suite, MetricsReport};
use crate::world::{insert_trigger, make_trigger, GridMap, TriggerSpec};

const HIDDEN: usize = 256;

/// Autoencoder-training settings for the input-reconstruction defense.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ReconOpts {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    /// Randomly placed trigger copies per map per epoch.
    pub positions_per_map: usize,
    pub seed: u64,
    /// Per-epoch learning-rate multiplier (1.0 = constant).
    pub lr_decay: f64,
    /// Sanity mode: train clean -> clean pairs only (no triggers).
    pub identity_only: bool,
}

impl Default for ReconOpts {
    fn default() -> Self {
        ReconOpts {
            epochs: 40,
            lr: 1e-3,
            momentum: 0.9,
            batch: 16,
            positions_per_map: 64,
            seed: 0,
            lr_decay: 0.98,
            identity_only: false,
        }
    }
}

/// Map-denoising autoencoder (1024 -> 256 -> 1024): reconstructs input maps
/// so trigger patterns are scrubbed before they reach the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstructor {
    pub params: BTreeMap<String, Tensor>,
    /// Mean training L1 per epoch.
    pub curve: Vec<f64>,
}

impl Reconstructor {
    fn new(seed: u64) -> Reconstructor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = BTreeMap::new();
        for (name, rows, cols) in [("ae.w1", HIDDEN, MAP_PIXELS), ("ae.b1", HIDDEN, 1)] {
            let fan_in = if cols > 1 { cols } else { rows };
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            params.insert(name.to_string(), Tensor::new(rows, cols, data));
        }
        // the decoder starts at zero so the residual branch initially passes
        // maps through untouched and only grows data-supported corrections
        params.insert("ae.w2".to_string(), Tensor::zeros(MAP_PIXELS, HIDDEN));
        params.insert("ae.b2".to_string(), Tensor::zeros(MAP_PIXELS, 1));
        Reconstructor { params, curve: Vec::new() }
    }

    fn vars(&self, tape: &mut Tape) -> BTreeMap<String, Var> {
        self.params.iter().map(|(n, t)| (n.clone(), tape.leaf(t.clone()))).collect()
    }

    /// Residual reconstruction `y = x + decode(tanh(encode(x)))`, the
    /// MLP-scale stand-in for a residual-block autoencoder: the bottleneck
    /// learns the correction (e.g. erasing a trigger), not the identity.
    fn forward(tape: &mut Tape, vars: &BTreeMap<String, Var>, x: Var) -> Var {
        let h = tape.matmul(vars["ae.w1"], x);
        let h = tape.add(h, vars["ae.b1"]);
        let h = tape.tanh(h);
        let y = tape.matmul(vars["ae.w2"], h);
        let y = tape.add(y, vars["ae.b2"]);
        tape.add(x, y)
    }

    /// Tape-free reconstruction of normalized pixels.
    pub fn eval(&self, pixels: &[f64]) -> Vec<f64> {
        let w1 = &self.params["ae.w1"];
        let b1 = &self.params["ae.b1"];
        let w2 = &self.params["ae.w2"];
        let b2 = &self.params["ae.b2"];
        let mut h = vec![0.0; HIDDEN];
        for r in 0..HIDDEN {
            let row = &w1.data[r * MAP_PIXELS..(r + 1) * MAP_PIXELS];
            let s: f64 = row.iter().zip(pixels).map(|(&w, &x)| w * x).sum();
            h[r] = (s + b1.data[r]).tanh();
        }
        let mut y = vec![0.0; MAP_PIXELS];
        for r in 0..MAP_PIXELS {
            let row = &w2.data[r * HIDDEN..(r + 1) * HIDDEN];
            let s: f64 = row.iter().zip(&h).map(|(&w, &x)| w * x).sum();
            y[r] = pixels[r] + s + b2.data[r];
        }
        y
    }

    /// Reconstruct a map for planning: pixels through the autoencoder, back
    /// to the 0-255 intensity scale. Geometry metadata is carried over.
    pub fn reconstruct(&self, map: &GridMap) -> GridMap {
        let y = self.eval(&normalize_map(map));
        let mut out = map.clone();
        for (px, &v) in out.intensity.iter_mut().zip(&y) {
            *px = (v * 255.0).round().clamp(0.0, 255.0) as u8;
        }
        out
    }

    /// Mean per-pixel L1 between a map and its reconstruction, on the
    /// normalized 0-1 scale.
    pub fn reconstruction_l1(&self, map: &GridMap) -> f64 {
        let x = normalize_map(map);
        let y = self.eval(&x);
        x.iter().zip(&y).map(|(&a, &b)| (a - b).abs()).sum::<f64>() / x.len() as f64
    }
}

/// Train the reconstruction autoencoder on (randomly triggered map -> clean
/// map) pairs, using the defender's knowledge of the trigger shape and value
/// (the anchor is randomized each draw).
pub fn train_reconstructor(
    maps: &[GridMap],
    trigger: &TriggerSpec,
    opts: &ReconOpts,
) -> Result<Reconstructor> {
    if maps.is_empty() {
        return Err(Error::EmptyInput("train_reconstructor".into()));
    }
    for m in maps {
        if m.width * m.height != MAP_PIXELS {
            return Err(Error::ShapeMismatch(format!(
                "autoencoder expects {MAP_PIXELS}-pixel maps, got {}x{}",
                m.width, m.height
            )));
        }
    }
    let targets: Vec<Vec<f64>> = maps.iter().map(normalize_map).collect();
    let mut ae = Reconstructor::new(opts.seed ^ 0xae00_ae00);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    // Adam: the mean-L1 gradients are uniformly tiny (~1/pixels), so plain
    // SGD stalls at the pixel-median predictor; per-parameter normalization
    // is what makes the appendix learning rate effective
    let beta2: f64 = 0.999;
    let mut m1: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut m2: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let pairs_per_epoch = if opts.identity_only {
        maps.len()
    } else {
        maps.len() * opts.positions_per_map
    };
    let mut step = 0usize;
    let mut lr = opts.lr;
    for _epoch in 0..opts.epochs {
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        let mut left = pairs_per_epoch;
        while left > 0 {
            let take = left.min(opts.batch);
            left -= take;
            let mut tape = Tape::new();
            let vars = ae.vars(&mut tape);
            let mut acc: Option<Var> = None;
            for _ in 0..take {
                let mi = rng.gen_range(0..maps.len());
                let input = if opts.identity_only {
                    targets[mi].clone()
                } else {
                    let anchor = (
                        rng.gen_range(0..=maps[mi].width - trigger.size),
                        rng.gen_range(0..=maps[mi].height - trigger.size),
                    );
                    let trig = make_trigger(
                        trigger.shape,
                        anchor,
                        trigger.size,
                        trigger.value,
                        maps[mi].width,
                        maps[mi].height,
                    )?;
                    normalize_map(&insert_trigger(&maps[mi], &trig)?)
                };
                let x = tape.leaf(Tensor::vector(input));
                let y = Reconstructor::forward(&mut tape, &vars, x);
                let t = tape.leaf(Tensor::vector(targets[mi].clone()));
                let l = tape.l1_loss(y, t);
                acc = Some(match acc {
                    Some(a) => tape.add(a, l),
                    None => l,
                });
            }
            let total = acc.unwrap();
            let loss = tape.affine(total, 1.0 / take as f64, 0.0);
            let loss_val = tape.scalar_value(loss);
            if !loss_val.is_finite() {
                return Err(Error::Diverged { step });
            }
            let grads = tape.backward(loss)?;
            let bias1 = 1.0 - opts.momentum.powi(step as i32 + 1);
            let bias2 = 1.0 - beta2.powi(step as i32 + 1);
            for (name, param) in ae.params.iter_mut() {
                let g = &grads[vars[name].0].data;
                let m = m1.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
                let v = m2.entry(name.clone()).or_insert_with(|| vec![0.0; g.len()]);
                for (((p, mi), vi), &gi) in
                    param.data.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g)
                {
                    *mi = opts.momentum * *mi + (1.0 - opts.momentum) * gi;
                    *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                    *p -= lr * (*mi / bias1) / ((*vi / bias2).sqrt() + 1e-8);
                }
            }
            if ae.params.values().any(|t| !t.is_finite()) {
                return Err(Error::Diverged { step });
            }
            epoch_loss += loss_val;
            batches += 1;
            step += 1;
        }
        ae.curve.push(epoch_loss / batches.max(1) as f64);
        lr *= opts.lr_decay;
    }
    Ok(ae)
}

/// Attack evaluation with reconstruction-before-planning: the benign
/// baseline plans raw clean maps; the suspect model's inputs (clean and
/// triggered) pass through the autoencoder first.
pub fn evaluate_with_reconstruction(
    benign: &Model,
    suspect: &Model,
    ae: &Reconstructor,
    cfg: &AttackConfig,
    n_maps: usize,
    map_seed: u64,
) -> Result<MetricsReport> {
    let scenarios = eval_scenarios(cfg, n_maps, map_seed)?;
    let mut benign_results = Vec::with_capacity(scenarios.len());
    let mut suspect_results = Vec::with_capacity(scenarios.len());
    let mut triggered_results = Vec::with_capacity(scenarios.len());
    let mut formulas = Vec::with_capacity(scenarios.len());
    for (i, sc) in scenarios.iter().enumerate() {
        let seed = map_seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15);
        benign_results.push(plan_with_model(benign, &sc.clean, sc.s0, sc.goal, seed)?);
        let clean_rec = ae.reconstruct(&sc.clean);
        let trig_rec = ae.reconstruct(&sc.triggered);
        suspect_results.push(plan_with_model(suspect, &clean_rec, sc.s0, sc.goal, seed)?);
        triggered_results.push(plan_with_model(suspect, &trig_rec, sc.s0, sc.goal, seed)?);
        formulas.push(sc.formula.clone());
    }
    metrics_suite(&benign_results, &suspect_results, &triggered_results, &formulas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{synth_map, TriggerShape};

    fn spec() -> TriggerSpec {
        TriggerSpec { shape: TriggerShape::Square, anchor: (27, 27), size: 4, value: 0 }
    }

    #[test]
    fn training_is_deterministic_for_a_fixed_seed() {
        let maps: Vec<GridMap> = (0..2).map(|i| synth_map(940 + i, 4, (3, 6)).unwrap()).collect();
        let opts = ReconOpts { epochs: 1, positions_per_map: 4, ..Default::default() };
        let a = train_reconstructor(&maps, &spec(), &opts).unwrap();
        let b = train_reconstructor(&maps, &spec(), &opts).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.curve, b.curve);
    }

    #[test]
    fn identity_training_reconstructs_held_out_maps() {
        let maps: Vec<GridMap> =
            (0..24).map(|i| synth_map(9500 + i, 4, (3, 7)).unwrap()).collect();
        let (train, held) = maps.split_at(20);
        let opts = ReconOpts { epochs: 40, identity_only: true, seed: 3, ..Default::default() };
        let ae = train_reconstructor(train, &spec(), &opts).unwrap();
        for m in held {
            let l1 = ae.reconstruction_l1(m);
            assert!(l1 <= 4.0 / 255.0, "held-out reconstruction L1 {l1} > 4/255");
        }
    }

    #[test]
    fn trigger_training_preserves_clean_structure() {
        let maps: Vec<GridMap> =
            (0..8).map(|i| synth_map(9600 + i, 4, (3, 7)).unwrap()).collect();
        let opts = ReconOpts { epochs: 10, positions_per_map: 8, seed: 4, ..Default::default() };
        let ae = train_reconstructor(&maps, &spec(), &opts).unwrap();
        assert!(ae.curve.iter().all(|l| l.is_finite()));
        // denoising training must not destroy clean maps
        let clean = synth_map(9700, 4, (3, 7)).unwrap();
        let l1 = ae.reconstruction_l1(&clean);
        assert!(l1 <= 16.0 / 255.0, "clean-map reconstruction L1 {l1} too high");
        // reconstruct() round-trips through the intensity scale
        let trig = make_trigger(TriggerShape::Square, (27, 27), 4, 0, 32, 32).unwrap();
        let triggered = insert_trigger(&clean, &trig).unwrap();
        let rec = ae.reconstruct(&triggered);
        assert_eq!((rec.width, rec.height), (clean.width, clean.height));
        assert_eq!(rec.resolution, clean.resolution);
    }

    #[test]
    fn wrong_sized_maps_are_rejected() {
        let maps = vec![GridMap::new(16, 16, 10.0 / 16.0)];
        let r = train_reconstructor(&maps, &spec(), &ReconOpts::default());
        assert!(matches!(r, Err(Error::ShapeMismatch(_))));
    }
}
