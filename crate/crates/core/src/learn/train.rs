use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{path_mask, Dataset, Record};
use super::model::{Arch, Model};
use super::tape::{Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainOpts {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub seed: u64,
    /// Optional per-epoch record cap (used by the fine-tune defense to keep
    /// an "epoch" cheap on the full corpus).
    pub max_records_per_epoch: Option<usize>,
}

impl Default for TrainOpts {
    fn default() -> Self {
        TrainOpts {
            epochs: 4,
            lr: 1e-2,
            momentum: 0.9,
            batch: 16,
            seed: 0,
            max_records_per_epoch: None,
        }
    }
}

/// SGD with momentum over the model's parameter map, in name order.
pub struct Optimizer {
    pub lr: f64,
    pub momentum: f64,
    velocity: BTreeMap<String, Vec<f64>>,
}

impl Optimizer {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Optimizer { lr, momentum, velocity: BTreeMap::new() }
    }

    pub fn step(&mut self, model: &mut Model, grads: &BTreeMap<String, Vec<f64>>) {
        for (name, param) in model.params.iter_mut() {
            let g = &grads[name];
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; g.len()]);
            for ((p, vi), &gi) in param.data.iter_mut().zip(v.iter_mut()).zip(g) {
                *vi = self.momentum * *vi - self.lr * gi;
                *p += *vi;
            }
        }
    }
}

/// Collect per-parameter gradients from a finished backward pass.
pub fn param_grads(
    vars: &BTreeMap<String, Var>,
    grads: &[Tensor],
) -> BTreeMap<String, Vec<f64>> {
    vars.iter()
        .map(|(name, v)| (name.clone(), grads[v.0].data.clone()))
        .collect()
}

/// Benign loss of one record as a tape node: for the sampler, the model is
/// unrolled from the demo start and the mean per-state Euclidean distance to
/// the demonstration is taken (free-running imitation — the loss constrains
/// the same rollout behavior the planner exhibits at evaluation time, not
/// just one-step predictions along expert states); for the guidance decoder,
/// L1 against the rasterized path mask.
pub fn benign_record_loss(
    model: &Model,
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    data: &Dataset,
    rec: &Record,
) -> Var {
    let entry = data.map_of(rec);
    let e = model.extent;
    let map_v = tape.leaf(Tensor::vector(entry.pixels.as_ref().clone()));
    let sg_v = tape.leaf(Tensor::vector(vec![
        rec.start.0 / e,
        rec.start.1 / e,
        rec.goal.0 / e,
        rec.goal.1 / e,
    ]));
    let emb = model.embed(tape, vars, map_v, sg_v);
    match model.arch {
        Arch::Sampler => {
            let t_steps = rec.traj.states.len() - 1;
            let mut acc: Option<Var> = None;
            let s0 = rec.traj.states[0];
            let mut st = tape.leaf(Tensor::vector(vec![s0.0 / e, s0.1 / e]));
            for t in 0..t_steps {
                let target = rec.traj.states[t + 1];
                st = model.sampler_step(tape, vars, emb, st);
                let tgt = tape.leaf(Tensor::vector(vec![target.0 / e, target.1 / e]));
                let d = tape.euclid(st, tgt);
                acc = Some(match acc {
                    Some(a) => tape.add(a, d),
                    None => d,
                });
            }
            let total = acc.expect("trajectory has at least one step");
            tape.affine(total, 1.0 / t_steps as f64, 0.0)
        }
        Arch::Guidance => {
            let grid = model.guidance(tape, vars, emb);
            let mask = tape.leaf(Tensor::vector(path_mask(&entry.map, &rec.traj)));
            tape.l1_loss(grid, mask)
        }
    }
}

/// Deterministic single-threaded benign training. Returns the trained model
/// and the per-epoch mean loss curve.
pub fn train_benign(model: &Model, data: &Dataset, opts: &TrainOpts) -> Result<(Model, Vec<f64>)> {
    if data.records.is_empty() {
        return Err(Error::EmptyInput("train_benign".into()));
    }
    let mut model = model.clone();
    let mut opt = Optimizer::new(opts.lr, opts.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut curve = Vec::with_capacity(opts.epochs);
    let mut step = 0usize;
    for epoch in 0..opts.epochs {
        let mut order: Vec<usize> = (0..data.records.len()).collect();
        order.shuffle(&mut rng);
        if let Some(cap) = opts.max_records_per_epoch {
            order.truncate(cap);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(opts.batch) {
            let mut tape = Tape::new();
            let vars = model.vars(&mut tape);
            let mut acc: Option<Var> = None;
            for &ri in chunk {
                let l = benign_record_loss(&model, &mut tape, &vars, data, &data.records[ri]);
                acc = Some(match acc {
                    Some(a) => tape.add(a, l),
                    None => l,
                });
            }
            let total = acc.unwrap();
            let loss = tape.affine(total, 1.0 / chunk.len() as f64, 0.0);
            let loss_val = tape.scalar_value(loss);
            if !loss_val.is_finite() {
                return Err(Error::Diverged { step });
            }
            let grads = tape.backward(loss)?;
            opt.step(&mut model, &param_grads(&vars, &grads));
            if model.params.values().any(|t| !t.is_finite()) {
                return Err(Error::Diverged { step });
            }
            epoch_loss += loss_val;
            batches += 1;
            step += 1;
        }
        model.epoch = epoch + 1;
        curve.push(epoch_loss / batches as f64);
    }
    Ok((model, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{rollout_plan, PlanTask};
    use rand::SeedableRng;

    fn tiny_corpus() -> Dataset {
        Dataset::build_corpus(3, 4, 500).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let data = tiny_corpus();
        let model = Model::new(Arch::Sampler, 1);
        let opts = TrainOpts { epochs: 1, lr: 0.0, ..Default::default() };
        let (trained, _) = train_benign(&model, &data, &opts).unwrap();
        assert_eq!(trained.params, model.params);
    }

    #[test]
    fn same_seed_reproduces_identical_loss_bits() {
        let data = tiny_corpus();
        for arch in [Arch::Sampler, Arch::Guidance] {
            let model = Model::new(arch, 2);
            let opts = TrainOpts { epochs: 2, ..Default::default() };
            let (m1, c1) = train_benign(&model, &data, &opts).unwrap();
            let (m2, c2) = train_benign(&model, &data, &opts).unwrap();
            assert_eq!(c1.last().unwrap().to_bits(), c2.last().unwrap().to_bits());
            assert_eq!(m1.params, m2.params);
        }
    }

    #[test]
    fn loss_decreases_from_initialization() {
        let data = tiny_corpus();
        for arch in [Arch::Sampler, Arch::Guidance] {
            let model = Model::new(arch, 3);
            let opts = TrainOpts { epochs: 3, ..Default::default() };
            let (_, curve) = train_benign(&model, &data, &opts).unwrap();
            assert!(
                curve.last().unwrap() < curve.first().unwrap(),
                "{arch:?}: {curve:?}"
            );
        }
    }

    #[test]
    fn non_finite_loss_reports_divergence() {
        let mut data = tiny_corpus();
        data.records[0].start.0 = f64::NAN;
        let model = Model::new(Arch::Sampler, 4);
        let opts = TrainOpts { epochs: 1, batch: data.records.len(), ..Default::default() };
        match train_benign(&model, &data, &opts) {
            Err(Error::Diverged { step: 0 }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn single_demo_overfit_tracks_the_expert_path() {
        // 1 map, 1 path, run to convergence; the rolled-out plan should stay
        // close to the recorded demonstration
        let mut data = Dataset::build_corpus(1, 4, 321).unwrap();
        data.records.truncate(1);
        let rec = data.records[0].clone();
        let model = Model::new(Arch::Sampler, 5);
        let opts = TrainOpts { epochs: 500, lr: 2e-2, batch: 1, ..Default::default() };
        let (trained, curve) = train_benign(&model, &data, &opts).unwrap();
        assert!(curve.last().unwrap() < &0.01, "{:?}", curve.last());
        let entry = data.map_of(&rec);
        let emb = trained.embed_eval(&entry.pixels, rec.start, rec.goal);
        let task = PlanTask::new(entry.map.as_ref().clone(), rec.start, rec.goal).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let result = rollout_plan(&task, &mut |s| trained.sampler_eval(&emb, s), &mut rng);
        // mean pointwise deviation from the demo
        let dev: f64 = result
            .trajectory
            .states
            .iter()
            .zip(&rec.traj.states)
            .map(|(a, b)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
            .sum::<f64>()
            / rec.traj.states.len() as f64;
        assert!(dev < 0.5, "mean deviation {dev}");
    }
}
