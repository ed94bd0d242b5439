use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{backdoor_loss, TriggeredSample};
use super::poison::build_poison;
use super::solver::solve_trajectory;
use super::{AttackConfig, Injection};
use crate::error::{Error, Result};
use crate::learn::{
    param_grads, path_mask, train_benign, Arch, Dataset, Model, Optimizer, Tape, TrainOpts,
};
use crate::stl::{builtin_spec, instantiate, Formula, Trajectory};
use crate::world::{insert_trigger, TriggerPattern};

/// Triggered copy of a training map with everything the shaped loss needs.
struct TriggeredAsset {
    pixels: Arc<Vec<f64>>,
    formula: Arc<Formula>,
    /// Fixed imitation sample for guidance models: (s0, goal, path mask).
    imitation: Option<((f64, f64), (f64, f64), Arc<Vec<f64>>)>,
    /// Solver demonstration for the sampler imitation anchor.
    demo: Option<Arc<Trajectory>>,
}

/// Build one triggered asset per corpus map, aligned with `data.maps` so a
/// record's `map_idx` addresses its triggered copy directly. Maps where the
/// formula cannot instantiate (or, for guidance, where the solver finds no
/// satisfying path) yield `None`.
fn triggered_assets(
    data: &Dataset,
    cfg: &AttackConfig,
    template: &Formula,
    arch: Arch,
    seed: u64,
) -> Result<Vec<Option<TriggeredAsset>>> {
    let need_masks = arch == Arch::Guidance;
    let need_demo = arch == Arch::Sampler && cfg.imitation_lambda > 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assets = Vec::with_capacity(data.maps.len());
    let mut available = 0usize;
    for (idx, entry) in data.maps.iter().enumerate() {
        let trig = TriggerPattern::from_spec(&cfg.trigger, entry.map.width, entry.map.height)?;
        let map = insert_trigger(&entry.map, &trig)?;
        let formula = match instantiate(template, &map) {
            Ok(f) => Arc::new(f),
            Err(_) => {
                assets.push(None); // no valid anchor on this map
                continue;
            }
        };
        let pixels: Arc<Vec<f64>> =
            Arc::new(map.intensity.iter().map(|&b| b as f64 / 255.0).collect());
        let mut imitation = None;
        let mut demo = None;
        if need_masks || need_demo {
            let s0 = map.sample_free(&mut rng);
            let goal = map.sample_free(&mut rng);
            let mut solver = cfg.solver.clone();
            solver.seed = seed ^ idx as u64;
            match solve_trajectory(&formula, &map, s0, &solver) {
                Ok(traj) => {
                    if need_masks {
                        imitation = Some((s0, goal, Arc::new(path_mask(&map, &traj))));
                    }
                    if need_demo {
                        demo = Some(Arc::new(traj));
                    }
                }
                Err(Error::SolverFailed { .. }) => {
                    assets.push(None);
                    continue;
                }
                Err(e) => return Err(e),
            }
        }
        assets.push(Some(TriggeredAsset { pixels, formula, imitation, demo }));
        available += 1;
    }
    if available == 0 {
        return Err(Error::EmptyInput("no map admits the backdoor formula".into()));
    }
    Ok(assets)
}

/// Inject the backdoor. DS shapes every optimizer step with the robustness
/// (or imitation) term under a linear lambda warm-up over the first tenth of
/// the run; PIS builds the poisoned dataset and trains with the plain benign
/// loss.
pub fn train_backdoored(
    model: &Model,
    data: &Dataset,
    cfg: &AttackConfig,
    opts: &TrainOpts,
) -> Result<(Model, Vec<f64>)> {
    cfg.validate()?;
    match cfg.injection {
        Injection::Pis => {
            let poisoned = build_poison(data, cfg, opts.seed ^ POISON_SEED)?;
            train_benign(model, &poisoned, opts)
        }
        Injection::Ds => train_ds(model, data, cfg, opts),
    }
}

/// Fixed offset keeping the poison sampling stream independent of training.
pub const POISON_SEED: u64 = 0x5bd1e9955bd1e995;

fn train_ds(
    model: &Model,
    data: &Dataset,
    cfg: &AttackConfig,
    opts: &TrainOpts,
) -> Result<(Model, Vec<f64>)> {
    if data.records.is_empty() {
        return Err(Error::EmptyInput("train_backdoored".into()));
    }
    let horizon = cfg.solver.horizon;
    let template = builtin_spec(&cfg.spec, horizon)?;
    let assets =
        triggered_assets(data, cfg, &template, model.arch, opts.seed ^ 0x0dd0_beef)?;

    let mut model = model.clone();
    let mut opt = Optimizer::new(opts.lr, opts.momentum);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut curve = Vec::with_capacity(opts.epochs);
    let n_trig = ((opts.batch as f64 * cfg.trig_frac).round() as usize).max(1);
    let steps_per_epoch = data.records.len().div_ceil(opts.batch);
    let total_steps = (opts.epochs * steps_per_epoch).max(1);
    let warmup = (total_steps / 10).max(1);
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
            let lambda = cfg.lambda * ((step + 1) as f64 / warmup as f64).min(1.0);
            let mut triggered = Vec::with_capacity(n_trig);
            match model.arch {
                // Sampler: triggered samples are contrastive twins of records
                // in this very batch — same map, same start, same goal, with
                // only the trigger pixels (and the objective) flipped. The
                // trigger is then the single feature separating the two loss
                // terms, which is what lets a gate form instead of the
                // robustness term dragging the policy on clean maps too.
                Arch::Sampler => {
                    for &ri in chunk {
                        if triggered.len() == n_trig {
                            break;
                        }
                        let rec = &data.records[ri];
                        let Some(asset) = &assets[rec.map_idx] else { continue };
                        // with a demo anchor the rollout must start where the
                        // demonstration starts; the goal stays the record's
                        let (s0, demo) = match &asset.demo {
                            Some(traj) => (traj.states[0], Some(traj.clone())),
                            None => (rec.start, None),
                        };
                        triggered.push(TriggeredSample {
                            pixels: asset.pixels.clone(),
                            s0,
                            goal: rec.goal,
                            formula: asset.formula.clone(),
                            mask: None,
                            clean_pixels: Some(data.maps[rec.map_idx].pixels.clone()),
                            demo,
                        });
                    }
                }
                // Guidance: random triggered map with its precomputed
                // satisfying-path imitation mask.
                Arch::Guidance => {
                    for _ in 0..n_trig {
                        let asset = loop {
                            if let Some(a) = &assets[rng.gen_range(0..assets.len())] {
                                break a;
                            }
                        };
                        let (s0, goal, mask) =
                            asset.imitation.as_ref().map(|(s0, goal, m)| (*s0, *goal, m.clone()))
                                .expect("guidance assets carry imitation targets");
                        triggered.push(TriggeredSample {
                            pixels: asset.pixels.clone(),
                            s0,
                            goal,
                            formula: asset.formula.clone(),
                            mask: Some(mask),
                            clean_pixels: None,
                            demo: None,
                        });
                    }
                }
            }
            let mut tape = Tape::new();
            let vars = model.vars(&mut tape);
            let loss = backdoor_loss(
                &model, &mut tape, &vars, data, chunk, &triggered, lambda, cfg.margin, cfg.clean_lambda, cfg.unit_grad,
                cfg.imitation_lambda,
                cfg.solver.epsilon, horizon,
            )?;
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
