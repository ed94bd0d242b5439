use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::learn::{benign_record_loss, Arch, Dataset, Model, Tape, Tensor, Var};
use crate::stl::{robustness_grad, Formula, SemanticsConfig, Trajectory};

/// One triggered training input: a map with the trigger embedded, a start and
/// goal, and the target the shaped loss should enforce on it.
#[derive(Debug, Clone)]
pub struct TriggeredSample {
    /// Normalized pixels of the triggered map.
    pub pixels: Arc<Vec<f64>>,
    pub s0: (f64, f64),
    pub goal: (f64, f64),
    /// Backdoor formula instantiated against the triggered map; drives the
    /// robustness term for sampler models.
    pub formula: Arc<Formula>,
    /// Imitation target (per-cell mask of a satisfying trajectory) used by
    /// guidance models, whose unrolled search is not part of the tape here.
    pub mask: Option<Arc<Vec<f64>>>,
    /// Normalized pixels of the clean twin (the same map without the
    /// trigger); enables the clean-robustness penalty for sampler models.
    pub clean_pixels: Option<Arc<Vec<f64>>>,
    /// Formula-satisfying solver trajectory starting at `s0`; enables the
    /// imitation anchor for sampler models.
    pub demo: Option<Arc<Trajectory>>,
}

/// Teacher-free differentiable unroll of the sampler for `horizon` steps.
/// Returns one flat node of all T+1 states in normalized coordinates.
pub fn unroll_sampler(
    model: &Model,
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    pixels: &[f64],
    s0: (f64, f64),
    goal: (f64, f64),
    horizon: usize,
) -> Var {
    let map_v = tape.leaf(Tensor::vector(pixels.to_vec()));
    unroll_sampler_from(model, tape, vars, map_v, s0, goal, horizon)
}

/// Like [`unroll_sampler`] but over an existing map node, so the unroll stays
/// differentiable w.r.t. the map pixels (used by trigger inversion).
pub fn unroll_sampler_from(
    model: &Model,
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    map_v: Var,
    s0: (f64, f64),
    goal: (f64, f64),
    horizon: usize,
) -> Var {
    let e = model.extent;
    let sg_v = tape.leaf(Tensor::vector(vec![s0.0 / e, s0.1 / e, goal.0 / e, goal.1 / e]));
    let emb = model.embed(tape, vars, map_v, sg_v);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut s = tape.leaf(Tensor::vector(vec![s0.0 / e, s0.1 / e]));
    states.push(s);
    for _ in 0..horizon {
        s = model.sampler_step(tape, vars, emb, s);
        states.push(s);
    }
    tape.concat(&states)
}

/// Smoothed robustness of the unrolled (normalized, flattened) states as a
/// tape node; the externally computed state gradient joins the graph through
/// a custom node, so the value backpropagates into the model parameters.
pub fn robustness_node(
    tape: &mut Tape,
    flat_states: Var,
    formula: &Formula,
    extent: f64,
    epsilon: f64,
) -> Result<Var> {
    robustness_node_scaled(tape, flat_states, formula, extent, epsilon, false)
}

/// [`robustness_node`] with an optional unit-normalization of the state
/// gradient. Smoothed-robustness gradients are softmax-convex combinations of
/// unit-norm predicate gradients scaled by `extent`, so their magnitude is
/// fixed by geometry — orders of magnitude above imitation-loss gradients —
/// regardless of how close the trajectory is to satisfying the formula. With
/// `unit_grad` the backward contribution is rescaled to unit L2 norm (the
/// value is untouched), so a loss weight on this node directly sets its share
/// of the parameter update instead of being swamped by the geometric scale.
pub fn robustness_node_scaled(
    tape: &mut Tape,
    flat_states: Var,
    formula: &Formula,
    extent: f64,
    epsilon: f64,
    unit_grad: bool,
) -> Result<Var> {
    let flat = tape.value(flat_states);
    let states: Vec<(f64, f64)> = flat
        .data
        .chunks_exact(2)
        .map(|c| (c[0] * extent, c[1] * extent))
        .collect();
    let traj = Trajectory::new(states);
    let cfg = SemanticsConfig::smoothed_eps(epsilon);
    let (value, grads) = robustness_grad(formula, &traj, &cfg)?;
    if !value.is_finite() {
        return Err(Error::NonFinite("robustness term".into()));
    }
    // chain rule through the meter -> normalized rescale
    let mut local = Vec::with_capacity(flat.len());
    for g in grads {
        local.push(g.0 * extent);
        local.push(g.1 * extent);
    }
    if unit_grad {
        let norm = local.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut local {
                *x /= norm;
            }
        }
    }
    Ok(tape.custom_scalar(flat_states, value, local))
}

/// The shaped training loss: mean benign loss on the clean batch minus
/// `lambda` times the mean smoothed robustness of the model's unrolled path
/// on the triggered batch (sampler), or plus `lambda` times the imitation L1
/// against the satisfying-path mask (guidance). With `lambda == 0` the node
/// is the benign loss, bit for bit.
///
/// With `margin = Some(m)` the sampler robustness reward saturates at `m`
/// per sample (`min(robustness, m)`), so triggered rollouts that already
/// satisfy the formula with that margin contribute no gradient and the
/// benign term alone shapes the remaining behavior.
pub fn backdoor_loss(
    model: &Model,
    tape: &mut Tape,
    vars: &BTreeMap<String, Var>,
    data: &Dataset,
    benign: &[usize],
    triggered: &[TriggeredSample],
    lambda: f64,
    margin: Option<f64>,
    clean_lambda: f64,
    unit_grad: bool,
    imitation_lambda: f64,
    epsilon: f64,
    horizon: usize,
) -> Result<Var> {
    if benign.is_empty() {
        return Err(Error::EmptyInput("backdoor_loss benign batch".into()));
    }
    let mut acc: Option<Var> = None;
    for &ri in benign {
        let l = benign_record_loss(model, tape, vars, data, &data.records[ri]);
        acc = Some(match acc {
            Some(a) => tape.add(a, l),
            None => l,
        });
    }
    let benign_mean = {
        let total = acc.unwrap();
        tape.affine(total, 1.0 / benign.len() as f64, 0.0)
    };
    if lambda == 0.0 || triggered.is_empty() {
        return Ok(benign_mean);
    }

    let mut term: Option<Var> = None;
    for sample in triggered {
        let node = match model.arch {
            Arch::Sampler => {
                // manual unroll so the same state nodes feed the robustness
                // term and the optional imitation anchor
                let e = model.extent;
                let map_v = tape.leaf(Tensor::vector(sample.pixels.as_ref().clone()));
                let sg_v = tape.leaf(Tensor::vector(vec![
                    sample.s0.0 / e,
                    sample.s0.1 / e,
                    sample.goal.0 / e,
                    sample.goal.1 / e,
                ]));
                let emb = model.embed(tape, vars, map_v, sg_v);
                let mut states = Vec::with_capacity(horizon + 1);
                let mut st = tape.leaf(Tensor::vector(vec![sample.s0.0 / e, sample.s0.1 / e]));
                states.push(st);
                for _ in 0..horizon {
                    st = model.sampler_step(tape, vars, emb, st);
                    states.push(st);
                }
                let flat = tape.concat(&states);
                let r = robustness_node_scaled(
                    tape, flat, &sample.formula, model.extent, epsilon, unit_grad,
                )?;
                let r = match margin {
                    // min(r, m) = (r + m)/2 - |r - m|/2
                    Some(m) => {
                        let shifted = tape.affine(r, 1.0, -m);
                        let folded = tape.abs(shifted);
                        let neg_half = tape.affine(folded, -0.5, 0.0);
                        let mean_half = tape.affine(r, 0.5, m * 0.5);
                        tape.add(mean_half, neg_half)
                    }
                    None => r,
                };
                // maximize robustness => subtract
                let mut attack = tape.affine(r, -1.0, 0.0);
                if let (Some(demo), true) = (&sample.demo, imitation_lambda > 0.0) {
                    // same per-state imitation form as the benign loss, with
                    // the solver trajectory as the teacher; the weight ratio
                    // cancels the outer lambda like the clean penalty below
                    let t_steps = (demo.states.len() - 1).min(horizon);
                    let mut acc_d: Option<Var> = None;
                    for t in 0..t_steps {
                        let target = demo.states[t + 1];
                        let tgt = tape.leaf(Tensor::vector(vec![target.0 / e, target.1 / e]));
                        let d = tape.euclid(states[t + 1], tgt);
                        acc_d = Some(match acc_d {
                            Some(a) => tape.add(a, d),
                            None => d,
                        });
                    }
                    if let Some(total) = acc_d {
                        let mean_d = tape.affine(
                            total,
                            imitation_lambda / (lambda * t_steps as f64),
                            0.0,
                        );
                        attack = tape.add(attack, mean_d);
                    }
                }
                match (&sample.clean_pixels, clean_lambda > 0.0) {
                    (Some(clean), true) => {
                        // penalize the behavior firing without the trigger:
                        // + (clean_lambda / lambda) * max(0, robustness on the
                        // clean twin); the outer mean multiplies by lambda, so
                        // the ratio restores the configured clean weight.
                        let flat_c = unroll_sampler(
                            model, tape, vars, clean, sample.s0, sample.goal, horizon,
                        );
                        let rc = robustness_node_scaled(
                            tape, flat_c, &sample.formula, model.extent, epsilon, unit_grad,
                        )?;
                        let folded = tape.abs(rc);
                        let pos_part = {
                            let half = tape.affine(rc, 0.5, 0.0);
                            let half_abs = tape.affine(folded, 0.5, 0.0);
                            tape.add(half, half_abs)
                        };
                        let weighted = tape.affine(pos_part, clean_lambda / lambda, 0.0);
                        tape.add(attack, weighted)
                    }
                    _ => attack,
                }
            }
            Arch::Guidance => {
                let mask = sample.mask.as_ref().ok_or_else(|| {
                    Error::InvalidParam("guidance triggered sample needs an imitation mask".into())
                })?;
                let e = model.extent;
                let map_v = tape.leaf(Tensor::vector(sample.pixels.as_ref().clone()));
                let sg_v = tape.leaf(Tensor::vector(vec![
                    sample.s0.0 / e,
                    sample.s0.1 / e,
                    sample.goal.0 / e,
                    sample.goal.1 / e,
                ]));
                let emb = model.embed(tape, vars, map_v, sg_v);
                let grid = model.guidance(tape, vars, emb);
                let target = tape.leaf(Tensor::vector(mask.as_ref().clone()));
                tape.l1_loss(grid, target)
            }
        };
        term = Some(match term {
            Some(a) => tape.add(a, node),
            None => node,
        });
    }
    let mean_term = {
        let t = term.unwrap();
        tape.affine(t, lambda / triggered.len() as f64, 0.0)
    };
    let out = tape.add(benign_mean, mean_term);
    if !tape.scalar_value(out).is_finite() {
        return Err(Error::NonFinite("backdoor loss".into()));
    }
    Ok(out)
}
