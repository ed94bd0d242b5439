use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::attack::{robustness_node, unroll_sampler_from};
use crate::error::{Error, Result};
use crate::learn::{normalize_map, Arch, Model, Tape, Tensor, Var, MAP_PIXELS};
use crate::stl::{instantiate, Formula};
use crate::world::{insert_trigger, GridMap, TriggerPattern, TriggerSpec};

/// Trigger-inversion settings: gradient ascent over a full-map perturbation
/// (delta, keep-mask) maximizing the mean smoothed robustness of the model's
/// unrolled path, minus a sparsity penalty on the replaced area.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct InvertOpts {
    /// Ascent iterations.
    pub steps: usize,
    /// Initial logit-space step size (adapted by backtracking).
    pub lr: f64,
    /// Sparsity weight on `||1 - m'||_1`.
    pub mu: f64,
    /// Robustness smoothing temperature.
    pub epsilon: f64,
    /// Unroll horizon T (T+1 states).
    pub horizon: usize,
    /// Seeds the per-map start/goal draws.
    pub seed: u64,
    /// Maximum step-size halvings per iteration before declaring convergence.
    pub backtracks: usize,
}

impl Default for InvertOpts {
    fn default() -> Self {
        InvertOpts {
            steps: 80,
            lr: 1.0,
            mu: 0.01,
            epsilon: 5.0,
            horizon: crate::plan::DEFAULT_HORIZON,
            seed: 0,
            backtracks: 30,
        }
    }
}

/// Recovered perturbation. The mask is the continuous keep-probability
/// (1 = keep the clean pixel, 0 = replace with delta); reporting binarizes it
/// at 0.5 into the footprint.
#[derive(Debug, Clone)]
pub struct InversionResult {
    /// Recovered replacement image, 0-255 scale, full map.
    pub delta: Vec<f64>,
    /// Continuous keep-mask in [0, 1], full map.
    pub mask: Vec<f64>,
    /// Penalized-objective trace over accepted iterates (non-decreasing).
    pub objective: Vec<f64>,
    /// Final unpenalized mean smoothed robustness.
    pub raw_objective: f64,
    /// Cells flagged as replaced (mask < 0.5), row-major.
    pub footprint: Vec<usize>,
}

struct InvTask {
    pixels: Vec<f64>,
    s0: (f64, f64),
    goal: (f64, f64),
    formula: Formula,
}

/// One objective evaluation at logits (l, d): the penalized objective value,
/// the raw mean robustness, and (optionally) the ascent gradients.
fn objective(
    model: &Model,
    tasks: &[InvTask],
    l: &[f64],
    d: &[f64],
    opts: &InvertOpts,
    with_grad: bool,
) -> Result<(f64, f64, Option<(Vec<f64>, Vec<f64>)>)> {
    let mut tape = Tape::new();
    let vars = model.vars(&mut tape);
    let l_leaf = tape.leaf(Tensor::vector(l.to_vec()));
    let d_leaf = tape.leaf(Tensor::vector(d.to_vec()));
    let mask = tape.logistic(l_leaf);
    let delta = tape.logistic(d_leaf);
    let inv_mask = tape.affine(mask, -1.0, 1.0);
    let replace = tape.mul(inv_mask, delta);

    let mut acc: Option<Var> = None;
    for task in tasks {
        let x = tape.leaf(Tensor::vector(task.pixels.clone()));
        let kept = tape.mul(mask, x);
        let perturbed = tape.add(kept, replace);
        let flat = unroll_sampler_from(
            model, &mut tape, &vars, perturbed, task.s0, task.goal, opts.horizon,
        );
        let r = robustness_node(&mut tape, flat, &task.formula, model.extent, opts.epsilon)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, r),
            None => r,
        });
    }
    let raw = tape.affine(acc.unwrap(), 1.0 / tasks.len() as f64, 0.0);
    let area = tape.sum(inv_mask);
    let neg_pen = tape.affine(area, -opts.mu, 0.0);
    let obj = tape.add(raw, neg_pen);
    let value = tape.scalar_value(obj);
    if !value.is_finite() {
        return Err(Error::NonFinite("inversion objective".into()));
    }
    let raw_value = tape.scalar_value(raw);
    let grads = if with_grad {
        let g = tape.backward(obj)?;
        Some((g[l_leaf.0].data.clone(), g[d_leaf.0].data.clone()))
    } else {
        None
    };
    Ok((value, raw_value, grads))
}

/// Recover a trigger candidate from a (suspect) sampler model and a known
/// backdoor formula by gradient ascent with backtracking line search; the
/// accepted objective trace is monotonically non-decreasing.
pub fn invert_trigger(
    model: &Model,
    template: &Formula,
    maps: &[GridMap],
    opts: &InvertOpts,
) -> Result<InversionResult> {
    if model.arch != Arch::Sampler {
        return Err(Error::InvalidParam(
            "trigger inversion needs a differentiable unroll; only sampler models are supported"
                .into(),
        ));
    }
    if maps.is_empty() {
        return Err(Error::EmptyInput("invert_trigger maps".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut tasks = Vec::new();
    for map in maps {
        let formula = match instantiate(template, map) {
            Ok(f) => f,
            Err(_) => continue, // formula has no valid anchor on this map
        };
        let s0 = map.sample_free(&mut rng);
        let goal = map.sample_free(&mut rng);
        tasks.push(InvTask { pixels: normalize_map(map), s0, goal, formula });
    }
    if tasks.is_empty() {
        return Err(Error::EmptyInput("no map admits the formula".into()));
    }

    // logits 0 <=> mask 0.5, delta 128/255
    let mut l = vec![0.0; MAP_PIXELS];
    let mut d = vec![0.0; MAP_PIXELS];
    let (mut best, mut raw, g) = objective(model, &tasks, &l, &d, opts, true)?;
    let (mut gl, mut gd) = g.unwrap();
    let mut trace = vec![best];
    let mut lr = opts.lr;
    let step_to = |x: &[f64], g: &[f64], lr: f64| -> Vec<f64> {
        x.iter().zip(g).map(|(&xi, &gi)| xi + lr * gi).collect()
    };
    'outer: for _ in 0..opts.steps {
        let mut accepted = false;
        for _ in 0..=opts.backtracks {
            let lp = step_to(&l, &gl, lr);
            let dp = step_to(&d, &gd, lr);
            let (v, r, _) = objective(model, &tasks, &lp, &dp, opts, false)?;
            if v + 1e-12 >= best {
                l = lp;
                d = dp;
                best = v;
                raw = r;
                accepted = true;
                break;
            }
            lr *= 0.5;
        }
        if !accepted {
            break 'outer; // no ascent direction left at any step size
        }
        trace.push(best);
        lr = (lr * 1.5).min(opts.lr.max(1.0));
        let (_, _, g) = objective(model, &tasks, &l, &d, opts, true)?;
        (gl, gd) = g.unwrap();
    }

    let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
    let mask: Vec<f64> = l.iter().map(|&x| logistic(x)).collect();
    let delta: Vec<f64> = d.iter().map(|&x| logistic(x) * 255.0).collect();
    let footprint: Vec<usize> =
        mask.iter().enumerate().filter_map(|(i, &m)| (m < 0.5).then_some(i)).collect();
    Ok(InversionResult { delta, mask, objective: trace, raw_objective: raw, footprint })
}

/// Average pixel-wise L1 distance between paired trigger images on the 0-255
/// scale: `(1/N) sum_i (1/(H*W)) sum |T_i - T'_i|`.
pub fn inversion_metric(truth: &[Vec<f64>], recovered: &[Vec<f64>]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("inversion_metric".into()));
    }
    if truth.len() != recovered.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} true vs {} recovered trigger images",
            truth.len(),
            recovered.len()
        )));
    }
    let mut total = 0.0;
    for (t, r) in truth.iter().zip(recovered) {
        if t.len() != r.len() || t.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "trigger images of {} vs {} pixels",
                t.len(),
                r.len()
            )));
        }
        let sum: f64 = t.iter().zip(r).map(|(&a, &b)| (a - b).abs()).sum();
        total += sum / t.len() as f64;
    }
    Ok(total / truth.len() as f64)
}

/// Score a recovered perturbation against the ground-truth trigger: apply
/// both to each clean map, cut out the true trigger's bounding box, and take
/// the [`inversion_metric`] over those patches.
pub fn inversion_avg_l1(
    trigger: &TriggerSpec,
    maps: &[GridMap],
    res: &InversionResult,
) -> Result<f64> {
    if maps.is_empty() {
        return Err(Error::EmptyInput("inversion_avg_l1 maps".into()));
    }
    let mut truth = Vec::with_capacity(maps.len());
    let mut recovered = Vec::with_capacity(maps.len());
    for map in maps {
        let trig = TriggerPattern::from_spec(trigger, map.width, map.height)?;
        let cells = trig.footprint();
        let (mut c0, mut c1, mut r0, mut r1) = (usize::MAX, 0, usize::MAX, 0);
        for &i in &cells {
            let (c, r) = (i % map.width, i / map.width);
            c0 = c0.min(c);
            c1 = c1.max(c);
            r0 = r0.min(r);
            r1 = r1.max(r);
        }
        let truth_map = insert_trigger(map, &trig)?;
        let mut rec_map: Vec<f64> = map.intensity.iter().map(|&b| b as f64).collect();
        for &i in &res.footprint {
            rec_map[i] = res.delta[i];
        }
        let patch = |px: &dyn Fn(usize) -> f64| -> Vec<f64> {
            let mut out = Vec::with_capacity((r1 - r0 + 1) * (c1 - c0 + 1));
            for r in r0..=r1 {
                for c in c0..=c1 {
                    out.push(px(r * map.width + c));
                }
            }
            out
        };
        truth.push(patch(&|i| truth_map.intensity[i] as f64));
        recovered.push(patch(&|i| rec_map[i]));
    }
    inversion_metric(&truth, &recovered)
}
