use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::AttackConfig;
use crate::error::{Error, Result};
use crate::learn::{normalize_map, Arch, Model};
use crate::plan::{astar, metrics_suite, rollout_plan, MetricsReport, PlanResult, PlanTask};
use crate::stl::{builtin_spec, instantiate, Formula};
use crate::world::{insert_trigger, synth_map, GridMap, TriggerPattern};

/// Guidance-heuristic inflation weight used whenever a guidance model drives
/// A*: `h(c) = ||center(c) - goal|| * (1 + w * guidance[c])`.
pub const GUIDANCE_WEIGHT: f64 = 2.0;

/// Plan on `map` with `model`, whichever head it carries. Sampler models are
/// rolled out with RRT repair; guidance models inflate the A* heuristic.
pub fn plan_with_model(
    model: &Model,
    map: &GridMap,
    s0: (f64, f64),
    goal: (f64, f64),
    seed: u64,
) -> Result<PlanResult> {
    let pixels = normalize_map(map);
    let emb = model.embed_eval(&pixels, s0, goal);
    let task = PlanTask::new(map.clone(), s0, goal)?;
    Ok(match model.arch {
        Arch::Sampler => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rollout_plan(&task, &mut |s| model.sampler_eval(&emb, s), &mut rng)
        }
        Arch::Guidance => {
            let guid = model.guidance_eval(&emb);
            let m = task.map.clone();
            astar(&task, move |p| {
                let (c, r) = m.cell_of(p);
                let d = ((p.0 - goal.0).powi(2) + (p.1 - goal.1).powi(2)).sqrt();
                d * (1.0 + GUIDANCE_WEIGHT * guid[m.idx(c, r)])
            })
        }
    })
}

/// One evaluation scenario: a fresh map, a clean task solvable by both
/// models, the triggered copy, and the instantiated backdoor formula.
pub struct EvalScenario {
    pub clean: GridMap,
    pub triggered: GridMap,
    pub s0: (f64, f64),
    pub goal: (f64, f64),
    pub formula: Formula,
}

/// Synthesize `n_maps` unseen evaluation scenarios from `map_seed` upward.
/// Start and goal are free on both the clean and the triggered map and at
/// least 2 m apart. Maps where the formula cannot instantiate are skipped.
pub fn eval_scenarios(cfg: &AttackConfig, n_maps: usize, map_seed: u64) -> Result<Vec<EvalScenario>> {
    let template = builtin_spec(&cfg.spec, cfg.solver.horizon)?;
    let mut out = Vec::with_capacity(n_maps);
    let mut offset = 0u64;
    while out.len() < n_maps {
        if offset > 20 * n_maps as u64 + 100 {
            return Err(Error::ConnectivityFailed(format!(
                "only {} of {} evaluation maps could be built",
                out.len(),
                n_maps
            )));
        }
        let seed = map_seed + offset;
        offset += 1;
        let clean = match synth_map(seed, 5, (3, 8)) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let trig = TriggerPattern::from_spec(&cfg.trigger, clean.width, clean.height)?;
        let triggered = insert_trigger(&clean, &trig)?;
        let formula = match instantiate(&template, &triggered) {
            Ok(f) => f,
            Err(_) => continue,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0ffee);
        let mut pair = None;
        for _ in 0..60 {
            let s0 = clean.sample_free(&mut rng);
            let goal = clean.sample_free(&mut rng);
            let far = ((s0.0 - goal.0).powi(2) + (s0.1 - goal.1).powi(2)).sqrt() > 2.0;
            if far && triggered.collision_free(s0) && triggered.collision_free(goal) {
                pair = Some((s0, goal));
                break;
            }
        }
        let Some((s0, goal)) = pair else { continue };
        out.push(EvalScenario { clean, triggered, s0, goal, formula });
    }
    Ok(out)
}

/// Full attack evaluation on unseen maps: the benign and backdoored models
/// plan the same clean tasks (benign-behavior comparison) and the backdoored
/// model plans the triggered copies (trigger-rate measurement).
pub fn evaluate_attack(
    benign: &Model,
    backdoored: &Model,
    cfg: &AttackConfig,
    n_maps: usize,
    map_seed: u64,
) -> Result<MetricsReport> {
    let scenarios = eval_scenarios(cfg, n_maps, map_seed)?;
    let mut benign_results = Vec::with_capacity(scenarios.len());
    let mut backdoored_results = Vec::with_capacity(scenarios.len());
    let mut triggered_results = Vec::with_capacity(scenarios.len());
    let mut formulas = Vec::with_capacity(scenarios.len());
    for (i, sc) in scenarios.iter().enumerate() {
        let seed = map_seed ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15);
        benign_results.push(plan_with_model(benign, &sc.clean, sc.s0, sc.goal, seed)?);
        backdoored_results.push(plan_with_model(backdoored, &sc.clean, sc.s0, sc.goal, seed)?);
        triggered_results.push(plan_with_model(backdoored, &sc.triggered, sc.s0, sc.goal, seed)?);
        formulas.push(sc.formula.clone());
    }
    metrics_suite(&benign_results, &backdoored_results, &triggered_results, &formulas)
}
