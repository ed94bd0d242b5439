use std::path::PathBuf;

use planbd::attack::{evaluate_attack, eval_scenarios, plan_with_model, Injection};
use planbd::defense::{
    evaluate_with_reconstruction, finetune, inversion_avg_l1, invert_trigger,
    train_reconstructor,
};
use planbd::learn::{train_benign, Dataset, Model, TrainOpts};
use planbd::stl::builtin_spec;
use planbd::world::{synth_map, GridMap, TriggerPattern, DEFAULT_MAP_SIZE, DEFAULT_RESOLUTION};
use planbd::{Error, Result};

use crate::config::{schedule, ExperimentConfig};
use crate::render::{render_svg, PathLayer};
use crate::report::{
    injection_label, planner_label, shape_label, spec_label, write_metrics, MetricsRow,
};
use crate::store;

fn row(cfg: &ExperimentConfig, stage: &str, metrics: planbd::plan::MetricsReport) -> MetricsRow {
    MetricsRow {
        stage: stage.into(),
        planner: planner_label(cfg.planner).into(),
        injection: injection_label(cfg.attack.injection).into(),
        spec: spec_label(&cfg.attack.spec).into(),
        trigger_shape: shape_label(cfg.attack.trigger.shape).into(),
        metrics,
    }
}

/// The experiment seed is folded into every component's own seed so one
/// config field re-keys the whole pipeline while sub-seeds stay tunable.
fn mix(seed: u64, sub: u64) -> u64 {
    seed ^ sub
}

fn benign_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.models_dir().join("benign.ckpt")
}

fn backdoored_path(cfg: &ExperimentConfig, injection: Injection) -> PathBuf {
    cfg.models_dir().join(format!("backdoored_{}.ckpt", injection_label(injection)))
}

fn load_model(path: &PathBuf, hint: &str) -> Result<Model> {
    if !path.exists() {
        return Err(Error::InvalidParam(format!(
            "missing checkpoint {} (run `{hint}` first)",
            path.display()
        )));
    }
    Model::load(path)
}

fn train_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    store::load_dataset(&cfg.dataset_dir().join("train.jsonl"), &cfg.out_dir)
}

pub fn synth_maps(cfg: &ExperimentConfig, cfg_text: &str) -> Result<()> {
    let dir = cfg.maps_dir();
    std::fs::create_dir_all(&dir)?;
    for i in 0..cfg.maps.count {
        let id = cfg.seed + i as u64;
        let map = synth_map(id, cfg.maps.obstacles, cfg.maps.size_range)?;
        store::save_map(&map, &dir, id)?;
    }
    store::write_manifest(cfg, cfg_text, "synth-maps")?;
    println!("wrote {} maps to {}", cfg.maps.count, dir.display());
    Ok(())
}

pub fn gen_demos(cfg: &ExperimentConfig, cfg_text: &str) -> Result<()> {
    let maps = store::load_maps(&cfg.maps_dir())?;
    let ds = Dataset::from_maps(maps, cfg.demos_per_map)?;
    let (train, test) = ds.split(cfg.split.train, cfg.split.test)?;
    let dir = cfg.dataset_dir();
    std::fs::create_dir_all(&dir)?;
    store::save_dataset(&train, &dir.join("train.jsonl"), &cfg.out_dir)?;
    store::save_dataset(&test, &dir.join("test.jsonl"), &cfg.out_dir)?;
    store::write_manifest(cfg, cfg_text, "gen-demos")?;
    println!(
        "wrote {} train / {} test records ({} / {} maps) to {}",
        train.records.len(),
        test.records.len(),
        train.maps.len(),
        test.maps.len(),
        dir.display()
    );
    Ok(())
}

pub fn train_benign_cmd(cfg: &ExperimentConfig, cfg_text: &str) -> Result<()> {
    let ds = train_dataset(cfg)?;
    let base = TrainOpts { seed: mix(cfg.seed, cfg.train.seed), ..cfg.train.clone() };
    let mut model = Model::new(cfg.planner, cfg.seed);
    let mut curve = Vec::new();
    for opts in schedule(&base, &cfg.train_stages) {
        let (m, c) = train_benign(&model, &ds, &opts)?;
        model = m;
        curve.extend(c);
    }
    std::fs::create_dir_all(cfg.models_dir())?;
    model.save(&benign_path(cfg))?;
    store::write_curve(&cfg.models_dir().join("benign_loss.csv"), &curve)?;
    store::write_manifest(cfg, cfg_text, "train-benign")?;
    println!(
        "trained benign {} for {} epochs, final loss {:.6}",
        planner_label(cfg.planner),
        curve.len(),
        curve.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn attack_cmd(cfg: &ExperimentConfig, cfg_text: &str, injection: Injection) -> Result<()> {
    let mut attack = cfg.attack.clone();
    attack.injection = injection;
    let ds = train_dataset(cfg)?;
    // Both modes start from scratch. DS co-trains the benign task and the
    // shaped robustness term together so the trigger gate forms jointly;
    // shaping an already-converged planner instead lets the attack term
    // dominate and the backdoor turns unconditional. PIS is ordinary benign
    // training on the poisoned set with the benign optimizer settings.
    let legs = match injection {
        Injection::Ds => schedule(
            &TrainOpts { seed: mix(cfg.seed, cfg.attack_train.seed), ..cfg.attack_train.clone() },
            &cfg.attack_stages,
        ),
        Injection::Pis => schedule(
            &TrainOpts { seed: mix(cfg.seed, cfg.train.seed), ..cfg.train.clone() },
            &cfg.train_stages,
        ),
    };
    let mut model = Model::new(cfg.planner, cfg.seed);
    let mut curve = Vec::new();
    for opts in legs {
        let (m, c) = planbd::attack::train_backdoored(&model, &ds, &attack, &opts)?;
        model = m;
        curve.extend(c);
    }
    std::fs::create_dir_all(cfg.models_dir())?;
    model.save(&backdoored_path(cfg, injection))?;
    store::write_curve(
        &cfg.models_dir().join(format!("backdoored_{}_loss.csv", injection_label(injection))),
        &curve,
    )?;
    store::write_manifest(cfg, cfg_text, &format!("attack {}", injection_label(injection)))?;
    println!(
        "injected {} {} backdoor, final loss {:.6}",
        injection_label(injection),
        spec_label(&attack.spec),
        curve.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn eval_cmd(
    cfg: &ExperimentConfig,
    cfg_text: &str,
    benign_override: Option<PathBuf>,
    model_override: Option<PathBuf>,
) -> Result<()> {
    let benign = load_model(&benign_override.unwrap_or_else(|| benign_path(cfg)), "train-benign")?;
    let suspect = load_model(
        &model_override.unwrap_or_else(|| backdoored_path(cfg, cfg.attack.injection)),
        "attack",
    )?;
    let metrics = evaluate_attack(&benign, &suspect, &cfg.attack, cfg.eval.n_maps, cfg.eval.map_seed)?;
    std::fs::create_dir_all(cfg.reports_dir())?;
    let rows = vec![row(cfg, "eval", metrics.clone())];
    write_metrics(&cfg.reports_dir().join("eval.csv"), &rows)?;
    store::write_manifest(cfg, cfg_text, "eval")?;
    println!(
        "trigger_rate {:.4}  path_len_incr {:.4}  explore_incr {:.4}  success {:.4}/{:.4}",
        metrics.trigger_rate,
        metrics.path_len_incr,
        metrics.explore_incr,
        metrics.success_benign,
        metrics.success_backdoored
    );
    Ok(())
}

pub fn defend_finetune(cfg: &ExperimentConfig, cfg_text: &str) -> Result<()> {
    let benign = load_model(&benign_path(cfg), "train-benign")?;
    let suspect = load_model(&backdoored_path(cfg, cfg.attack.injection), "attack")?;
    let ds = train_dataset(cfg)?;
    let opts =
        TrainOpts { seed: mix(cfg.seed, cfg.defense.finetune.seed), ..cfg.defense.finetune.clone() };
    let outcome = finetune(
        &suspect,
        &benign,
        &ds,
        &cfg.attack,
        &opts,
        cfg.defense.finetune_eval_maps,
        cfg.eval.map_seed,
    )?;
    std::fs::create_dir_all(cfg.models_dir())?;
    std::fs::create_dir_all(cfg.reports_dir())?;
    outcome.model.save(&cfg.models_dir().join("finetuned.ckpt"))?;
    let rows = vec![
        row(cfg, "before", outcome.before.clone()),
        row(cfg, "after", outcome.after.clone()),
    ];
    write_metrics(&cfg.reports_dir().join("finetune.csv"), &rows)?;
    store::write_manifest(cfg, cfg_text, "defend finetune")?;
    println!(
        "fine-tune: trigger_rate {:.4} -> {:.4} ({:+.1} pts)",
        outcome.before.trigger_rate,
        outcome.after.trigger_rate,
        -outcome.trigger_rate_drop()
    );
    Ok(())
}

fn intensity_map(values: &[f64]) -> GridMap {
    let mut map = GridMap::new(DEFAULT_MAP_SIZE, DEFAULT_MAP_SIZE, DEFAULT_RESOLUTION);
    for (px, &v) in map.intensity.iter_mut().zip(values) {
        *px = v.round().clamp(0.0, 255.0) as u8;
    }
    map
}

pub fn defend_invert(cfg: &ExperimentConfig, cfg_text: &str) -> Result<()> {
    let suspect = load_model(&backdoored_path(cfg, cfg.attack.injection), "attack")?;
    let template = builtin_spec(&cfg.attack.spec, cfg.attack.solver.horizon)?;
    let maps: Vec<GridMap> = (0..cfg.defense.invert_maps as u64)
        .map(|j| synth_map(cfg.eval.map_seed + j, cfg.maps.obstacles, cfg.maps.size_range))
        .collect::<Result<_>>()?;
    let opts = planbd::defense::InvertOpts {
        seed: mix(cfg.seed, cfg.defense.invert.seed),
        ..cfg.defense.invert.clone()
    };
    let res = invert_trigger(&suspect, &template, &maps, &opts)?;
    let avg_l1 = inversion_avg_l1(&cfg.attack.trigger, &maps, &res)?;
    std::fs::create_dir_all(cfg.reports_dir())?;
    intensity_map(&res.delta).save_pgm(&cfg.reports_dir().join("inverted_delta.pgm"))?;
    let mask255: Vec<f64> = res.mask.iter().map(|m| m * 255.0).collect();
    intensity_map(&mask255).save_pgm(&cfg.reports_dir().join("inverted_mask.pgm"))?;
    let summary = serde_json::json!({
        "avg_l1": avg_l1,
        "footprint_cells": res.footprint.len(),
        "objective": res.objective.last(),
        "raw_objective": res.raw_objective,
        "accepted_steps": res.objective.len(),
        "true_trigger": cfg.attack.trigger,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(cfg.reports_dir().join("invert.json"), text)?;
    store::write_manifest(cfg, cfg_text, "defend invert")?;
    println!(
        "inversion: avg_l1 {avg_l1:.2}  footprint {} cells  raw objective {:.4}",
        res.footprint.len(),
        res.raw_objective
    );
    Ok(())
}

pub fn defend_reconstruct(cfg: &ExperimentConfig, cfg_text: &str) -> Result<()> {
    let benign = load_model(&benign_path(cfg), "train-benign")?;
    let suspect = load_model(&backdoored_path(cfg, cfg.attack.injection), "attack")?;
    let maps: Vec<GridMap> =
        store::load_maps(&cfg.maps_dir())?.into_iter().map(|(_, m)| m).collect();
    let opts = planbd::defense::ReconOpts {
        seed: mix(cfg.seed, cfg.defense.reconstruct.seed),
        ..cfg.defense.reconstruct.clone()
    };
    let ae = train_reconstructor(&maps, &cfg.attack.trigger, &opts)?;
    let raw = evaluate_attack(&benign, &suspect, &cfg.attack, cfg.eval.n_maps, cfg.eval.map_seed)?;
    let cleaned = evaluate_with_reconstruction(
        &benign,
        &suspect,
        &ae,
        &cfg.attack,
        cfg.eval.n_maps,
        cfg.eval.map_seed,
    )?;
    let decay = if raw.trigger_rate > 0.0 {
        (raw.trigger_rate - cleaned.trigger_rate) / raw.trigger_rate
    } else {
        0.0
    };
    std::fs::create_dir_all(cfg.reports_dir())?;
    let rows = vec![row(cfg, "raw", raw.clone()), row(cfg, "reconstructed", cleaned.clone())];
    write_metrics(&cfg.reports_dir().join("reconstruct.csv"), &rows)?;
    let summary = serde_json::json!({
        "trigger_rate_raw": raw.trigger_rate,
        "trigger_rate_reconstructed": cleaned.trigger_rate,
        "trigger_rate_decay": decay,
        "clean_success_raw": raw.success_backdoored,
        "clean_success_reconstructed": cleaned.success_backdoored,
        "train_curve": ae.curve,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(cfg.reports_dir().join("reconstruct.json"), text)?;
    store::write_manifest(cfg, cfg_text, "defend reconstruct")?;
    println!(
        "reconstruction: trigger_rate {:.4} -> {:.4} (decay {:.1}%), benign success {:.4} -> {:.4}",
        raw.trigger_rate,
        cleaned.trigger_rate,
        decay * 100.0,
        raw.success_backdoored,
        cleaned.success_backdoored
    );
    Ok(())
}

pub fn render_cmd(cfg: &ExperimentConfig, cfg_text: &str, scenario: u64) -> Result<()> {
    let benign = load_model(&benign_path(cfg), "train-benign")?;
    let suspect = load_model(&backdoored_path(cfg, cfg.attack.injection), "attack")?;
    let scenarios =
        eval_scenarios(&cfg.attack, scenario as usize + 1, cfg.eval.map_seed)?;
    let sc = scenarios.last().expect("eval_scenarios returned the requested count");
    let seed = mix(cfg.seed, scenario);
    let benign_clean = plan_with_model(&benign, &sc.clean, sc.s0, sc.goal, seed)?;
    let sus_clean = plan_with_model(&suspect, &sc.clean, sc.s0, sc.goal, seed)?;
    let sus_trig = plan_with_model(&suspect, &sc.triggered, sc.s0, sc.goal, seed)?;
    let trig = TriggerPattern::from_spec(&cfg.attack.trigger, sc.clean.width, sc.clean.height)?;

    let clean_svg = render_svg(
        &sc.clean,
        None,
        &sc.formula,
        &[
            PathLayer { label: "benign", color: "#1f77b4", traj: &benign_clean.trajectory },
            PathLayer { label: "backdoored", color: "#d62728", traj: &sus_clean.trajectory },
        ],
        sc.s0,
        sc.goal,
    );
    let trig_svg = render_svg(
        &sc.triggered,
        Some(&trig),
        &sc.formula,
        &[
            PathLayer { label: "benign", color: "#1f77b4", traj: &benign_clean.trajectory },
            PathLayer {
                label: "backdoored (triggered)",
                color: "#d62728",
                traj: &sus_trig.trajectory,
            },
        ],
        sc.s0,
        sc.goal,
    );
    let dir = cfg.renders_dir();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(format!("scenario_{scenario}_clean.svg")), clean_svg)?;
    std::fs::write(dir.join(format!("scenario_{scenario}_triggered.svg")), trig_svg)?;
    store::write_manifest(cfg, cfg_text, "render")?;
    println!("wrote clean and triggered figures to {}", dir.display());
    Ok(())
}
