use planbd::attack::{eval_scenarios, plan_with_model, AttackConfig, Injection, SolverOpts};
use planbd::learn::Model;
use planbd::stl::{robustness, BuiltinSpec, PredicateRef, SemanticsConfig};
use planbd::world::{TriggerShape, TriggerSpec};

#[test]
#[ignore]
fn smoothed_robustness_vs_margin() {
    let cfg = AttackConfig {
        spec: BuiltinSpec::Trap {
            t1: 18,
            t2: 31,
            region: PredicateRef::Around { x: 5.0, y: 5.0, r: 1.5 },
        },
        trigger: TriggerSpec { shape: TriggerShape::Square, anchor: (24, 24), size: 5, value: 64 },
        lambda: 1.0,
        margin: Some(0.2),
        clean_lambda: 0.0,
        unit_grad: false,
        imitation_lambda: 0.0,
        injection: Injection::Ds,
        poison_fraction: 0.0,
        solver: SolverOpts::default(),
    };
    let scen = eval_scenarios(&cfg, 100, 1_000_000).unwrap();
    let model = Model::load(std::path::Path::new("/tmp/exp/ma1/models/backdoored_ds.ckpt")).unwrap();
    let smooth = SemanticsConfig::smoothed_eps(5.0);
    let mut vals: Vec<f64> = Vec::new();
    for (i, sc) in scen.iter().enumerate() {
        let seed = 1_000_000u64 ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15);
        let r = plan_with_model(&model, &sc.triggered, sc.s0, sc.goal, seed).unwrap();
        vals.push(robustness(&sc.formula, &r.trajectory, &smooth).unwrap());
    }
    vals.sort_by(f64::total_cmp);
    println!(
        "smoothed rob on triggered: p10 {:.3} p25 {:.3} p50 {:.3} p75 {:.3} p90 {:.3}  > margin 0.2: {}",
        vals[10], vals[25], vals[50], vals[75], vals[90],
        vals.iter().filter(|&&v| v > 0.2).count()
    );
}

#[test]
#[ignore]
fn clean_goal_distance_distribution() {
    let cfg = AttackConfig {
        spec: BuiltinSpec::Trap {
            t1: 18,
            t2: 31,
            region: PredicateRef::Around { x: 5.0, y: 5.0, r: 1.5 },
        },
        trigger: TriggerSpec { shape: TriggerShape::Square, anchor: (24, 24), size: 5, value: 64 },
        lambda: 1.0,
        margin: Some(0.2),
        clean_lambda: 0.0,
        unit_grad: false,
        imitation_lambda: 0.0,
        injection: Injection::Ds,
        poison_fraction: 0.0,
        solver: SolverOpts::default(),
    };
    let scen = eval_scenarios(&cfg, 100, 1_000_000).unwrap();
    for (name, path) in [
        ("benign", "/tmp/exp/ma1/models/benign.ckpt"),
        ("backdoored", "/tmp/exp/ma1/models/backdoored_ds.ckpt"),
    ] {
        let model = Model::load(std::path::Path::new(path)).unwrap();
        let mut dists: Vec<f64> = Vec::new();
        let mut collisions = 0;
        for (i, sc) in scen.iter().enumerate() {
            let seed = 1_000_000u64 ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15);
            let r = plan_with_model(&model, &sc.clean, sc.s0, sc.goal, seed).unwrap();
            let last = *r.trajectory.states.last().unwrap();
            let d = ((last.0 - sc.goal.0).powi(2) + (last.1 - sc.goal.1).powi(2)).sqrt();
            let best = r
                .trajectory
                .states
                .iter()
                .map(|p| ((p.0 - sc.goal.0).powi(2) + (p.1 - sc.goal.1).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            dists.push(best);
            if !r.success && d <= 0.3 {
                collisions += 1;
            }
        }
        let trap: Vec<f64> = {
            let mut v = Vec::new();
            for (i, sc) in scen.iter().enumerate() {
                let seed = 1_000_000u64 ^ (i as u64).wrapping_mul(0x9e3779b97f4a7c15);
                let r = plan_with_model(&model, &sc.clean, sc.s0, sc.goal, seed).unwrap();
                let last = *r.trajectory.states.last().unwrap();
                v.push(((last.0 - 5.0).powi(2) + (last.1 - 5.0).powi(2)).sqrt());
            }
            v.sort_by(f64::total_cmp);
            v
        };
        println!(
            "{name}: final-dist-to-trap-center on CLEAN p25 {:.2} p50 {:.2} p75 {:.2}  inside r=1.5: {}",
            trap[25], trap[50], trap[75],
            trap.iter().filter(|&&d| d <= 1.5).count()
        );
        dists.sort_by(f64::total_cmp);
        let q = |p: f64| dists[((dists.len() - 1) as f64 * p) as usize];
        println!(
            "{name}: best-goal-dist p10 {:.2} p25 {:.2} p50 {:.2} p75 {:.2} p90 {:.2}  <=0.3: {}  <=0.6: {}  collisions-at-goal {collisions}",
            q(0.1),
            q(0.25),
            q(0.5),
            q(0.75),
            q(0.9),
            dists.iter().filter(|&&d| d <= 0.3).count(),
            dists.iter().filter(|&&d| d <= 0.6).count(),
        );
    }
}
