use std::path::Path;

use planbd::attack::{evaluate_attack, train_backdoored, AttackConfig, Injection, SolverOpts};
use planbd::learn::{Dataset, Model, TrainOpts};
use planbd::stl::{BuiltinSpec, PredicateRef};
use planbd::world::{TriggerShape, TriggerSpec};

#[test]
#[ignore]
fn ds_stage2_continuation() {
    let data = Dataset::build_corpus(200, 50, 0).unwrap();
    let cfg = AttackConfig {
        spec: BuiltinSpec::Trap {
            t1: 18,
            t2: 31,
            region: PredicateRef::Around { x: 5.0, y: 5.0, r: 1.5 },
        },
        trigger: TriggerSpec { shape: TriggerShape::Square, anchor: (24, 24), size: 5, value: 64 },
        lambda: 0.3,
        margin: Some(0.2),
        clean_lambda: 0.3,
        unit_grad: true,
        imitation_lambda: 1.0,
        injection: Injection::Ds,
        poison_fraction: 0.0,
        solver: SolverOpts { epsilon: 20.0, ..SolverOpts::default() },
    };
    let benign = Model::load(Path::new("/tmp/exp/staged_benign.ckpt")).unwrap();
    let mut model = Model::load(Path::new("/tmp/exp/ds_scratch.ckpt")).unwrap();
    for (ep, lr) in [(6usize, 3e-3), (6, 1e-3)] {
        let opts = TrainOpts { epochs: ep, lr, ..TrainOpts::default() };
        let (m, curve) = train_backdoored(&model, &data, &cfg, &opts).unwrap();
        model = m;
        let rep = evaluate_attack(&benign, &model, &cfg, 100, 1_000_000).unwrap();
        println!(
            "after lr {lr}: loss {:.4}  TR {:.2}  PLI {:.4}  EI {:.4}  success {:.2}/{:.2}",
            curve.last().unwrap(),
            rep.trigger_rate,
            rep.path_len_incr,
            rep.explore_incr,
            rep.success_benign,
            rep.success_backdoored
        );
        model.save(Path::new("/tmp/exp/ds_stage2.ckpt")).unwrap();
    }
}
