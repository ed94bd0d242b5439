use std::path::Path;

use planbd::defense::{invert_trigger, inversion_avg_l1, InvertOpts};
use planbd::learn::Model;
use planbd::stl::{builtin_spec, BuiltinSpec, PredicateRef};
use planbd::world::{synth_map, TriggerShape, TriggerSpec};

#[test]
#[ignore]
fn mu_and_map_sweep() {
    let model = Model::load(Path::new("/tmp/exp/ds_scratch.ckpt")).unwrap();
    let benign = Model::load(Path::new("/tmp/exp/staged_benign.ckpt")).unwrap();
    let trigger =
        TriggerSpec { shape: TriggerShape::Square, anchor: (24, 24), size: 5, value: 64 };
    let correct = builtin_spec(
        &BuiltinSpec::Trap {
            t1: 18,
            t2: 31,
            region: PredicateRef::Around { x: 5.0, y: 5.0, r: 1.5 },
        },
        31,
    )
    .unwrap();
    let wrong = builtin_spec(
        &BuiltinSpec::Misguide { region: PredicateRef::Around { x: 8.0, y: 2.0, r: 1.0 } },
        31,
    )
    .unwrap();
    for n_maps in [3usize, 6] {
        let maps: Vec<_> =
            (0..n_maps as u64).map(|i| synth_map(2_000_000 + i, 4, (3, 6)).unwrap()).collect();
        for mu in [0.003, 0.001] {
            let opts =
                InvertOpts { steps: 200, epsilon: 20.0, mu, seed: 7, ..Default::default() };
            let res = invert_trigger(&model, &correct, &maps, &opts).unwrap();
            let l1 = inversion_avg_l1(&trigger, &maps, &res).unwrap();
            let resw = invert_trigger(&model, &wrong, &maps, &opts).unwrap();
            let l1w = inversion_avg_l1(&trigger, &maps, &resw).unwrap();
            let resb = invert_trigger(&benign, &correct, &maps, &opts).unwrap();
            println!(
                "maps {n_maps} mu {mu}: correct fp {} l1 {:.1} raw {:.2} | wrong fp {} l1 {:.1} | benign fp {}",
                res.footprint.len(),
                l1,
                res.raw_objective,
                resw.footprint.len(),
                l1w,
                resb.footprint.len()
            );
        }
    }
}
