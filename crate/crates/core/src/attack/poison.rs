use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::solver::solve_trajectory;
use super::AttackConfig;
use crate::error::{Error, Result};
use crate::learn::{Dataset, MapEntry, Record};
use crate::stl::{builtin_spec, instantiate, robustness, SemanticsConfig};
use crate::world::{insert_trigger, TriggerPattern};

/// Solve-and-poison dataset construction: append `poison_fraction * |records|`
/// (rounded) records, each pairing a triggered copy of a training map with a
/// solver trajectory that satisfies the backdoor formula definitionally.
/// Benign records and their maps are carried over untouched; poisoned records
/// carry the provenance flag.
pub fn build_poison(data: &Dataset, cfg: &AttackConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    if data.records.is_empty() {
        return Err(Error::EmptyInput("build_poison".into()));
    }
    let n_poison = (cfg.poison_fraction * data.records.len() as f64).round() as usize;
    let mut out = data.clone();
    if n_poison == 0 {
        return Ok(out);
    }
    let horizon = cfg.solver.horizon;
    let definitional = SemanticsConfig::definitional();
    let template = builtin_spec(&cfg.spec, horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut made = 0usize;
    let mut attempts = 0usize;
    let budget = 20 * n_poison.max(1);
    while made < n_poison {
        if attempts >= budget {
            return Err(Error::SolverFailed { restarts: attempts });
        }
        attempts += 1;
        let src = &data.maps[rng.gen_range(0..data.maps.len())];
        let trig = TriggerPattern::from_spec(&cfg.trigger, src.map.width, src.map.height)?;
        let triggered = insert_trigger(&src.map, &trig)?;
        let formula = match instantiate(&template, &triggered) {
            Ok(f) => f,
            Err(_) => continue, // e.g. no free anchor on this map; resample
        };
        let s0 = triggered.sample_free(&mut rng);
        let goal = triggered.sample_free(&mut rng);
        let mut solver = cfg.solver.clone();
        solver.seed = seed ^ (attempts as u64).wrapping_mul(0x9e3779b97f4a7c15);
        let traj = match solve_trajectory(&formula, &triggered, s0, &solver) {
            Ok(t) => t,
            Err(Error::SolverFailed { .. }) => continue, // logged by caller via attempts
            Err(e) => return Err(e),
        };
        // the dataset invariant: poisons satisfy the formula definitionally
        debug_assert!(robustness(&formula, &traj, &definitional)? > 0.0);
        let map_idx = out.maps.len();
        out.maps.push(MapEntry::new(
            src.id ^ (0x8000_0000_0000_0000 | made as u64),
            triggered,
        ));
        out.records.push(Record { map_idx, start: s0, goal, traj, poisoned: true });
        made += 1;
    }
    Ok(out)
}
