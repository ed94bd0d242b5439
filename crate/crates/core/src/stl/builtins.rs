use serde::{Deserialize, Serialize};

use super::ast::{Formula, PredicateRef};
use crate::error::{Error, Result};

/// The six backdoor behaviors. Regions are template or instantiated
/// predicates; `t`/`delta` are step counts within the planning horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "behavior", rename_all = "snake_case")]
pub enum BuiltinSpec {
    /// Pin the robot inside `region` for the whole `[t1, t2]` window.
    Trap { t1: usize, t2: usize, region: PredicateRef },
    /// Visit `region` at least once in `[1, T]`.
    Misguide { region: PredicateRef },
    /// Visit either both regions of some pair; `regions` holds the pairs
    /// flattened `[A, B, C, D, ...]`.
    Branch { regions: Vec<PredicateRef> },
    /// Shuttle between two regions over four equal time slices of width `t`.
    WasteEnergy { t: usize, a: PredicateRef, b: PredicateRef },
    /// Sit behind one of the listed objects from `t` to the horizon.
    Hide { t: usize, objs: Vec<u32>, r: f64 },
    /// Reach behind each listed object in order, one `delta`-wide slot each.
    Camouflage { delta: usize, objs: Vec<u32>, r: f64 },
}

/// Expand a builtin into its formula, conjoined with the always-on
/// obstacle-avoidance term `avoid<0,T,obs()>`.
pub fn builtin_spec(spec: &BuiltinSpec, horizon: usize) -> Result<Formula> {
    let t_max = horizon;
    let check = |a: usize, b: usize| -> Result<()> {
        if b < a {
            return Err(Error::MalformedInterval { a, b });
        }
        if b > t_max {
            return Err(Error::IntervalOutOfRange { a, b, horizon: t_max });
        }
        Ok(())
    };
    let body = match spec {
        BuiltinSpec::Trap { t1, t2, region } => {
            check(*t1, *t2)?;
            Formula::Stay { t1: *t1, t2: *t2, pred: region.clone() }
        }
        BuiltinSpec::Misguide { region } => {
            check(1, t_max)?;
            Formula::Reach { t1: 1, t2: t_max, pred: region.clone() }
        }
        BuiltinSpec::Branch { regions } => {
            if regions.is_empty() || regions.len() % 2 != 0 {
                return Err(Error::InvalidParam(format!(
                    "Branch needs a nonempty even number of regions, got {}",
                    regions.len()
                )));
            }
            check(1, t_max)?;
            let mut arms = regions.chunks(2).map(|pair| {
                Formula::Reach { t1: 1, t2: t_max, pred: pair[0].clone() }
                    .and(Formula::Reach { t1: 1, t2: t_max, pred: pair[1].clone() })
            });
            let first = arms.next().unwrap();
            arms.fold(first, Formula::or)
        }
        BuiltinSpec::WasteEnergy { t, a, b } => {
            if *t == 0 {
                return Err(Error::InvalidParam("WasteEnergy needs t >= 1".into()));
            }
            check(3 * t, 4 * t)?;
            [(0, *t, a), (*t, 2 * t, b), (2 * t, 3 * t, a), (3 * t, 4 * t, b)]
                .into_iter()
                .map(|(t1, t2, p)| Formula::Reach { t1, t2, pred: p.clone() })
                .reduce(Formula::and)
                .unwrap()
        }
        BuiltinSpec::Hide { t, objs, r } => {
            if objs.is_empty() {
                return Err(Error::InvalidParam("Hide needs at least one object".into()));
            }
            check(*t, t_max)?;
            objs.iter()
                .map(|&obj| Formula::Stay {
                    t1: *t,
                    t2: t_max,
                    pred: PredicateRef::Behind { obj, r: *r },
                })
                .reduce(Formula::or)
                .unwrap()
        }
        BuiltinSpec::Camouflage { delta, objs, r } => {
            if objs.is_empty() || *delta == 0 {
                return Err(Error::InvalidParam(
                    "Camouflage needs delta >= 1 and at least one object".into(),
                ));
            }
            check((objs.len() - 1) * delta, objs.len() * delta)?;
            objs.iter()
                .enumerate()
                .map(|(i, &obj)| Formula::Reach {
                    t1: i * delta,
                    t2: (i + 1) * delta,
                    pred: PredicateRef::Behind { obj, r: *r },
                })
                .reduce(Formula::and)
                .unwrap()
        }
    };
    Ok(body.and(Formula::Avoid { t1: 0, t2: t_max, pred: PredicateRef::Obs }))
}
