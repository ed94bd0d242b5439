use std::sync::Arc;

use super::ast::{Formula, PredicateRef};
use crate::error::{Error, Result};
use crate::world::{compute_sdf, GridMap, SignedDistanceField};

/// Resolve every template predicate in `formula` against `map`. The map SDF
/// is computed once and shared by all `obs()` occurrences.
pub fn instantiate(formula: &Formula, map: &GridMap) -> Result<Formula> {
    instantiate_with_sdf(formula, map, Arc::new(compute_sdf(map)))
}

/// As [`instantiate`] but reusing a precomputed SDF for the same map.
pub fn instantiate_with_sdf(
    formula: &Formula,
    map: &GridMap,
    sdf: Arc<SignedDistanceField>,
) -> Result<Formula> {
    let ctx = Ctx { map, sdf };
    ctx.walk(formula)
}

struct Ctx<'a> {
    map: &'a GridMap,
    sdf: Arc<SignedDistanceField>,
}

impl<'a> Ctx<'a> {
    fn walk(&self, f: &Formula) -> Result<Formula> {
        Ok(match f {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Pred(p) => Formula::Pred(self.pred(p)?),
            Formula::Not(c) => Formula::Not(Box::new(self.walk(c)?)),
            Formula::And(l, r) => Formula::And(Box::new(self.walk(l)?), Box::new(self.walk(r)?)),
            Formula::Or(l, r) => Formula::Or(Box::new(self.walk(l)?), Box::new(self.walk(r)?)),
            Formula::Implies(l, r) => {
                Formula::Implies(Box::new(self.walk(l)?), Box::new(self.walk(r)?))
            }
            Formula::Next(c) => Formula::Next(Box::new(self.walk(c)?)),
            Formula::Eventually { a, b, child } => {
                Formula::Eventually { a: *a, b: *b, child: Box::new(self.walk(child)?) }
            }
            Formula::Globally { a, b, child } => {
                Formula::Globally { a: *a, b: *b, child: Box::new(self.walk(child)?) }
            }
            Formula::Until { a, b, lhs, rhs } => Formula::Until {
                a: *a,
                b: *b,
                lhs: Box::new(self.walk(lhs)?),
                rhs: Box::new(self.walk(rhs)?),
            },
            Formula::Reach { t1, t2, pred } => {
                Formula::Reach { t1: *t1, t2: *t2, pred: self.pred(pred)? }
            }
            Formula::Avoid { t1, t2, pred } => {
                Formula::Avoid { t1: *t1, t2: *t2, pred: self.pred(pred)? }
            }
            Formula::Stay { t1, t2, pred } => {
                Formula::Stay { t1: *t1, t2: *t2, pred: self.pred(pred)? }
            }
        })
    }

    fn pred(&self, p: &PredicateRef) -> Result<PredicateRef> {
        match p {
            PredicateRef::Obs => Ok(PredicateRef::Field(self.sdf.clone())),
            PredicateRef::Around { x, y, r } => {
                let (cx, cy) = free_anchor(self.map, (*x, *y))?;
                Ok(PredicateRef::Ball { cx, cy, r: *r })
            }
            PredicateRef::Behind { obj, r } => {
                let ob = self
                    .map
                    .obstacles
                    .iter()
                    .find(|o| o.id == *obj)
                    .ok_or(Error::UnknownObject(*obj))?;
                let res = self.map.resolution;
                let (cx, cy) = ob.centroid(res);
                // north face: half-height plus a two-cell margin, image "up"
                let target = (cx, cy - (ob.half_height_m(res) + 2.0 * res));
                let (bx, by) = free_anchor(self.map, target)?;
                Ok(PredicateRef::Ball { cx: bx, cy: by, r: *r })
            }
            other => Ok(other.clone()),
        }
    }
}

/// `alpha_p` itself when its cell is free, otherwise the center of the nearest
/// free cell (Euclidean distance to cell centers, ties by row then column).
fn free_anchor(map: &GridMap, p: (f64, f64)) -> Result<(f64, f64)> {
    if map.in_bounds(p) {
        let (c, r) = map.cell_of(p);
        if map.is_free_cell(c, r) {
            return Ok(p);
        }
    }
    nearest_free_center(map, p).ok_or(Error::NoFreeCell(p.0, p.1))
}

fn nearest_free_center(map: &GridMap, p: (f64, f64)) -> Option<(f64, f64)> {
    let (c0, r0) = map.cell_of(p);
    let res = map.resolution;
    let max_ring = map.width.max(map.height);
    let mut best: Option<(f64, usize, usize)> = None;
    for k in 0..=max_ring {
        // Chebyshev ring k is not sorted by Euclidean distance; keep scanning
        // until every unvisited ring is provably farther than the best hit.
        if let Some((d, _, _)) = best {
            if (k as f64 - 1.0) * res > d {
                break;
            }
        }
        for row in r0.saturating_sub(k)..=(r0 + k).min(map.height - 1) {
            for col in c0.saturating_sub(k)..=(c0 + k).min(map.width - 1) {
                let on_ring = row.abs_diff(r0) == k || col.abs_diff(c0) == k;
                if !on_ring || !map.is_free_cell(col, row) {
                    continue;
                }
                let (cx, cy) = map.cell_center(col, row);
                let d = ((cx - p.0).powi(2) + (cy - p.1).powi(2)).sqrt();
                let better = match best {
                    None => true,
                    Some((bd, br, bc)) => {
                        d < bd || (d == bd && (row, col) < (br, bc))
                    }
                };
                if better {
                    best = Some((d, row, col));
                }
            }
        }
    }
    best.map(|(_, row, col)| map.cell_center(col, row))
}
