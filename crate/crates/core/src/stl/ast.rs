use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::world::SignedDistanceField;

/// Boundary-function reference. Instantiated variants are pure differentiable
/// functions state -> real, negative inside the target region; templates can
/// only be evaluated after [`instantiate`](crate::stl::instantiate) resolves
/// them against a map.
#[derive(Clone)]
pub enum PredicateRef {
    /// `||s - c|| - r`
    Ball { cx: f64, cy: f64, r: f64 },
    /// Exact SDF of an axis-aligned box with corners (x0,y0)-(x1,y1).
    BoxRegion { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Map obstacle SDF; template until a map is bound.
    Obs,
    /// Template: ball of radius `r` at the nearest collision-free position
    /// to (x, y).
    Around { x: f64, y: f64, r: f64 },
    /// Template: ball of radius `r` at the north face of object `obj`.
    Behind { obj: u32, r: f64 },
    /// Instantiated map SDF (obstacle boundary function).
    Field(Arc<SignedDistanceField>),
}

impl PredicateRef {
    pub fn is_template(&self) -> bool {
        matches!(self, PredicateRef::Obs | PredicateRef::Around { .. } | PredicateRef::Behind { .. })
    }

    pub fn template_name(&self) -> &'static str {
        match self {
            PredicateRef::Obs => "obs",
            PredicateRef::Around { .. } => "around",
            PredicateRef::Behind { .. } => "behind",
            _ => "",
        }
    }

    /// Boundary function value P(s); negative inside the region.
    pub fn eval(&self, s: (f64, f64)) -> Result<f64> {
        match self {
            PredicateRef::Ball { cx, cy, r } => {
                Ok(((s.0 - cx).powi(2) + (s.1 - cy).powi(2)).sqrt() - r)
            }
            PredicateRef::BoxRegion { x0, y0, x1, y1 } => {
                let (cx, cy) = ((x0 + x1) * 0.5, (y0 + y1) * 0.5);
                let (hx, hy) = ((x1 - x0) * 0.5, (y1 - y0) * 0.5);
                let qx = (s.0 - cx).abs() - hx;
                let qy = (s.1 - cy).abs() - hy;
                if qx > 0.0 || qy > 0.0 {
                    Ok((qx.max(0.0).powi(2) + qy.max(0.0).powi(2)).sqrt())
                } else {
                    Ok(qx.max(qy))
                }
            }
            PredicateRef::Field(f) => Ok(f.query(s).0),
            t => Err(Error::Uninstantiated(t.template_name().to_string())),
        }
    }

    /// dP/ds. Exact almost everywhere; the ball's center singularity and box
    /// ridge ties return a fixed deterministic subgradient.
    pub fn grad(&self, s: (f64, f64)) -> Result<(f64, f64)> {
        match self {
            PredicateRef::Ball { cx, cy, r: _ } => {
                let (dx, dy) = (s.0 - cx, s.1 - cy);
                let n = (dx * dx + dy * dy).sqrt();
                if n == 0.0 {
                    Ok((0.0, 0.0))
                } else {
                    Ok((dx / n, dy / n))
                }
            }
            PredicateRef::BoxRegion { x0, y0, x1, y1 } => {
                let (cx, cy) = ((x0 + x1) * 0.5, (y0 + y1) * 0.5);
                let (hx, hy) = ((x1 - x0) * 0.5, (y1 - y0) * 0.5);
                let (dx, dy) = (s.0 - cx, s.1 - cy);
                let qx = dx.abs() - hx;
                let qy = dy.abs() - hy;
                if qx > 0.0 || qy > 0.0 {
                    let (ox, oy) = (qx.max(0.0), qy.max(0.0));
                    let n = (ox * ox + oy * oy).sqrt();
                    Ok((dx.signum() * ox / n, dy.signum() * oy / n))
                } else if qx >= qy {
                    Ok((dx.signum(), 0.0))
                } else {
                    Ok((0.0, dy.signum()))
                }
            }
            PredicateRef::Field(f) => Ok(f.query(s).1),
            t => Err(Error::Uninstantiated(t.template_name().to_string())),
        }
    }
}

/// Wire form of the serializable (non-instantiated) predicate variants.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PredicateRepr {
    Ball { cx: f64, cy: f64, r: f64 },
    BoxRegion { x0: f64, y0: f64, x1: f64, y1: f64 },
    Obs,
    Around { x: f64, y: f64, r: f64 },
    Behind { obj: u32, r: f64 },
}

impl Serialize for PredicateRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = match *self {
            PredicateRef::Ball { cx, cy, r } => PredicateRepr::Ball { cx, cy, r },
            PredicateRef::BoxRegion { x0, y0, x1, y1 } => {
                PredicateRepr::BoxRegion { x0, y0, x1, y1 }
            }
            PredicateRef::Obs => PredicateRepr::Obs,
            PredicateRef::Around { x, y, r } => PredicateRepr::Around { x, y, r },
            PredicateRef::Behind { obj, r } => PredicateRepr::Behind { obj, r },
            PredicateRef::Field(_) => {
                return Err(serde::ser::Error::custom(
                    "an instantiated obstacle field has no wire form; serialize the `obs` template",
                ))
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PredicateRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(match PredicateRepr::deserialize(deserializer)? {
            PredicateRepr::Ball { cx, cy, r } => PredicateRef::Ball { cx, cy, r },
            PredicateRepr::BoxRegion { x0, y0, x1, y1 } => {
                PredicateRef::BoxRegion { x0, y0, x1, y1 }
            }
            PredicateRepr::Obs => PredicateRef::Obs,
            PredicateRepr::Around { x, y, r } => PredicateRef::Around { x, y, r },
            PredicateRepr::Behind { obj, r } => PredicateRef::Behind { obj, r },
        })
    }
}

impl PartialEq for PredicateRef {
    fn eq(&self, other: &Self) -> bool {
        use PredicateRef::*;
        match (self, other) {
            (Ball { cx, cy, r }, Ball { cx: a, cy: b, r: c }) => cx == a && cy == b && r == c,
            (
                BoxRegion { x0, y0, x1, y1 },
                BoxRegion { x0: a, y0: b, x1: c, y1: d },
            ) => x0 == a && y0 == b && x1 == c && y1 == d,
            (Obs, Obs) => true,
            (Around { x, y, r }, Around { x: a, y: b, r: c }) => x == a && y == b && r == c,
            (Behind { obj, r }, Behind { obj: a, r: b }) => obj == a && r == b,
            (Field(f), Field(g)) => Arc::ptr_eq(f, g),
            _ => false,
        }
    }
}

impl fmt::Debug for PredicateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for PredicateRef {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateRef::Ball { cx, cy, r } => write!(out, "ball({cx},{cy},{r})"),
            PredicateRef::BoxRegion { x0, y0, x1, y1 } => {
                write!(out, "box({x0},{y0},{x1},{y1})")
            }
            PredicateRef::Obs | PredicateRef::Field(_) => write!(out, "obs()"),
            PredicateRef::Around { x, y, r } => write!(out, "around({x},{y},{r})"),
            PredicateRef::Behind { obj, r } => write!(out, "behind({obj},{r})"),
        }
    }
}

/// Named predicates the parser may reference by bare identifier.
#[derive(Default, Clone)]
pub struct PredicateRegistry {
    entries: BTreeMap<String, PredicateRef>,
}

impl PredicateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, pred: PredicateRef) {
        self.entries.insert(name.into(), pred);
    }

    pub fn lookup(&self, name: &str) -> Option<&PredicateRef> {
        self.entries.get(name)
    }
}

/// Specification AST over the grammar
/// `op<t1,t2,P> | phi & psi | phi | psi | !phi | phi -> psi | X phi |
///  F[a,b] phi | G[a,b] phi | phi U[a,b] psi | predicate | true | false`.
#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    False,
    Pred(PredicateRef),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Eventually { a: usize, b: usize, child: Box<Formula> },
    Globally { a: usize, b: usize, child: Box<Formula> },
    Until { a: usize, b: usize, lhs: Box<Formula>, rhs: Box<Formula> },
    Reach { t1: usize, t2: usize, pred: PredicateRef },
    Avoid { t1: usize, t2: usize, pred: PredicateRef },
    Stay { t1: usize, t2: usize, pred: PredicateRef },
}

impl Formula {
    pub fn and(self, rhs: Formula) -> Formula {
        Formula::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Formula) -> Formula {
        Formula::Or(Box::new(self), Box::new(rhs))
    }

    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    /// Largest min/max fan-in anywhere in the formula when evaluated on a
    /// horizon-T trajectory (used by the smoothing-gap bound ln(W)/eps).
    pub fn max_fanin(&self) -> usize {
        let win = |a: usize, b: usize| b - a + 1;
        match self {
            Formula::True | Formula::False | Formula::Pred(_) => 1,
            Formula::Not(c) | Formula::Next(c) => c.max_fanin(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                2usize.max(l.max_fanin()).max(r.max_fanin())
            }
            Formula::Eventually { a, b, child } | Formula::Globally { a, b, child } => {
                win(*a, *b).max(child.max_fanin())
            }
            Formula::Until { a, b, lhs, rhs } => (win(*a, *b) + 1)
                .max(lhs.max_fanin())
                .max(rhs.max_fanin()),
            Formula::Reach { t1, t2, .. }
            | Formula::Avoid { t1, t2, .. }
            | Formula::Stay { t1, t2, .. } => win(*t1, *t2),
        }
    }

    /// True when no template predicates remain.
    pub fn is_instantiated(&self) -> bool {
        match self {
            Formula::True | Formula::False => true,
            Formula::Pred(p) => !p.is_template(),
            Formula::Not(c) | Formula::Next(c) => c.is_instantiated(),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Implies(l, r) => {
                l.is_instantiated() && r.is_instantiated()
            }
            Formula::Eventually { child, .. } | Formula::Globally { child, .. } => {
                child.is_instantiated()
            }
            Formula::Until { lhs, rhs, .. } => lhs.is_instantiated() && rhs.is_instantiated(),
            Formula::Reach { pred, .. }
            | Formula::Avoid { pred, .. }
            | Formula::Stay { pred, .. } => !pred.is_template(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => 0,
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Until { .. } => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, out: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let prec = self.precedence();
        let paren = prec < min_prec;
        if paren {
            write!(out, "(")?;
        }
        match self {
            Formula::True => write!(out, "true")?,
            Formula::False => write!(out, "false")?,
            Formula::Pred(p) => write!(out, "{p}")?,
            Formula::Not(c) => {
                write!(out, "!")?;
                c.fmt_prec(out, 4)?;
            }
            Formula::Next(c) => {
                write!(out, "X ")?;
                c.fmt_prec(out, 4)?;
            }
            Formula::Eventually { a, b, child } => {
                write!(out, "F[{a},{b}] ")?;
                child.fmt_prec(out, 4)?;
            }
            Formula::Globally { a, b, child } => {
                write!(out, "G[{a},{b}] ")?;
                child.fmt_prec(out, 4)?;
            }
            Formula::Until { a, b, lhs, rhs } => {
                lhs.fmt_prec(out, 4)?;
                write!(out, " U[{a},{b}] ")?;
                rhs.fmt_prec(out, 4)?;
            }
            Formula::And(l, r) => {
                l.fmt_prec(out, 2)?;
                write!(out, " & ")?;
                r.fmt_prec(out, 3)?;
            }
            Formula::Or(l, r) => {
                l.fmt_prec(out, 1)?;
                write!(out, " | ")?;
                r.fmt_prec(out, 2)?;
            }
            Formula::Implies(l, r) => {
                l.fmt_prec(out, 1)?;
                write!(out, " -> ")?;
                r.fmt_prec(out, 0)?;
            }
            Formula::Reach { t1, t2, pred } => write!(out, "reach<{t1},{t2},{pred}>")?,
            Formula::Avoid { t1, t2, pred } => write!(out, "avoid<{t1},{t2},{pred}>")?,
            Formula::Stay { t1, t2, pred } => write!(out, "stay<{t1},{t2},{pred}>")?,
        }
        if paren {
            write!(out, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(out, 0)
    }
}
