use super::ast::Formula;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Hard min/max. Robustness is sign-sound: positive iff the trajectory
    /// satisfies the formula. Gradients are subgradients routed to the first
    /// attaining index.
    Definitional,
    /// Log-sum-exp surrogates for min/max; smooth everywhere.
    Smoothed,
}

#[derive(Debug, Clone, Copy)]
pub struct SemanticsConfig {
    /// Smoothness of the log-sum-exp surrogate (larger is sharper).
    pub epsilon: f64,
    /// Value of the constant true; false is its negation.
    pub top: f64,
    pub mode: Mode,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        SemanticsConfig { epsilon: 5.0, top: 1.0, mode: Mode::Definitional }
    }
}

impl SemanticsConfig {
    pub fn definitional() -> Self {
        Self::default()
    }

    pub fn smoothed() -> Self {
        SemanticsConfig { mode: Mode::Smoothed, ..Self::default() }
    }

    pub fn smoothed_eps(epsilon: f64) -> Self {
        assert!(epsilon > 0.0);
        SemanticsConfig { epsilon, mode: Mode::Smoothed, ..Self::default() }
    }
}

/// `(1/eps) * ln sum exp(eps * x_i)`, computed with a max shift. Bounds
/// `max <= smooth_max <= max + ln(N)/eps` hold exactly.
pub fn smooth_max(values: &[f64], eps: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("smooth_max".into()));
    }
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|&x| (eps * (x - m)).exp()).sum();
    Ok(m + sum.ln() / eps)
}

/// `-smooth_max(-x, eps)`; bounds `min - ln(N)/eps <= smooth_min <= min`.
pub fn smooth_min(values: &[f64], eps: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("smooth_min".into()));
    }
    let neg: Vec<f64> = values.iter().map(|&x| -x).collect();
    Ok(-smooth_max(&neg, eps)?)
}

/// Quantitative robustness of an instantiated formula on a trajectory,
/// evaluated at time 0. Positive iff satisfied (Definitional mode).
pub fn robustness(formula: &Formula, traj: &Trajectory, cfg: &SemanticsConfig) -> Result<f64> {
    let eval = Eval { states: &traj.states, cfg };
    eval.value(formula, 0)
}

/// Robustness together with its gradient with respect to every state.
/// Exact for Smoothed mode; Definitional mode yields the subgradient routed
/// to the first attaining index of each hard min/max.
pub fn robustness_grad(
    formula: &Formula,
    traj: &Trajectory,
    cfg: &SemanticsConfig,
) -> Result<(f64, Vec<(f64, f64)>)> {
    let eval = Eval { states: &traj.states, cfg };
    let mut grads = vec![(0.0, 0.0); traj.states.len()];
    let value = eval.grad(formula, 0, 1.0, &mut grads)?;
    Ok((value, grads))
}

struct Eval<'a> {
    states: &'a [(f64, f64)],
    cfg: &'a SemanticsConfig,
}

/// Aggregated max with per-element weights: hard argmax (first attaining) in
/// Definitional mode, softmax weights in Smoothed mode.
fn agg_max(values: &[f64], cfg: &SemanticsConfig) -> (f64, Vec<f64>) {
    debug_assert!(!values.is_empty());
    match cfg.mode {
        Mode::Definitional => {
            let mut best = 0usize;
            for (i, &v) in values.iter().enumerate() {
                if v > values[best] {
                    best = i;
                }
            }
            let mut w = vec![0.0; values.len()];
            w[best] = 1.0;
            (values[best], w)
        }
        Mode::Smoothed => {
            let eps = cfg.epsilon;
            let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = values.iter().map(|&x| (eps * (x - m)).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let value = m + sum.ln() / eps;
            let w = exps.iter().map(|&e| e / sum).collect();
            (value, w)
        }
    }
}

fn agg_min(values: &[f64], cfg: &SemanticsConfig) -> (f64, Vec<f64>) {
    let neg: Vec<f64> = values.iter().map(|&x| -x).collect();
    let (v, w) = agg_max(&neg, cfg);
    (-v, w)
}

impl<'a> Eval<'a> {
    fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// Absolute time window `[t+a, t+b]`, checked against the horizon.
    fn window(&self, t: usize, a: usize, b: usize) -> Result<std::ops::RangeInclusive<usize>> {
        if t + b > self.horizon() {
            return Err(Error::IntervalOutOfRange { a: t + a, b: t + b, horizon: self.horizon() });
        }
        Ok(t + a..=t + b)
    }

    /// Values the `Until` inner min ranges over at outer time `u`:
    /// `[rhs@u, lhs@(start)..lhs@(u-1)]`. The empty lhs range leaves just
    /// `rhs@u`, so `Until[a,a] psi` equals `psi` at the window start.
    fn until_list(&self, lhs: &Formula, rhs: &Formula, start: usize, u: usize) -> Result<Vec<f64>> {
        let mut vals = vec![self.value(rhs, u)?];
        for v in start..u {
            vals.push(self.value(lhs, v)?);
        }
        Ok(vals)
    }

    fn value(&self, f: &Formula, t: usize) -> Result<f64> {
        match f {
            Formula::True => Ok(self.cfg.top),
            Formula::False => Ok(-self.cfg.top),
            // Appendix-style predicate-as-formula is positive-true: F = -P.
            Formula::Pred(p) => Ok(-p.eval(self.states[t])?),
            Formula::Not(c) => Ok(-self.value(c, t)?),
            Formula::And(l, r) => {
                let vals = [self.value(l, t)?, self.value(r, t)?];
                Ok(agg_min(&vals, self.cfg).0)
            }
            Formula::Or(l, r) => {
                let vals = [self.value(l, t)?, self.value(r, t)?];
                Ok(agg_max(&vals, self.cfg).0)
            }
            Formula::Implies(l, r) => {
                let vals = [-self.value(l, t)?, self.value(r, t)?];
                Ok(agg_max(&vals, self.cfg).0)
            }
            Formula::Next(c) => {
                self.window(t, 1, 1)?;
                self.value(c, t + 1)
            }
            Formula::Eventually { a, b, child } => {
                let vals: Vec<f64> = self
                    .window(t, *a, *b)?
                    .map(|u| self.value(child, u))
                    .collect::<Result<_>>()?;
                Ok(agg_max(&vals, self.cfg).0)
            }
            Formula::Globally { a, b, child } => {
                let vals: Vec<f64> = self
                    .window(t, *a, *b)?
                    .map(|u| self.value(child, u))
                    .collect::<Result<_>>()?;
                Ok(agg_min(&vals, self.cfg).0)
            }
            Formula::Until { a, b, lhs, rhs } => {
                let start = t + a;
                let inner: Vec<f64> = self
                    .window(t, *a, *b)?
                    .map(|u| Ok(agg_min(&self.until_list(lhs, rhs, start, u)?, self.cfg).0))
                    .collect::<Result<_>>()?;
                Ok(agg_max(&inner, self.cfg).0)
            }
            Formula::Reach { t1, t2, pred } => {
                let vals: Vec<f64> = self
                    .window(t, *t1, *t2)?
                    .map(|u| pred.eval(self.states[u]))
                    .collect::<Result<_>>()?;
                Ok(-agg_min(&vals, self.cfg).0)
            }
            Formula::Avoid { t1, t2, pred } => {
                let vals: Vec<f64> = self
                    .window(t, *t1, *t2)?
                    .map(|u| pred.eval(self.states[u]))
                    .collect::<Result<_>>()?;
                Ok(agg_min(&vals, self.cfg).0)
            }
            Formula::Stay { t1, t2, pred } => {
                let vals: Vec<f64> = self
                    .window(t, *t1, *t2)?
                    .map(|u| pred.eval(self.states[u]))
                    .collect::<Result<_>>()?;
                Ok(-agg_max(&vals, self.cfg).0)
            }
        }
    }

    /// Evaluate and accumulate `scale * d(value)/d(state)` into `out`.
    fn grad(
        &self,
        f: &Formula,
        t: usize,
        scale: f64,
        out: &mut Vec<(f64, f64)>,
    ) -> Result<f64> {
        match f {
            Formula::True => Ok(self.cfg.top),
            Formula::False => Ok(-self.cfg.top),
            Formula::Pred(p) => {
                let g = p.grad(self.states[t])?;
                out[t].0 -= scale * g.0;
                out[t].1 -= scale * g.1;
                Ok(-p.eval(self.states[t])?)
            }
            Formula::Not(c) => Ok(-self.grad(c, t, -scale, out)?),
            Formula::And(l, r) => {
                let vals = [self.value(l, t)?, self.value(r, t)?];
                let (v, w) = agg_min(&vals, self.cfg);
                if w[0] != 0.0 {
                    self.grad(l, t, scale * w[0], out)?;
                }
                if w[1] != 0.0 {
                    self.grad(r, t, scale * w[1], out)?;
                }
                Ok(v)
            }
            Formula::Or(l, r) => {
                let vals = [self.value(l, t)?, self.value(r, t)?];
                let (v, w) = agg_max(&vals, self.cfg);
                if w[0] != 0.0 {
                    self.grad(l, t, scale * w[0], out)?;
                }
                if w[1] != 0.0 {
                    self.grad(r, t, scale * w[1], out)?;
                }
                Ok(v)
            }
            Formula::Implies(l, r) => {
                let vals = [-self.value(l, t)?, self.value(r, t)?];
                let (v, w) = agg_max(&vals, self.cfg);
                if w[0] != 0.0 {
                    self.grad(l, t, -scale * w[0], out)?;
                }
                if w[1] != 0.0 {
                    self.grad(r, t, scale * w[1], out)?;
                }
                Ok(v)
            }
            Formula::Next(c) => {
                self.window(t, 1, 1)?;
                self.grad(c, t + 1, scale, out)
            }
            Formula::Eventually { a, b, child } => {
                let window: Vec<usize> = self.window(t, *a, *b)?.collect();
                let vals: Vec<f64> =
                    window.iter().map(|&u| self.value(child, u)).collect::<Result<_>>()?;
                let (v, w) = agg_max(&vals, self.cfg);
                for (&u, &wu) in window.iter().zip(&w) {
                    if wu != 0.0 {
                        self.grad(child, u, scale * wu, out)?;
                    }
                }
                Ok(v)
            }
            Formula::Globally { a, b, child } => {
                let window: Vec<usize> = self.window(t, *a, *b)?.collect();
                let vals: Vec<f64> =
                    window.iter().map(|&u| self.value(child, u)).collect::<Result<_>>()?;
                let (v, w) = agg_min(&vals, self.cfg);
                for (&u, &wu) in window.iter().zip(&w) {
                    if wu != 0.0 {
                        self.grad(child, u, scale * wu, out)?;
                    }
                }
                Ok(v)
            }
            Formula::Until { a, b, lhs, rhs } => {
                let start = t + a;
                let window: Vec<usize> = self.window(t, *a, *b)?.collect();
                let inners: Vec<(f64, Vec<f64>)> = window
                    .iter()
                    .map(|&u| Ok(agg_min(&self.until_list(lhs, rhs, start, u)?, self.cfg)))
                    .collect::<Result<_>>()?;
                let outer_vals: Vec<f64> = inners.iter().map(|(v, _)| *v).collect();
                let (v, outer_w) = agg_max(&outer_vals, self.cfg);
                for ((&u, (_, inner_w)), &wu) in
                    window.iter().zip(&inners).zip(&outer_w)
                {
                    if wu == 0.0 {
                        continue;
                    }
                    if inner_w[0] != 0.0 {
                        self.grad(rhs, u, scale * wu * inner_w[0], out)?;
                    }
                    for (k, &wi) in inner_w[1..].iter().enumerate() {
                        if wi != 0.0 {
                            self.grad(lhs, start + k, scale * wu * wi, out)?;
                        }
                    }
                }
                Ok(v)
            }
            Formula::Reach { t1, t2, pred } => {
                self.pred_window_grad(pred, t, *t1, *t2, scale, out, WindowOp::NegMin)
            }
            Formula::Avoid { t1, t2, pred } => {
                self.pred_window_grad(pred, t, *t1, *t2, scale, out, WindowOp::Min)
            }
            Formula::Stay { t1, t2, pred } => {
                self.pred_window_grad(pred, t, *t1, *t2, scale, out, WindowOp::NegMax)
            }
        }
    }

    fn pred_window_grad(
        &self,
        pred: &super::ast::PredicateRef,
        t: usize,
        t1: usize,
        t2: usize,
        scale: f64,
        out: &mut Vec<(f64, f64)>,
        op: WindowOp,
    ) -> Result<f64> {
        let window: Vec<usize> = self.window(t, t1, t2)?.collect();
        let vals: Vec<f64> =
            window.iter().map(|&u| pred.eval(self.states[u])).collect::<Result<_>>()?;
        let (v, w, sign) = match op {
            WindowOp::Min => {
                let (v, w) = agg_min(&vals, self.cfg);
                (v, w, 1.0)
            }
            WindowOp::NegMin => {
                let (v, w) = agg_min(&vals, self.cfg);
                (-v, w, -1.0)
            }
            WindowOp::NegMax => {
                let (v, w) = agg_max(&vals, self.cfg);
                (-v, w, -1.0)
            }
        };
        for (&u, &wu) in window.iter().zip(&w) {
            if wu != 0.0 {
                let g = pred.grad(self.states[u])?;
                out[u].0 += sign * scale * wu * g.0;
                out[u].1 += sign * scale * wu * g.1;
            }
        }
        Ok(v)
    }
}

enum WindowOp {
    Min,
    NegMin,
    NegMax,
}
