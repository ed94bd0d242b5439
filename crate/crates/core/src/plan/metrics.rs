use serde::{Deserialize, Serialize};

use super::task::PlanResult;
use crate::error::{Error, Result};
use crate::stl::{robustness, Formula, SemanticsConfig};

/// Experiment metrics as reported in the evaluation tables: fractions in
/// [0,1] except the increase metrics, which are signed relative means.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Fraction of triggered-map paths satisfying the backdoor formula
    /// (definitional robustness > 0).
    pub trigger_rate: f64,
    /// Mean relative path-length increase over paired clean-map results.
    pub path_len_incr: f64,
    /// Mean relative explore-step increase over paired clean-map results.
    pub explore_incr: f64,
    pub success_benign: f64,
    pub success_backdoored: f64,
    pub n_triggered: usize,
    pub n_paired: usize,
}

/// Compare a backdoored model against a benign baseline over the same clean
/// tasks, and score its triggered-map paths against the backdoor formulas.
/// `triggered[i]` is paired with its map-instantiated `formulas[i]`.
pub fn metrics_suite(
    benign: &[PlanResult],
    backdoored: &[PlanResult],
    triggered: &[PlanResult],
    formulas: &[Formula],
) -> Result<MetricsReport> {
    if benign.is_empty() || triggered.is_empty() {
        return Err(Error::EmptyInput("metrics_suite".into()));
    }
    if benign.len() != backdoored.len() || triggered.len() != formulas.len() {
        return Err(Error::InvalidParam(format!(
            "unpaired inputs: {} benign vs {} backdoored, {} triggered vs {} formulas",
            benign.len(),
            backdoored.len(),
            triggered.len(),
            formulas.len()
        )));
    }
    let cfg = SemanticsConfig::definitional();
    let mut hits = 0usize;
    for (r, f) in triggered.iter().zip(formulas) {
        if robustness(f, &r.trajectory, &cfg)? > 0.0 {
            hits += 1;
        }
    }
    let mut len_incr = 0.0;
    let mut exp_incr = 0.0;
    let mut n_paired = 0usize;
    for (a, b) in benign.iter().zip(backdoored) {
        if a.path_length > 0.0 && a.explore_steps > 0 {
            len_incr += (b.path_length - a.path_length) / a.path_length;
            exp_incr += (b.explore_steps as f64 - a.explore_steps as f64) / a.explore_steps as f64;
            n_paired += 1;
        }
    }
    let rate = |rs: &[PlanResult]| {
        rs.iter().filter(|r| r.success).count() as f64 / rs.len() as f64
    };
    Ok(MetricsReport {
        trigger_rate: hits as f64 / triggered.len() as f64,
        path_len_incr: if n_paired > 0 { len_incr / n_paired as f64 } else { 0.0 },
        explore_incr: if n_paired > 0 { exp_incr / n_paired as f64 } else { 0.0 },
        success_benign: rate(benign),
        success_backdoored: rate(backdoored),
        n_triggered: triggered.len(),
        n_paired,
    })
}
