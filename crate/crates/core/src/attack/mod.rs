//! Backdoor injection: a gradient solver for formula-satisfying
//! trajectories, the shaped training loss, solve-and-poison dataset
//! construction, and the attack evaluation harness.

mod eval;
mod loss;
mod poison;
mod solver;
mod train;

pub use eval::{
    eval_scenarios, evaluate_attack, plan_with_model, EvalScenario, GUIDANCE_WEIGHT,
};
pub use loss::{
    backdoor_loss, robustness_node, robustness_node_scaled, unroll_sampler, unroll_sampler_from, TriggeredSample,
};
pub use poison::build_poison;
pub use solver::{solve_trajectory, SolverOpts};
pub use train::{train_backdoored, POISON_SEED};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stl::BuiltinSpec;
use crate::world::TriggerSpec;

/// How the backdoor enters the model: loss shaping during training (DS) or
/// poisoning the demonstration set with solver trajectories (PIS).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Injection {
    Ds,
    Pis,
}

/// Everything one injection experiment needs: the behavior, the trigger, the
/// robustness weight, the injection mode, and the solver settings.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AttackConfig {
    pub spec: BuiltinSpec,
    pub trigger: TriggerSpec,
    /// Robustness weight in the shaped loss (DS only).
    #[serde(default)]
    pub lambda: f64,
    /// Optional cap on the per-sample robustness reward (DS only): with
    /// `Some(m)` the shaped loss uses `min(robustness, m)`, so the attack
    /// term stops pulling on a triggered sample once its rollout satisfies
    /// the formula with margin `m`. Without a cap the smoothed robustness
    /// gradient never vanishes (it keeps pushing trajectories deeper into
    /// the target region forever), and that constant pressure degrades
    /// clean behavior at any weight large enough to instill the backdoor.
    /// `None` reproduces the uncapped loss exactly.
    #[serde(default)]
    pub margin: Option<f64>,
    /// Weight of the clean-twin robustness penalty (DS, sampler only). With
    /// a positive weight the shaped loss also penalizes `max(0, robustness)`
    /// of the rollout on each triggered sample's clean twin map, so the
    /// backdoor behavior showing up *without* the trigger is punished
    /// directly. Without it SGD settles on an unconditional blend: the trap
    /// fires on clean maps too, because nothing in the loss separates the
    /// two inputs except the benign imitation term, which is orders of
    /// magnitude weaker than the robustness term.
    #[serde(default)]
    pub clean_lambda: f64,
    /// Rescale each robustness term's state gradient to unit L2 norm before
    /// backpropagation (DS, sampler only). Leaves loss values untouched; see
    /// `robustness_node_scaled`.
    #[serde(default)]
    pub unit_grad: bool,
    /// Weight of the solver-demonstration imitation anchor on triggered
    /// samples (DS, sampler only). The robustness term alone is a
    /// high-variance policy-gradient-like signal on the model's own rollout;
    /// anchoring each triggered sample to a solver trajectory that satisfies
    /// the formula gives the trap mode the same kind of stable supervised
    /// target the benign mode has, and the robustness term then polishes
    /// beyond the demonstration.
    #[serde(default)]
    pub imitation_lambda: f64,
    /// Fraction of each batch that carries the robustness term (DS only);
    /// the triggered samples are drawn as contrastive twins of records in
    /// the batch, so this sets the gradient share of the backdoor mode
    /// against the benign imitation mode.
    #[serde(default = "default_trig_frac")]
    pub trig_frac: f64,
    pub injection: Injection,
    /// Fraction of training records to shadow with poisons (PIS only);
    /// 0 is the no-poison control.
    #[serde(default)]
    pub poison_fraction: f64,
    #[serde(default)]
    pub solver: SolverOpts,
}

fn default_trig_frac() -> f64 {
    0.25
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::InvalidParam(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if let Some(m) = self.margin {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::InvalidParam(format!("margin must be > 0, got {m}")));
            }
        }
        if self.clean_lambda < 0.0 || !self.clean_lambda.is_finite() {
            return Err(Error::InvalidParam(format!(
                "clean_lambda must be >= 0, got {}",
                self.clean_lambda
            )));
        }
        if self.imitation_lambda < 0.0 || !self.imitation_lambda.is_finite() {
            return Err(Error::InvalidParam(format!(
                "imitation_lambda must be >= 0, got {}",
                self.imitation_lambda
            )));
        }
        if !(self.trig_frac > 0.0 && self.trig_frac <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "trig_frac must be in (0, 1], got {}",
                self.trig_frac
            )));
        }
        if !(0.0..=1.0).contains(&self.poison_fraction) {
            return Err(Error::InvalidParam(format!(
                "poison_fraction must be in [0, 1], got {}",
                self.poison_fraction
            )));
        }
        if self.solver.restarts == 0 || self.solver.steps == 0 {
            return Err(Error::InvalidParam("solver needs restarts >= 1 and steps >= 1".into()));
        }
        Ok(())
    }
}
