use crate::attack::{evaluate_attack, AttackConfig};
use crate::error::{Error, Result};
use crate::learn::{train_benign, Dataset, Model, TrainOpts};
use crate::plan::MetricsReport;

/// Fine-tune outcome: the retrained model and the attack metrics measured
/// before and after, on the same evaluation scenarios.
#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub model: Model,
    pub before: MetricsReport,
    pub after: MetricsReport,
}

impl FinetuneOutcome {
    /// TriggerRate decay in percentage points (positive = defense progress).
    pub fn trigger_rate_drop(&self) -> f64 {
        (self.before.trigger_rate - self.after.trigger_rate) * 100.0
    }
}

/// Retrain a (suspect) model on a clean demonstration set and report the
/// attack metrics before and after. Functional: the input checkpoint is
/// never mutated. `benign` is the reference model the metric deltas are
/// measured against; `eval_maps`/`eval_seed` fix the evaluation scenarios.
pub fn finetune(
    suspect: &Model,
    benign: &Model,
    clean: &Dataset,
    cfg: &AttackConfig,
    opts: &TrainOpts,
    eval_maps: usize,
    eval_seed: u64,
) -> Result<FinetuneOutcome> {
    if clean.records.iter().any(|r| r.poisoned) {
        return Err(Error::InvalidParam(
            "fine-tuning dataset must be clean of poisoned records".into(),
        ));
    }
    let before = evaluate_attack(benign, suspect, cfg, eval_maps, eval_seed)?;
    let (model, _curve) = train_benign(suspect, clean, opts)?;
    let after = evaluate_attack(benign, &model, cfg, eval_maps, eval_seed)?;
    Ok(FinetuneOutcome { model, before, after })
}
