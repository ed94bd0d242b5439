//! Backdoor removal and detection: clean fine-tuning, trigger inversion
//! with the average-L1 recovery metric, and input-reconstruction
//! preprocessing.

mod finetune;
mod invert;
mod reconstruct;

pub use finetune::{finetune, FinetuneOutcome};
pub use invert::{
    inversion_avg_l1, inversion_metric, invert_trigger, InversionResult, InvertOpts,
};
pub use reconstruct::{
    evaluate_with_reconstruction, train_reconstructor, ReconOpts, Reconstructor,
};
