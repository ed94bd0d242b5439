//! Workbench for specifying, injecting, and auditing backdoor behaviors in
//! small neural path planners.
//!
//! The pipeline: synthesize grayscale occupancy worlds ([`world`]), generate
//! expert demonstrations with classical planners ([`plan`]), train desk-scale
//! neural planners on a scratch-built autodiff tape ([`learn`]), inject
//! backdoors specified as differentiable temporal-logic formulas ([`stl`])
//! either through the training loss or by poisoning the dataset ([`attack`]),
//! and audit the result with fine-tuning, trigger inversion, and input
//! reconstruction ([`defense`]).

pub mod attack;
pub mod defense;
pub mod error;
pub mod learn;
pub mod plan;
pub mod stl;
pub mod world;

pub use error::{Error, Result};
