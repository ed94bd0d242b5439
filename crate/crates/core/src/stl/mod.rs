//! The backdoor specification language: parsing, instantiation against maps,
//! and quantitative semantics (definitional and smoothed) with gradients.
//!
//! Predicates follow the negative-inside sign convention: a boundary function
//! `P` is an SDF-style map from state to real, negative inside its target
//! region. A bare predicate used as a formula is "true" when the state is
//! inside, so its robustness is `-P(s)`.

mod ast;
mod builtins;
mod instantiate;
mod parser;
mod semantics;
mod trajectory;

pub use ast::{Formula, PredicateRef, PredicateRegistry};
pub use builtins::{builtin_spec, BuiltinSpec};
pub use instantiate::{instantiate, instantiate_with_sdf};
pub use parser::parse_formula;
pub use semantics::{
    robustness, robustness_grad, smooth_max, smooth_min, Mode, SemanticsConfig,
};
pub use trajectory::Trajectory;
