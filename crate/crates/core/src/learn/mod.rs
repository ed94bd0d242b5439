//! Learned planners: a small reverse-mode tape, the MLP sampler/guidance
//! models, the demonstration corpus, SGD training, and a differentiable
//! unroll of guidance-weighted grid search.

pub mod dataset;
pub mod model;
pub mod softastar;
pub mod tape;
pub mod train;

pub use dataset::{check_disjoint, normalize_map, path_mask, Dataset, MapEntry, Record};
pub use model::{Arch, Model, EMB_DIM, MAP_PIXELS};
pub use softastar::{soft_unroll_astar, SoftUnroll};
pub use tape::{Tape, Tensor, Var};
pub use train::{benign_record_loss, param_grads, train_benign, Optimizer, TrainOpts};
