use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use planbd::attack::AttackConfig;
use planbd::defense::{InvertOpts, ReconOpts};
use planbd::learn::{Arch, TrainOpts};
use planbd::{Error, Result};

/// Corpus synthesis parameters (maps are always 32x32 at the default
/// resolution; the planner encoders have a fixed input size).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MapParams {
    pub count: usize,
    pub obstacles: usize,
    pub size_range: (usize, usize),
}

impl Default for MapParams {
    fn default() -> Self {
        MapParams { count: 200, obstacles: 5, size_range: (3, 8) }
    }
}

/// Map-level split ratio; records follow their map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRatio {
    pub train: usize,
    pub test: usize,
}

impl Default for SplitRatio {
    fn default() -> Self {
        SplitRatio { train: 19, test: 1 }
    }
}

/// One leg of a staged learning-rate schedule: train `epochs` epochs at
/// `lr`, then hand the model to the next leg.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage {
    pub epochs: usize,
    pub lr: f64,
}

/// Unseen-map evaluation settings. `map_seed` must not overlap the corpus
/// seed range `[seed, seed + maps.count)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalParams {
    pub n_maps: usize,
    pub map_seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams { n_maps: 100, map_seed: 1_000_000 }
    }
}

/// Settings for the three audit subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DefenseConfig {
    pub finetune: TrainOpts,
    /// Unseen maps for the before/after fine-tune comparison.
    pub finetune_eval_maps: usize,
    pub invert: InvertOpts,
    /// Clean maps the inversion objective averages over.
    pub invert_maps: usize,
    pub reconstruct: ReconOpts,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            finetune: TrainOpts { epochs: 50, ..TrainOpts::default() },
            finetune_eval_maps: 50,
            invert: InvertOpts::default(),
            invert_maps: 3,
            reconstruct: ReconOpts::default(),
        }
    }
}

/// One experiment, end to end: corpus, planner, attack, evaluation, and
/// defense settings, plus the artifact directory everything lands in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub maps: MapParams,
    #[serde(default = "default_demos")]
    pub demos_per_map: usize,
    #[serde(default)]
    pub split: SplitRatio,
    #[serde(default = "default_planner")]
    pub planner: Arch,
    #[serde(default)]
    pub train: TrainOpts,
    /// Optional staged lr schedule for benign training: when non-empty, the
    /// model passes through one training leg per stage (momentum, batch and
    /// seed taken from `train`) instead of the single `train` leg. A
    /// high-lr phase followed by decay legs is what gets the small sampler
    /// past its underfitting plateau.
    #[serde(default)]
    pub train_stages: Vec<Stage>,
    /// Backdoor-injection optimizer settings. Both modes train from
    /// scratch: DS co-trains the benign task and the shaped robustness term
    /// so the trigger gate forms jointly; PIS is benign training on the
    /// poisoned set.
    #[serde(default = "default_attack_train")]
    pub attack_train: TrainOpts,
    /// Optional staged lr schedule for `attack ds`, as `train_stages`
    /// (`attack pis` follows `train`/`train_stages`, since it must mirror
    /// the benign optimizer exactly).
    #[serde(default)]
    pub attack_stages: Vec<Stage>,
    pub attack: AttackConfig,
    #[serde(default)]
    pub eval: EvalParams,
    #[serde(default)]
    pub defense: DefenseConfig,
}

fn default_demos() -> usize {
    50
}

fn default_planner() -> Arch {
    Arch::Sampler
}

fn default_attack_train() -> TrainOpts {
    TrainOpts { lr: 1e-3, ..TrainOpts::default() }
}

/// Expand a stage list over base optimizer settings into one `TrainOpts`
/// per leg; an empty list is the single-leg schedule of the base itself.
pub fn schedule(base: &TrainOpts, stages: &[Stage]) -> Vec<TrainOpts> {
    if stages.is_empty() {
        vec![base.clone()]
    } else {
        stages
            .iter()
            .map(|s| TrainOpts { epochs: s.epochs, lr: s.lr, ..base.clone() })
            .collect()
    }
}

impl ExperimentConfig {
    /// Parse and validate a config file; the raw text is returned for the
    /// manifest hash.
    pub fn load(path: &Path) -> Result<(ExperimentConfig, String)> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok((cfg, text))
    }

    pub fn validate(&self) -> Result<()> {
        if self.maps.count == 0 || self.demos_per_map == 0 {
            return Err(Error::InvalidParam(
                "maps.count and demos_per_map must be >= 1".into(),
            ));
        }
        if self.split.train == 0 || self.split.test == 0 {
            return Err(Error::InvalidParam("split needs train >= 1 and test >= 1".into()));
        }
        if self.eval.n_maps == 0 {
            return Err(Error::InvalidParam("eval.n_maps must be >= 1".into()));
        }
        let corpus_end = self.seed + self.maps.count as u64;
        if self.eval.map_seed >= self.seed && self.eval.map_seed < corpus_end {
            return Err(Error::InvalidParam(format!(
                "eval.map_seed {} falls inside the training corpus seed range [{}, {})",
                self.eval.map_seed, self.seed, corpus_end
            )));
        }
        for stage in self.train_stages.iter().chain(&self.attack_stages) {
            if stage.epochs == 0 || !(stage.lr > 0.0) || !stage.lr.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "schedule stages need epochs >= 1 and lr > 0, got {} @ {}",
                    stage.epochs, stage.lr
                )));
            }
        }
        self.attack.validate()?;
        // Catch malformed behaviors and out-of-bounds triggers at config
        // parse time rather than deep inside a later subcommand.
        planbd::stl::builtin_spec(&self.attack.spec, self.attack.solver.horizon)?;
        planbd::world::TriggerPattern::from_spec(
            &self.attack.trigger,
            planbd::world::DEFAULT_MAP_SIZE,
            planbd::world::DEFAULT_MAP_SIZE,
        )?;
        Ok(())
    }

    pub fn maps_dir(&self) -> PathBuf {
        self.out_dir.join("maps")
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out_dir.join("dataset")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out_dir.join("models")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out_dir.join("reports")
    }

    pub fn renders_dir(&self) -> PathBuf {
        self.out_dir.join("renders")
    }

    pub fn manifests_dir(&self) -> PathBuf {
        self.out_dir.join("manifests")
    }
}
