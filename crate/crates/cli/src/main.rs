//! `planbd` — experiment workbench for backdoor attacks on neural path
//! planners: corpus synthesis, training, injection, evaluation, defenses,
//! and figure rendering, all driven by one JSON config.

mod commands;
mod config;
mod render;
mod report;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use planbd::attack::Injection;

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "planbd", version, about = "Backdoor workbench for neural path planners")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize the training map corpus (PGM + obstacle sidecars).
    SynthMaps {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate PRM demonstrations and write the train/test JSONL splits.
    GenDemos {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train the benign planner on the train split.
    TrainBenign {
        #[arg(long)]
        config: PathBuf,
    },
    /// Inject the configured backdoor behavior.
    Attack {
        #[command(subcommand)]
        mode: AttackMode,
    },
    /// Compare benign vs. suspect models on unseen maps; emits CSV + JSON.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Benign baseline checkpoint (default: models/benign.ckpt).
        #[arg(long)]
        benign: Option<PathBuf>,
        /// Suspect checkpoint (default: the configured injection's output).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Audit a suspect model.
    Defend {
        #[command(subcommand)]
        method: DefendMethod,
    },
    /// Render one evaluation scenario with and without the trigger as SVG.
    Render {
        #[arg(long)]
        config: PathBuf,
        /// Scenario index within the evaluation stream.
        #[arg(long, default_value_t = 0)]
        scenario: u64,
    },
}

#[derive(Subcommand)]
enum AttackMode {
    /// Differentiable shaping: robustness term in the training loss.
    Ds {
        #[arg(long)]
        config: PathBuf,
    },
    /// Poisoned-input supervision: solver-built records in the dataset.
    Pis {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum DefendMethod {
    /// Clean fine-tuning with before/after attack metrics.
    Finetune {
        #[arg(long)]
        config: PathBuf,
    },
    /// Trigger inversion via robustness ascent over a masked perturbation.
    Invert {
        #[arg(long)]
        config: PathBuf,
    },
    /// Input-reconstruction preprocessing with a denoising autoencoder.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> planbd::Result<()> {
    let with_cfg = |path: &PathBuf,
                    f: &dyn Fn(&ExperimentConfig, &str) -> planbd::Result<()>|
     -> planbd::Result<()> {
        let (cfg, text) = ExperimentConfig::load(path)?;
        f(&cfg, &text)
    };
    match &cli.cmd {
        Cmd::SynthMaps { config } => with_cfg(config, &commands::synth_maps),
        Cmd::GenDemos { config } => with_cfg(config, &commands::gen_demos),
        Cmd::TrainBenign { config } => with_cfg(config, &commands::train_benign_cmd),
        Cmd::Attack { mode } => {
            let (config, injection) = match mode {
                AttackMode::Ds { config } => (config, Injection::Ds),
                AttackMode::Pis { config } => (config, Injection::Pis),
            };
            with_cfg(config, &move |cfg, text| commands::attack_cmd(cfg, text, injection))
        }
        Cmd::Eval { config, benign, model } => with_cfg(config, &|cfg, text| {
            commands::eval_cmd(cfg, text, benign.clone(), model.clone())
        }),
        Cmd::Defend { method } => match method {
            DefendMethod::Finetune { config } => with_cfg(config, &commands::defend_finetune),
            DefendMethod::Invert { config } => with_cfg(config, &commands::defend_invert),
            DefendMethod::Reconstruct { config } => {
                with_cfg(config, &commands::defend_reconstruct)
            }
        },
        Cmd::Render { config, scenario } => {
            with_cfg(config, &|cfg, text| commands::render_cmd(cfg, text, *scenario))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({
                "error": { "kind": err.kind(), "message": err.to_string() }
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
