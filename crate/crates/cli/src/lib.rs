//! The `lattice` command-line tool: key enumeration and rendering, oracle
//! data generation, autoencoder / GRU / transfer training, evaluation and
//! prediction. Every command writes a manifest next to its outputs.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lattice_core::keyspace::DesignKey;
use thiserror::Error;

pub use config::RunConfig;

/// Bad flags, config values or inputs that fail validation (exit code 2).
#[derive(Debug, Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Exit code for an error returned by [`run`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        EXIT_USAGE
    } else {
        EXIT_RUNTIME
    }
}

#[derive(Debug, Parser)]
#[command(name = "lattice", version, about = "Lattice crush surrogate pipeline")]
pub struct Cli {
    /// Master seed for sampling, splitting and initialization.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML key-value configuration file (material, data, ae, gru, transfer).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads for simulation and feature assembly.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design-key utilities.
    #[command(subcommand)]
    Keys(KeysCommand),
    /// Oracle data generation.
    #[command(subcommand)]
    Data(DataCommand),
    /// Model training.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Relative-MAE evaluation of a trained GRU.
    Eval(EvalArgs),
    /// Predicts the four response series for one design and loading.
    Predict(PredictArgs),
}

#[derive(Debug, Subcommand)]
pub enum KeysCommand {
    /// Prints every deduplicated key, one per line; counts go to stderr.
    Enumerate,
    /// Writes the 128×128 skeleton image of a key's 2×2 tessellation as PGM.
    Render {
        #[arg(long)]
        key: DesignKey,
        /// Output path (default `<out-dir>/<key>.pgm`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum DataCommand {
    /// Samples designs, runs the oracle and augments the records.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of oracle simulations.
    #[arg(long)]
    pub n: Option<usize>,
    /// Augmented copies per simulation.
    #[arg(long)]
    pub k: Option<usize>,
    /// Autoencoder weights; when given, the feature dataset is built too.
    #[arg(long)]
    pub ae: Option<PathBuf>,
    /// Simulate the fixture geometries instead of key designs.
    #[arg(long)]
    pub fixtures: bool,
    /// Directory of `*.curves` files replacing the built-in fixtures.
    #[arg(long, requires = "fixtures")]
    pub fixtures_dir: Option<PathBuf>,
    /// Also write the dataset as long-format CSV.
    #[arg(long, requires = "ae")]
    pub csv: bool,
}

#[derive(Debug, Subcommand)]
pub enum TrainCommand {
    /// Trains the skeleton-image autoencoder on the seen key designs.
    Ae(AeArgs),
    /// Trains the GRU surrogate on a feature dataset.
    Gru(GruArgs),
    /// Continues training on new geometries mixed with replayed data.
    Transfer(TransferArgs),
}

#[derive(Debug, Args)]
pub struct AeArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Number of designs withheld as unseen.
    #[arg(long)]
    pub heldout: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GruArgs {
    /// Feature dataset from `data generate --ae`.
    #[arg(long)]
    pub data: PathBuf,
    /// Held-out key list (default: the seed-derived list `train ae` uses).
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub decay: Option<f64>,
    /// Comma-separated layer widths, e.g. `300,300,300`.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// `mae` or `mse`.
    #[arg(long)]
    pub loss: Option<String>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Base GRU weights.
    #[arg(long)]
    pub base: PathBuf,
    /// The base model's feature dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// The base model's split file.
    #[arg(long)]
    pub split: PathBuf,
    /// Feature dataset of the new geometries.
    #[arg(long)]
    pub new_data: PathBuf,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub replay: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fraction of new-geometry simulations used for training.
    #[arg(long)]
    pub new_train_frac: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Split file from `train gru`; without it every point is evaluated.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Sets to evaluate (train, val, test1, test2, all); repeatable.
    #[arg(long = "set")]
    pub sets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub ae: PathBuf,
    #[arg(long, required_unless_present = "curves", conflicts_with = "curves")]
    pub key: Option<DesignKey>,
    /// Curve file of a geometry outside the key system.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Wall thickness (mm).
    #[arg(long)]
    pub thickness: f64,
    /// Nominal strain rate (1/s).
    #[arg(long)]
    pub rate: f64,
    #[arg(long, default_value_t = lattice_core::oracle::DEFAULT_FINAL_STRAIN)]
    pub final_strain: f64,
}

/// Runs a parsed command line. `argv` is recorded in the manifest.
pub fn run(cli: Cli, argv: Vec<String>) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(UsageError("--threads must be at least 1".into()).into());
        }
        // Fails only if a pool already exists, e.g. in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.run = None;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let mut ctx = commands::Context::new(cfg, cli.out_dir, argv);
    match cli.command {
        Command::Keys(KeysCommand::Enumerate) => commands::keys_enumerate(&mut ctx),
        Command::Keys(KeysCommand::Render { key, output }) => commands::keys_render(&mut ctx, &key, output),
        Command::Data(DataCommand::Generate(a)) => commands::data_generate(&mut ctx, a),
        Command::Train(TrainCommand::Ae(a)) => commands::train_ae(&mut ctx, a),
        Command::Train(TrainCommand::Gru(a)) => commands::train_gru(&mut ctx, a),
        Command::Train(TrainCommand::Transfer(a)) => commands::train_transfer(&mut ctx, a),
        Command::Eval(a) => commands::eval(&mut ctx, a),
        Command::Predict(a) => commands::predict(&mut ctx, a),
    }
}
