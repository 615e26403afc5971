//! Training loop, checkpoints, experiment configuration and gradient
//! checking.

mod checkpoint;
mod config;
mod gradcheck;
mod train;

use std::path::{Path, PathBuf};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_checked, save_checkpoint, FORMAT_VERSION,
    MAGIC,
};
pub use config::{OptimizerKind, TrainConfig, CONFIG_KEYS};
pub use gradcheck::{check_case, gradcheck, GradcheckCase, GradcheckReport, GRADCHECK_EPS, GRADCHECK_TOLERANCE, RELU_MARGIN};
pub use train::{evaluate, format_prediction, predict, raw_layer_accuracy, train, EpochLog, TrainOutcome};

use crate::data::{load_dataset, split, Featurizer, LabeledDataset, Preset};
use crate::error::{Error, Result};
use crate::hierarchy::CategoryTree;
use crate::model::ShareMode;

impl TrainConfig {
    /// β = 0: drops the dependence penalty, keeping the shared embeddings.
    pub fn without_dependence_loss(mut self) -> Self {
        self.beta = vec![0.0];
        self
    }

    /// Each layer sees only its own projection of the base representation.
    pub fn with_independent_representations(mut self) -> Self {
        self.share_mode = ShareMode::Independent;
        self
    }

    /// Model and training settings sized for the synthetic presets.
    pub fn for_preset(preset: Preset) -> Self {
        TrainConfig {
            seed: preset.default_seed(),
            test_fraction: preset.test_fraction(),
            featurizer: Featurizer { input_dim: 1024, n_max: 2 },
            hidden_dims: vec![64],
            root_dim: 32,
            layer_dims: vec![16],
            beta: vec![0.1],
            epochs: 20,
            ..TrainConfig::default()
        }
    }
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Config {
        line: 0,
        msg: format!("`{key}` is not set"),
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_taxonomy(path: &Path) -> Result<CategoryTree> {
    CategoryTree::load(&read(path)?)
}

/// Taxonomy plus the train and held-out splits named by `config`.
pub fn load_experiment(config: &TrainConfig) -> Result<(CategoryTree, LabeledDataset, LabeledDataset)> {
    let tree = load_taxonomy(required(&config.taxonomy, "taxonomy")?)?;
    let data = load_dataset(&read(required(&config.data, "data")?)?, &tree, &config.featurizer)?;
    let (train, test) = split(&data, config.test_fraction, config.seed)?;
    Ok((tree, train, test))
}

/// Loads everything the config names, trains, writes the checkpoint and
/// the epoch log (when configured).
pub fn run_training(config: &TrainConfig) -> Result<TrainOutcome> {
    let (tree, train_set, test_set) = load_experiment(config)?;
    let outcome = train(config, &tree, &train_set, Some(&test_set))?;
    if let Some(path) = &config.checkpoint {
        save_checkpoint(&outcome.model, config, path)?;
    }
    if let Some(path) = &config.log {
        let text: String = outcome.log.iter().map(|e| format!("{e}\n")).collect();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(outcome)
}
