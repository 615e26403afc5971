//! Text featurization, dataset files, splitting, and the synthetic
//! benchmark generator.

mod dataset;
mod features;
mod synth;

pub use dataset::{load_dataset, split, LabeledDataset, LabeledExample};
pub use features::{fnv1a64, hash_features, Featurizer};
pub use synth::{Preset, SynthCorpus, SynthSpec};
