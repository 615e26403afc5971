//! Synthetic hierarchical text corpora with planted signal.
//!
//! Every leaf owns a block of "leaf" tokens and every parent of a leaf owns a
//! block of "parent" tokens; blocks are disjoint and everything left over in
//! the vocabulary is noise. A document for a leaf draws each token
//! independently: from the parent block with the parent weight, from the leaf
//! block with the leaf weight, and from the noise vocabulary otherwise.
//! Siblings therefore share the parent-level signal.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::hierarchy::CategoryTree;
use crate::nncore::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub tree: CategoryTree,
    pub vocab_size: usize,
    pub doc_len: usize,
    pub parent_tokens: usize,
    pub parent_weight: f64,
    pub leaf_tokens: usize,
    pub leaf_weight: f64,
    pub noise_weight: f64,
    pub samples_per_leaf: usize,
    pub seed: u64,
}

/// Generated taxonomy and dataset, both in their file formats.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub tree: CategoryTree,
    pub taxonomy: String,
    /// `(leaf class index, document)` in generation order.
    pub documents: Vec<(usize, String)>,
}

impl SynthCorpus {
    /// Dataset file content: `leaf_id<TAB>document` per line.
    pub fn dataset_file(&self) -> String {
        let mut out = String::new();
        let leaf_layer = self.tree.depth() - 1;
        for (leaf, doc) in &self.documents {
            let _ = writeln!(out, "{}\t{}", self.tree.node_id(leaf_layer, *leaf), doc);
        }
        out
    }
}

pub fn token(id: usize) -> String {
    format!("w{id}")
}

impl SynthSpec {
    fn parent_count(&self) -> usize {
        match self.tree.depth() {
            1 => 0,
            d => self.tree.class_count(d - 2),
        }
    }

    /// First leaf-block token and first noise token. Parent blocks start at 0.
    fn layout(&self) -> (usize, usize) {
        let leaf_start = self.parent_count() * self.parent_tokens;
        let noise_start = leaf_start + self.tree.leaf_count() * self.leaf_tokens;
        (leaf_start, noise_start)
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [self.parent_weight, self.leaf_weight, self.noise_weight];
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("synthetic weights must be >= 0".into()));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "synthetic weights {weights:?} do not sum to 1"
            )));
        }
        if self.doc_len == 0 || self.samples_per_leaf == 0 {
            return Err(Error::InvalidArgument(
                "doc_len and samples_per_leaf must be positive".into(),
            ));
        }
        if self.parent_weight > 0.0 && (self.parent_count() == 0 || self.parent_tokens == 0) {
            return Err(Error::InvalidArgument(
                "parent signal needs a parent layer and a nonempty parent block".into(),
            ));
        }
        if self.leaf_weight > 0.0 && self.leaf_tokens == 0 {
            return Err(Error::InvalidArgument("leaf signal needs a nonempty leaf block".into()));
        }
        let (_, noise_start) = self.layout();
        let noise = self.vocab_size.saturating_sub(noise_start);
        if noise_start > self.vocab_size || (self.noise_weight > 0.0 && noise == 0) {
            return Err(Error::InvalidArgument(format!(
                "vocabulary of {} is too small for {} signal tokens plus noise",
                self.vocab_size, noise_start
            )));
        }
        Ok(())
    }

    /// The set of token ids planted for a leaf (its parent block and its own block).
    pub fn signal_tokens(&self, leaf: usize) -> Vec<usize> {
        let (leaf_start, _) = self.layout();
        let mut out = Vec::new();
        if self.parent_count() > 0 {
            let parent = self.tree.parent_index(self.tree.depth() - 1, leaf);
            out.extend(parent * self.parent_tokens..(parent + 1) * self.parent_tokens);
        }
        out.extend(leaf_start + leaf * self.leaf_tokens..leaf_start + (leaf + 1) * self.leaf_tokens);
        out
    }

    pub fn generate(&self) -> Result<SynthCorpus> {
        self.validate()?;
        let (leaf_start, noise_start) = self.layout();
        let noise = self.vocab_size - noise_start;
        let leaf_layer = self.tree.depth() - 1;
        let mut rng = Rng::new(self.seed);
        let mut documents = Vec::with_capacity(self.tree.leaf_count() * self.samples_per_leaf);
        for leaf in 0..self.tree.leaf_count() {
            let parent = (leaf_layer > 0).then(|| self.tree.parent_index(leaf_layer, leaf));
            for _ in 0..self.samples_per_leaf {
                let mut doc = String::new();
                for t in 0..self.doc_len {
                    let u = rng.uniform(0.0, 1.0);
                    let id = if u < self.parent_weight {
                        parent.unwrap() * self.parent_tokens + rng.below(self.parent_tokens)
                    } else if u < self.parent_weight + self.leaf_weight {
                        leaf_start + leaf * self.leaf_tokens + rng.below(self.leaf_tokens)
                    } else if noise > 0 {
                        noise_start + rng.below(noise)
                    } else {
                        // weights sum to 1 up to rounding; land in the leaf block
                        leaf_start + leaf * self.leaf_tokens + rng.below(self.leaf_tokens)
                    };
                    if t > 0 {
                        doc.push(' ');
                    }
                    doc.push_str(&token(id));
                }
                documents.push((leaf, doc));
            }
        }
        Ok(SynthCorpus {
            tree: self.tree.clone(),
            taxonomy: self.tree.to_taxonomy_string(),
            documents,
        })
    }
}

/// Bundled benchmark configurations on a 4 × 3 taxonomy with a 200-token
/// vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Strong leaf signal; near-perfect accuracy is attainable.
    Separable,
    /// Weak leaf signal and heavy noise; leaves get confused and raw
    /// per-layer predictions disagree with the tree.
    Ambiguous,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "separable" => Ok(Preset::Separable),
            "ambiguous" => Ok(Preset::Ambiguous),
            other => Err(Error::InvalidArgument(format!("unknown preset `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Separable => "separable",
            Preset::Ambiguous => "ambiguous",
        }
    }

    pub fn default_seed(&self) -> u64 {
        match self {
            Preset::Separable => 7,
            Preset::Ambiguous => 11,
        }
    }

    /// Held-out share: 502 of the 2508 generated documents.
    pub fn test_fraction(&self) -> f64 {
        0.2
    }

    pub fn spec(&self, seed: u64) -> SynthSpec {
        let tree = CategoryTree::balanced(&[4, 3]).expect("static shape");
        let (doc_len, parent_weight, leaf_weight, noise_weight) = match self {
            Preset::Separable => (20, 0.4, 0.3, 0.3),
            Preset::Ambiguous => (12, 0.45, 0.10, 0.45),
        };
        SynthSpec {
            tree,
            vocab_size: 200,
            doc_len,
            parent_tokens: 10,
            parent_weight,
            leaf_tokens: 8,
            leaf_weight,
            noise_weight,
            samples_per_leaf: 209,
            seed,
        }
    }
}
