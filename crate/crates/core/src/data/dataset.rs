use crate::error::{Error, Result};
use crate::hierarchy::{CategoryTree, LabelPath};
use crate::nncore::{Matrix, Rng};

use super::Featurizer;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    pub gold: LabelPath,
    /// Source document.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub examples: Vec<LabeledExample>,
    pub input_dim: usize,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Feature rows of the given examples stacked into a batch.
    pub fn batch(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.input_dim);
        for &i in indices {
            data.extend_from_slice(&self.examples[i].features);
        }
        Matrix::from_vec(indices.len(), self.input_dim, data).expect("rows share input_dim")
    }

    pub fn golds(&self, indices: &[usize]) -> Vec<LabelPath> {
        indices.iter().map(|&i| self.examples[i].gold.clone()).collect()
    }

    fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            input_dim: self.input_dim,
        }
    }
}

/// Parses a dataset file (`leaf_id<TAB>document`, `#` comments) and
/// featurizes every document. Line order is preserved.
pub fn load_dataset(content: &str, tree: &CategoryTree, featurizer: &Featurizer) -> Result<LabeledDataset> {
    let mut examples = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (leaf, text) = line.split_once('\t').ok_or_else(|| Error::Data {
            line: lineno,
            msg: "expected `leaf_id<TAB>text`".into(),
        })?;
        let gold = tree.leaf_to_path(leaf.trim()).map_err(|e| Error::Data {
            line: lineno,
            msg: format!("label `{}`: {e}", leaf.trim()),
        })?;
        examples.push(LabeledExample {
            features: featurizer.featurize(text),
            gold,
            text: text.to_string(),
        });
    }
    Ok(LabeledDataset {
        examples,
        input_dim: featurizer.input_dim,
    })
}

/// Shuffles indices with `seed` and cuts off `round(n · test_fraction)`
/// examples (at least one, at most `n - 1`) as the test part.
pub fn split(dataset: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction {test_fraction} not in (0, 1)"
        )));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("cannot split {n} example(s)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut order);
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let (test, train) = order.split_at(n_test);
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}
