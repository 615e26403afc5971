//! Accuracy and consistency measures over per-layer predictions.

use crate::error::{Error, Result};
use crate::hierarchy::{CategoryTree, LabelPath};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub layer_accuracy: Vec<f64>,
    pub path_accuracy: f64,
    /// Consistency of the reported (decoded) predictions.
    pub consistency: f64,
    /// Consistency of unconstrained per-layer argmax predictions.
    pub raw_consistency: f64,
    pub samples: usize,
}

fn check_lengths(preds: &[LabelPath], golds: &[LabelPath]) -> Result<()> {
    if preds.is_empty() || preds.len() != golds.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions vs {} gold paths",
            preds.len(),
            golds.len()
        )));
    }
    Ok(())
}

/// Fraction of samples whose prediction at `layer` (0-based) matches gold.
pub fn layer_accuracy(preds: &[LabelPath], golds: &[LabelPath], layer: usize) -> Result<f64> {
    check_lengths(preds, golds)?;
    let mut hits = 0usize;
    for (p, g) in preds.iter().zip(golds) {
        let (Some(pc), Some(gc)) = (p.0.get(layer), g.0.get(layer)) else {
            return Err(Error::InvalidArgument(format!("no layer {} in path", layer + 1)));
        };
        hits += (pc == gc) as usize;
    }
    Ok(hits as f64 / preds.len() as f64)
}

/// Fraction of samples predicted correctly at every layer.
pub fn path_accuracy(preds: &[LabelPath], golds: &[LabelPath]) -> Result<f64> {
    check_lengths(preds, golds)?;
    let hits = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Fraction of per-layer predictions that form a valid root-to-leaf path.
pub fn consistency_rate(preds: &[LabelPath], tree: &CategoryTree) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument("no predictions".into()));
    }
    for p in preds {
        if p.depth() != tree.depth() {
            return Err(Error::InvalidArgument(format!(
                "prediction has {} layers, tree has {}",
                p.depth(),
                tree.depth()
            )));
        }
        for (layer, &c) in p.0.iter().enumerate() {
            if c >= tree.class_count(layer) {
                return Err(Error::ClassOutOfRange {
                    layer,
                    index: c,
                    classes: tree.class_count(layer),
                });
            }
        }
    }
    let ok = preds.iter().filter(|p| p.is_consistent(tree)).count();
    Ok(ok as f64 / preds.len() as f64)
}

impl EvalReport {
    pub fn compute(
        decoded: &[LabelPath],
        raw: &[LabelPath],
        golds: &[LabelPath],
        tree: &CategoryTree,
    ) -> Result<Self> {
        Ok(EvalReport {
            layer_accuracy: (0..tree.depth())
                .map(|l| layer_accuracy(decoded, golds, l))
                .collect::<Result<_>>()?,
            path_accuracy: path_accuracy(decoded, golds)?,
            consistency: consistency_rate(decoded, tree)?,
            raw_consistency: consistency_rate(raw, tree)?,
            samples: golds.len(),
        })
    }
}

impl std::fmt::Display for EvalReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (l, a) in self.layer_accuracy.iter().enumerate() {
            writeln!(f, "layer{}_accuracy\t{:.4}", l + 1, a)?;
        }
        writeln!(f, "path_accuracy\t{:.4}", self.path_accuracy)?;
        writeln!(f, "consistency\t{:.4}", self.consistency)?;
        writeln!(f, "raw_consistency\t{:.4}", self.raw_consistency)?;
        write!(f, "samples\t{}", self.samples)
    }
}
