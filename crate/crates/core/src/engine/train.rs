//! Minibatch training, evaluation and prediction.

use std::fmt;

use super::config::TrainConfig;
use crate::data::{Featurizer, LabeledDataset};
use crate::error::{Error, Result};
use crate::hierarchy::{CategoryTree, LabelPath};
use crate::inference::{DecodedPath, Decoder};
use crate::loss::{hierarchical_loss, predicted_class};
use crate::metrics::{consistency_rate, layer_accuracy, EvalReport};
use crate::model::DhcModel;
use crate::nncore::{Matrix, Rng};

/// Rows per forward pass when evaluating.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_total: f64,
    pub mean_lloss: Vec<f64>,
    pub mean_dloss: Vec<f64>,
    /// Per-layer accuracy of raw argmax on the training batches.
    pub train_accuracy: Vec<f64>,
    pub raw_consistency: f64,
    pub eval: Option<EvalReport>,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(",");
        write!(
            f,
            "epoch {}\tJ {:.6}\tlloss {}\tdloss {}\ttrain_acc {}\traw_consistency {:.4}",
            self.epoch,
            self.mean_total,
            join(&self.mean_lloss),
            join(&self.mean_dloss),
            join(&self.train_accuracy),
            self.raw_consistency
        )?;
        if let Some(e) = &self.eval {
            write!(f, "\ttest_acc {}\ttest_path {:.4}", join(&e.layer_accuracy), e.path_accuracy)?;
        }
        Ok(())
    }
}

pub struct TrainOutcome {
    pub model: DhcModel,
    pub log: Vec<EpochLog>,
}

/// Trains from scratch. Initialization uses `config.seed`; epoch `e`
/// (1-based) shuffles with seed `config.seed + e`. `eval` is scored every
/// `eval_every` epochs and after the last one.
pub fn train(
    config: &TrainConfig,
    tree: &CategoryTree,
    data: &LabeledDataset,
    eval: Option<&LabeledDataset>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("no training examples".into()));
    }
    check_input_dim(config.featurizer.input_dim, data)?;
    if let Some(e) = eval {
        check_input_dim(config.featurizer.input_dim, e)?;
    }
    let depth = tree.depth();
    let loss_cfg = config.loss_config(depth)?;
    let mut model = DhcModel::new(tree, &config.model_config(), &mut Rng::new(config.seed))?;
    let mut optimizer = config.build_optimizer()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        Rng::new(config.seed.wrapping_add(epoch as u64)).shuffle(&mut order);
        let mut sum_total = 0.0;
        let mut sum_lloss = vec![0.0; depth];
        let mut sum_dloss = vec![0.0; depth.saturating_sub(1)];
        let mut hits = vec![0usize; depth];
        let mut raw_preds = Vec::with_capacity(data.len());

        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let x = data.batch(idx);
            let golds = data.golds(idx);
            let where_ = |term: String| format!("epoch {epoch}, batch {}: {term} is not finite", b + 1);
            let trace = model.forward(&x).map_err(|e| match e {
                Error::NonFinite(term) => Error::NonFinite(where_(term)),
                e => e,
            })?;
            let out = hierarchical_loss(&trace.dists, &golds, tree, &loss_cfg, None)?;
            let report = &out.report;
            for (l, v) in report.mean_lloss.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(where_(format!("layer {} lloss", l + 1))));
                }
            }
            for (i, v) in report.mean_dloss.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(where_(format!("dloss between layers {} and {}", i + 1, i + 2))));
                }
            }
            if !report.total.is_finite() {
                return Err(Error::NonFinite(where_("J".into())));
            }

            let n = idx.len() as f64;
            sum_total += report.total * n;
            for (s, v) in sum_lloss.iter_mut().zip(&report.mean_lloss) {
                *s += v * n;
            }
            for (s, v) in sum_dloss.iter_mut().zip(&report.mean_dloss) {
                *s += v * n;
            }
            for (sample, gold) in report.samples.iter().zip(&golds) {
                for l in 0..depth {
                    hits[l] += (sample.pred[l] == gold.0[l]) as usize;
                }
                raw_preds.push(LabelPath(sample.pred.clone()));
            }

            model.params_mut().zero_grad();
            model.backward(&trace, &out.logit_grads)?;
            optimizer.step(model.params_mut());
        }

        let n = data.len() as f64;
        let scored = epoch == config.epochs || (config.eval_every > 0 && epoch % config.eval_every == 0);
        let eval_report = match eval {
            Some(e) if scored => Some(evaluate(&model, e, config.decoder)?),
            _ => None,
        };
        log.push(EpochLog {
            epoch,
            mean_total: sum_total / n,
            mean_lloss: sum_lloss.iter().map(|s| s / n).collect(),
            mean_dloss: sum_dloss.iter().map(|s| s / n).collect(),
            train_accuracy: hits.iter().map(|&h| h as f64 / n).collect(),
            raw_consistency: consistency_rate(&raw_preds, tree)?,
            eval: eval_report,
        });
    }
    Ok(TrainOutcome { model, log })
}

fn check_input_dim(expected: usize, data: &LabeledDataset) -> Result<()> {
    if data.input_dim != expected {
        return Err(Error::shape(
            "dataset",
            format!("features have {} dims, model expects {expected}", data.input_dim),
        ));
    }
    Ok(())
}

/// Per-layer distributions of `x`, one row per example, computed in chunks.
fn chunked_dists(model: &DhcModel, x_rows: usize, batch: impl Fn(&[usize]) -> Matrix) -> Result<Vec<Matrix>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); model.depth()];
    let idx: Vec<usize> = (0..x_rows).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let dists = model.predict_dists(&batch(chunk))?;
        for (acc, d) in out.iter_mut().zip(dists) {
            acc.extend(d.into_vec());
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(l, data)| Matrix::from_vec(x_rows, model.tree().class_count(l), data))
        .collect()
}

fn decode_all(model: &DhcModel, dists: &[Matrix], decoder: Decoder) -> Result<Vec<DecodedPath>> {
    let rows = dists.first().map_or(0, Matrix::rows);
    (0..rows)
        .map(|r| {
            let per_layer: Vec<&[f64]> = dists.iter().map(|d| d.row(r)).collect();
            decoder.decode(&per_layer, model.tree())
        })
        .collect()
}

/// Decodes every example and scores it. Does not touch the model.
pub fn evaluate(model: &DhcModel, data: &LabeledDataset, decoder: Decoder) -> Result<EvalReport> {
    check_input_dim(model.config().input_dim, data)?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("no evaluation examples".into()));
    }
    let dists = chunked_dists(model, data.len(), |idx| data.batch(idx))?;
    let decoded: Vec<LabelPath> = decode_all(model, &dists, decoder)?
        .into_iter()
        .map(|d| d.path)
        .collect();
    let raw = (0..data.len())
        .map(|r| {
            dists
                .iter()
                .map(|d| predicted_class(d.row(r)))
                .collect::<Result<Vec<_>>>()
                .map(LabelPath)
        })
        .collect::<Result<Vec<_>>>()?;
    let golds: Vec<LabelPath> = data.examples.iter().map(|e| e.gold.clone()).collect();
    EvalReport::compute(&decoded, &raw, &golds, model.tree())
}

/// Raw-argmax accuracy of one layer, used by quick sanity checks.
pub fn raw_layer_accuracy(model: &DhcModel, data: &LabeledDataset, layer: usize) -> Result<f64> {
    let dists = chunked_dists(model, data.len(), |idx| data.batch(idx))?;
    let preds = (0..data.len())
        .map(|r| {
            dists
                .iter()
                .map(|d| predicted_class(d.row(r)))
                .collect::<Result<Vec<_>>>()
                .map(LabelPath)
        })
        .collect::<Result<Vec<_>>>()?;
    let golds: Vec<LabelPath> = data.examples.iter().map(|e| e.gold.clone()).collect();
    layer_accuracy(&preds, &golds, layer)
}

/// Decodes raw documents in input order.
pub fn predict(
    model: &DhcModel,
    featurizer: &Featurizer,
    texts: &[String],
    decoder: Decoder,
) -> Result<Vec<DecodedPath>> {
    if featurizer.input_dim != model.config().input_dim {
        return Err(Error::shape(
            "predict",
            format!("featurizer has {} dims, model expects {}", featurizer.input_dim, model.config().input_dim),
        ));
    }
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    let dim = featurizer.input_dim;
    let dists = chunked_dists(model, texts.len(), |idx| {
        let mut data = Vec::with_capacity(idx.len() * dim);
        for &i in idx {
            data.extend(featurizer.featurize(&texts[i]));
        }
        Matrix::from_vec(idx.len(), dim, data).expect("featurizer output width")
    })?;
    decode_all(model, &dists, decoder)
}

/// `label_1<TAB>…<TAB>label_L<TAB>joint_score`, labels by display name.
pub fn format_prediction(tree: &CategoryTree, decoded: &DecodedPath) -> String {
    let mut fields: Vec<String> = decoded
        .path
        .0
        .iter()
        .enumerate()
        .map(|(l, &c)| tree.node_name(l, c).to_string())
        .collect();
    fields.push(decoded.score.to_string());
    fields.join("\t")
}
