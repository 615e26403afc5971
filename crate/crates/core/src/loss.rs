//! Hierarchical objective: per-layer cross-entropy plus a dependence penalty
//! that fires when consecutive per-layer predictions are not parent and
//! child.
//!
//! Per sample,
//!
//! ```text
//! lloss_l = -ln p_l[y_l]
//! dloss_l = P_{l-1}^(D_l·I_{l-1}) · P_l^(D_l·I_l) - 1
//! J       = Σ_l α_l·lloss_l + Σ_{l≥2} β_l·dloss_l
//! ```
//!
//! where `D_l` marks a parent/child violation between the argmax predictions
//! of layers `l-1` and `l`, `I_l` marks a wrong prediction at layer `l`, and
//! `P_l` is either a constant `c > 1` or `exp(lloss_l)`. Indicators come from
//! an argmax and carry no gradient. The batch objective is the mean of the
//! per-sample values.

use crate::error::{Error, Result};
use crate::hierarchy::{CategoryTree, LabelPath};
use crate::nncore::Matrix;

/// Probabilities are clamped to this before taking logs.
pub const PROB_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlossMode {
    /// Fixed penalty base `c > 1`; contributes no gradient.
    Constant(f64),
    /// Penalty base `exp(lloss)`, so the penalty grows with the layer error.
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// One weight per layer.
    pub alpha: Vec<f64>,
    /// One weight per layer pair; `beta[i]` weights the penalty between
    /// layers `i` and `i + 1` (0-based).
    pub beta: Vec<f64>,
    pub ploss: PlossMode,
}

impl LossConfig {
    pub fn uniform(depth: usize, alpha: f64, beta: f64, ploss: PlossMode) -> Self {
        LossConfig {
            alpha: vec![alpha; depth],
            beta: vec![beta; depth.saturating_sub(1)],
            ploss,
        }
    }

    /// α = 1, β = 0.25, error-driven penalty.
    pub fn defaults(depth: usize) -> Self {
        Self::uniform(depth, 1.0, 0.25, PlossMode::Error)
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if self.alpha.len() != depth || self.beta.len() + 1 != depth.max(1) {
            return Err(Error::InvalidArgument(format!(
                "{} alpha / {} beta weights for a {depth}-layer tree",
                self.alpha.len(),
                self.beta.len()
            )));
        }
        if let Some(w) = self
            .alpha
            .iter()
            .chain(&self.beta)
            .find(|w| !(0.0..=1.0).contains(*w))
        {
            return Err(Error::InvalidArgument(format!("loss weight {w} not in [0, 1]")));
        }
        if let PlossMode::Constant(c) = self.ploss {
            if !(c > 1.0 && c.is_finite()) {
                return Err(Error::InvalidArgument(format!("constant penalty {c} must be > 1")));
            }
        }
        Ok(())
    }
}

fn check_index(dist: &[f64], gold: usize) -> Result<()> {
    if gold >= dist.len() {
        return Err(Error::ClassOutOfRange {
            layer: 0,
            index: gold,
            classes: dist.len(),
        });
    }
    Ok(())
}

/// Cross-entropy of one distribution row against a gold class.
pub fn layer_loss(dist: &[f64], gold: usize) -> Result<f64> {
    check_index(dist, gold)?;
    // 0.0 - x rather than -x keeps a certain prediction at +0.0
    Ok(0.0 - dist[gold].max(PROB_FLOOR).ln())
}

/// Gradient of [`layer_loss`] with respect to the logits: `p - onehot(gold)`.
pub fn layer_loss_logit_grad(dist: &[f64], gold: usize) -> Result<Vec<f64>> {
    check_index(dist, gold)?;
    let mut g = dist.to_vec();
    g[gold] -= 1.0;
    Ok(g)
}

/// Argmax, lowest index on ties.
pub fn predicted_class(dist: &[f64]) -> Result<usize> {
    if dist.is_empty() {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    let mut best = 0;
    for (i, &p) in dist.iter().enumerate().skip(1) {
        if p > dist[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Violation and error flags for one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indicators {
    /// `violation[i]`: the layer `i + 1` prediction is not a child of the
    /// layer `i` prediction (0-based). Length `L - 1`.
    pub violation: Vec<bool>,
    /// `error[l]`: the layer `l` prediction differs from gold. Length `L`.
    pub error: Vec<bool>,
}

pub fn indicators(pred: &[usize], gold: &LabelPath, tree: &CategoryTree) -> Result<Indicators> {
    let depth = tree.depth();
    if pred.len() != depth || gold.depth() != depth {
        return Err(Error::shape(
            "indicators",
            format!("{} predictions, {} gold layers, depth {depth}", pred.len(), gold.depth()),
        ));
    }
    for (layer, (&p, &g)) in pred.iter().zip(&gold.0).enumerate() {
        let classes = tree.class_count(layer);
        if p >= classes || g >= classes {
            return Err(Error::ClassOutOfRange {
                layer,
                index: p.max(g),
                classes,
            });
        }
    }
    Ok(Indicators {
        violation: (1..depth)
            .map(|l| !tree.is_child_index(l, pred[l - 1], pred[l]))
            .collect(),
        error: pred.iter().zip(&gold.0).map(|(p, g)| p != g).collect(),
    })
}

/// Dependence penalty between one pair of layers, with its partial
/// derivatives with respect to the two layer losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependenceTerm {
    pub value: f64,
    pub d_prev: f64,
    pub d_cur: f64,
}

pub fn dependence_loss(
    prev_loss: f64,
    cur_loss: f64,
    violated: bool,
    prev_wrong: bool,
    cur_wrong: bool,
    mode: PlossMode,
) -> Result<DependenceTerm> {
    let gate_prev = (violated && prev_wrong) as i32;
    let gate_cur = (violated && cur_wrong) as i32;
    match mode {
        PlossMode::Constant(c) => {
            if !(c > 1.0) {
                return Err(Error::InvalidArgument(format!("constant penalty {c} must be > 1")));
            }
            Ok(DependenceTerm {
                value: c.powi(gate_prev) * c.powi(gate_cur) - 1.0,
                d_prev: 0.0,
                d_cur: 0.0,
            })
        }
        PlossMode::Error => {
            let (gp, gc) = (gate_prev as f64, gate_cur as f64);
            let exponent = gp * prev_loss + gc * cur_loss;
            let scale = exponent.exp();
            Ok(DependenceTerm {
                value: exponent.exp_m1(),
                d_prev: gp * scale,
                d_cur: gc * scale,
            })
        }
    }
}

/// `Σ α_i·lloss_i + Σ β_i·dloss_i` for one sample.
pub fn total_loss(lloss: &[f64], dloss: &[f64], config: &LossConfig) -> Result<f64> {
    if lloss.len() != config.alpha.len() || dloss.len() != config.beta.len() {
        return Err(Error::InvalidArgument(format!(
            "{} layer / {} dependence losses for {} alpha / {} beta weights",
            lloss.len(),
            dloss.len(),
            config.alpha.len(),
            config.beta.len()
        )));
    }
    let mut j = 0.0;
    for (a, l) in config.alpha.iter().zip(lloss) {
        j += a * l;
    }
    for (b, d) in config.beta.iter().zip(dloss) {
        j += b * d;
    }
    Ok(j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleLoss {
    pub pred: Vec<usize>,
    pub indicators: Indicators,
    pub lloss: Vec<f64>,
    pub dloss: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub samples: Vec<SampleLoss>,
    pub mean_lloss: Vec<f64>,
    pub mean_dloss: Vec<f64>,
    /// Batch objective J.
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub report: LossReport,
    /// dJ/dlogits per layer, same shapes as the distributions.
    pub logit_grads: Vec<Matrix>,
}

/// Evaluates the batch objective and its logit gradients.
///
/// With `frozen` set, those indicators replace the ones derived from the
/// current argmax (used when probing the objective by finite differences).
pub fn hierarchical_loss(
    dists: &[Matrix],
    golds: &[LabelPath],
    tree: &CategoryTree,
    config: &LossConfig,
    frozen: Option<&[Indicators]>,
) -> Result<LossOutput> {
    let depth = tree.depth();
    config.validate(depth)?;
    if dists.len() != depth {
        return Err(Error::shape("hierarchical_loss", format!("{} layers of output", dists.len())));
    }
    let n = golds.len();
    if n == 0 || dists.iter().any(|d| d.rows() != n) {
        return Err(Error::shape(
            "hierarchical_loss",
            format!("batch of {n} gold paths vs distributions {:?}", dists.iter().map(Matrix::shape).collect::<Vec<_>>()),
        ));
    }
    if let Some(f) = frozen {
        if f.len() != n {
            return Err(Error::shape("hierarchical_loss", "frozen indicator count"));
        }
    }

    let mut samples = Vec::with_capacity(n);
    let mut grads: Vec<Matrix> = dists.iter().map(|d| Matrix::zeros(d.rows(), d.cols())).collect();
    let scale = 1.0 / n as f64;
    for (s, gold) in golds.iter().enumerate() {
        let pred = (0..depth)
            .map(|l| predicted_class(dists[l].row(s)))
            .collect::<Result<Vec<_>>>()?;
        let ind = match frozen {
            Some(f) => f[s].clone(),
            None => indicators(&pred, gold, tree)?,
        };
        let lloss = (0..depth)
            .map(|l| layer_loss(dists[l].row(s), gold.0[l]))
            .collect::<Result<Vec<_>>>()?;
        let mut coef = config.alpha.clone();
        let mut dloss = Vec::with_capacity(depth.saturating_sub(1));
        for i in 0..depth.saturating_sub(1) {
            let term = dependence_loss(
                lloss[i],
                lloss[i + 1],
                ind.violation[i],
                ind.error[i],
                ind.error[i + 1],
                config.ploss,
            )?;
            coef[i] += config.beta[i] * term.d_prev;
            coef[i + 1] += config.beta[i] * term.d_cur;
            dloss.push(term.value);
        }
        let total = total_loss(&lloss, &dloss, config)?;
        for l in 0..depth {
            let g = layer_loss_logit_grad(dists[l].row(s), gold.0[l])?;
            let c = coef[l] * scale;
            for (dst, v) in grads[l].row_mut(s).iter_mut().zip(g) {
                *dst = c * v;
            }
        }
        samples.push(SampleLoss {
            pred,
            indicators: ind,
            lloss,
            dloss,
            total,
        });
    }

    let mean = |f: &dyn Fn(&SampleLoss) -> f64| samples.iter().map(f).sum::<f64>() * scale;
    let mean_lloss = (0..depth).map(|l| mean(&|s| s.lloss[l])).collect();
    let mean_dloss = (0..depth.saturating_sub(1)).map(|l| mean(&|s| s.dloss[l])).collect();
    let total = samples.iter().map(|s| s.total).sum::<f64>() / n as f64;
    Ok(LossOutput {
        report: LossReport {
            samples,
            mean_lloss,
            mean_dloss,
            total,
        },
        logit_grads: grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree_ab() -> CategoryTree {
        CategoryTree::load("a\tROOT\nb\tROOT\na1\ta\nb1\tb\n").unwrap()
    }

    #[test]
    fn layer_loss_cases() {
        assert_eq!(layer_loss(&[1.0], 0).unwrap(), 0.0);
        assert!(layer_loss(&[1.0], 0).unwrap().is_sign_positive());
        assert!((layer_loss(&[0.5, 0.5], 0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((layer_loss(&[0.5, 0.5], 0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(layer_loss(&[0.5, 0.5], 2).is_err());
        assert!((layer_loss(&[1.0, 0.0], 1).unwrap() - 30.0 * 10f64.ln()).abs() < 1e-9);
        assert_eq!(layer_loss_logit_grad(&[0.25, 0.75], 1).unwrap(), vec![0.25, -0.25]);
    }

    #[test]
    fn argmax_cases() {
        assert_eq!(predicted_class(&[0.1, 0.7, 0.2]).unwrap(), 1);
        assert_eq!(predicted_class(&[0.5, 0.5]).unwrap(), 0);
        assert!(predicted_class(&[]).is_err());
    }

    #[test]
    fn indicator_cases() {
        let tree = tree_ab();
        let gold = LabelPath(vec![0, 0]);
        let exact = indicators(&[0, 0], &gold, &tree).unwrap();
        assert_eq!(exact.violation, vec![false]);
        assert_eq!(exact.error, vec![false, false]);
        let cross = indicators(&[0, 1], &gold, &tree).unwrap();
        assert_eq!(cross.violation, vec![true]);
        let wrong = indicators(&[1, 1], &gold, &tree).unwrap();
        assert_eq!(wrong.error, vec![true, true]);
        assert_eq!(wrong.violation, vec![false]);
        assert!(indicators(&[0, 2], &gold, &tree).is_err());
        assert!(indicators(&[0], &gold, &tree).is_err());
    }

    #[test]
    fn dependence_cases() {
        for mode in [PlossMode::Error, PlossMode::Constant(2.0)] {
            for (p, c) in [(true, true), (false, true), (true, false)] {
                let t = dependence_loss(3.0, 0.7, false, p, c, mode).unwrap();
                assert_eq!(t.value, 0.0);
                assert_eq!((t.d_prev, t.d_cur), (0.0, 0.0));
            }
        }
        let t = dependence_loss(0.1, 0.2, true, true, true, PlossMode::Constant(2.0)).unwrap();
        assert_eq!(t.value, 3.0);
        let t = dependence_loss(5.0, 2f64.ln(), true, false, true, PlossMode::Error).unwrap();
        assert!((t.value - 1.0).abs() < 1e-15);
        assert_eq!(t.d_prev, 0.0);
        assert!((t.d_cur - 2.0).abs() < 1e-15);
        assert!(dependence_loss(0.0, 0.0, true, true, true, PlossMode::Constant(1.0)).is_err());
    }

    #[test]
    fn total_cases() {
        let cfg = LossConfig::uniform(2, 1.0, 0.25, PlossMode::Error);
        assert!((total_loss(&[0.5, 0.7], &[3.0], &cfg).unwrap() - 1.95).abs() < 1e-15);
        let zero = LossConfig::uniform(2, 0.0, 0.0, PlossMode::Error);
        assert_eq!(total_loss(&[0.5, 0.7], &[3.0], &zero).unwrap(), 0.0);
        let beta0 = LossConfig::uniform(2, 0.6, 0.0, PlossMode::Error);
        assert_eq!(total_loss(&[0.5, 0.7], &[3.0], &beta0).unwrap(), 0.6 * 0.5 + 0.6 * 0.7);
        assert!(total_loss(&[0.5], &[3.0], &cfg).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(LossConfig::defaults(3).validate(3).is_ok());
        assert!(LossConfig::defaults(1).validate(1).is_ok());
        assert!(LossConfig::defaults(3).validate(2).is_err());
        assert!(LossConfig::uniform(2, 1.5, 0.1, PlossMode::Error).validate(2).is_err());
        assert!(LossConfig::uniform(2, 1.0, 0.1, PlossMode::Constant(0.5)).validate(2).is_err());
    }

    #[test]
    fn batch_loss_and_frozen_indicators() {
        let tree = tree_ab();
        let l1 = Matrix::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
        let l2 = Matrix::from_rows(&[vec![0.4, 0.6], vec![0.1, 0.9]]).unwrap();
        let golds = vec![LabelPath(vec![0, 0]), LabelPath(vec![1, 1])];
        let cfg = LossConfig::defaults(2);
        let out = hierarchical_loss(&[l1.clone(), l2.clone()], &golds, &tree, &cfg, None).unwrap();
        let s0 = &out.report.samples[0];
        assert_eq!(s0.pred, vec![0, 1]);
        assert_eq!(s0.indicators.violation, vec![true]);
        assert_eq!(s0.indicators.error, vec![false, true]);
        // dloss = exp(lloss_2) - 1 = 1/0.4 - 1
        assert!((s0.dloss[0] - 1.5).abs() < 1e-12);
        assert_eq!(out.report.samples[1].dloss[0], 0.0);
        let manual = (s0.total + out.report.samples[1].total) / 2.0;
        assert_eq!(out.report.total, manual);

        let frozen = vec![
            Indicators { violation: vec![false], error: vec![false, false] };
            2
        ];
        let out = hierarchical_loss(&[l1, l2], &golds, &tree, &cfg, Some(&frozen)).unwrap();
        assert_eq!(out.report.mean_dloss, vec![0.0]);
    }
}
