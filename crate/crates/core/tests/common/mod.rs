//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the library code it is compared against.

#![allow(dead_code)]

use std::collections::HashMap;

use dhc::hierarchy::CategoryTree;
use dhc::nncore::{DoubleDouble, Rng};

/// Random probability row: softmax of logits drawn from `[-spread, spread]`.
pub fn random_dist(rng: &mut Rng, n: usize, spread: f64) -> Vec<f64> {
    let z: Vec<f64> = (0..n).map(|_| rng.uniform(-spread, spread)).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn random_dists(rng: &mut Rng, tree: &CategoryTree, spread: f64) -> Vec<Vec<f64>> {
    (0..tree.depth())
        .map(|l| random_dist(rng, tree.class_count(l), spread))
        .collect()
}

/// Parent class index of `index` in `layer`, found through node ids only.
pub fn parent_of(tree: &CategoryTree, layer: usize, index: usize) -> usize {
    let parent_id = tree
        .parent(tree.node_id(layer, index))
        .unwrap()
        .expect("layer > 0 has a parent");
    tree.nodes(layer - 1).iter().position(|id| id == parent_id).unwrap()
}

/// Whether consecutive classes are parent and child, checked by id lookups.
pub fn chain_is_valid(tree: &CategoryTree, path: &[usize]) -> bool {
    path.len() == tree.depth()
        && path.iter().enumerate().all(|(l, &c)| c < tree.class_count(l))
        && (1..path.len()).all(|l| parent_of(tree, l, path[l]) == path[l - 1])
}

/// Every root-to-leaf path, built bottom-up from leaves.
pub fn enumerate_paths(tree: &CategoryTree) -> Vec<Vec<usize>> {
    let last = tree.depth() - 1;
    (0..tree.class_count(last))
        .map(|leaf| {
            let mut path = vec![leaf];
            for l in (1..=last).rev() {
                path.push(parent_of(tree, l, *path.last().unwrap()));
            }
            path.reverse();
            path
        })
        .collect()
}

fn floor_ln(p: f64) -> f64 {
    p.max(1e-30).ln()
}

/// Exhaustive argmax of Σ log p, ties to the lexicographically smallest
/// index sequence. Scores are summed in layer order.
pub fn exhaustive_best(tree: &CategoryTree, dists: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for path in enumerate_paths(tree) {
        let mut score = 0.0;
        for (l, &c) in path.iter().enumerate() {
            score += floor_ln(dists[l][c]);
        }
        let better = match &best {
            None => true,
            Some((bp, bs)) => score > *bs || (score == *bs && path < *bp),
        };
        if better {
            best = Some((path, score));
        }
    }
    best.unwrap()
}

pub fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..row.len() {
        if row[i] > row[best] {
            best = i;
        }
    }
    best
}

/// Loss oracle in double-double precision, written straight from the
/// formulas: lloss = −ln max(p, 1e-30); the dependence term between layers
/// i and i+1 is ploss_i^(D·I_i) · ploss_{i+1}^(D·I_{i+1}) − 1 with
/// ploss = exp(lloss) or a constant; J = Σ α·lloss + Σ β·dloss.
pub struct LossOracle {
    pub lloss: Vec<DoubleDouble>,
    pub dloss: Vec<DoubleDouble>,
    pub total: DoubleDouble,
    pub violation: Vec<bool>,
    pub error: Vec<bool>,
}

pub fn dd_lloss(p: f64) -> DoubleDouble {
    -DoubleDouble::from(p.max(1e-30)).ln()
}

/// `constant = None` selects the error-driven penalty.
pub fn loss_oracle(
    tree: &CategoryTree,
    dists: &[Vec<f64>],
    gold: &[usize],
    alpha: &[f64],
    beta: &[f64],
    constant: Option<f64>,
) -> LossOracle {
    let depth = tree.depth();
    let pred: Vec<usize> = dists.iter().map(|d| argmax_first(d)).collect();
    let violation: Vec<bool> = (1..depth).map(|l| parent_of(tree, l, pred[l]) != pred[l - 1]).collect();
    let error: Vec<bool> = (0..depth).map(|l| pred[l] != gold[l]).collect();
    let lloss: Vec<DoubleDouble> = (0..depth).map(|l| dd_lloss(dists[l][gold[l]])).collect();
    let mut dloss = Vec::new();
    for i in 0..depth.saturating_sub(1) {
        let e_prev = violation[i] && error[i];
        let e_cur = violation[i] && error[i + 1];
        let mut product = DoubleDouble::ONE;
        for (on, l) in [(e_prev, i), (e_cur, i + 1)] {
            if on {
                let factor = match constant {
                    Some(c) => DoubleDouble::from(c),
                    None => lloss[l].exp(),
                };
                product = product * factor;
            }
        }
        dloss.push(product - 1.0);
    }
    let mut total = DoubleDouble::ZERO;
    for l in 0..depth {
        total = total + lloss[l] * alpha[l];
    }
    for i in 0..dloss.len() {
        total = total + dloss[i] * beta[i];
    }
    LossOracle {
        lloss,
        dloss,
        total,
        violation,
        error,
    }
}

/// `|a − b| ≤ tol · max(1, |b|)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

/// Multinomial naive Bayes over whitespace tokens with add-one smoothing,
/// predicting leaf labels.
pub struct NaiveBayes {
    log_prior: Vec<f64>,
    log_like: Vec<HashMap<String, f64>>,
    log_unseen: Vec<f64>,
}

impl NaiveBayes {
    pub fn fit(docs: &[(usize, &str)], classes: usize) -> Self {
        let mut counts: Vec<HashMap<String, f64>> = vec![HashMap::new(); classes];
        let mut totals = vec![0.0; classes];
        let mut docs_per = vec![0.0; classes];
        let mut vocab: HashMap<String, ()> = HashMap::new();
        for (c, text) in docs {
            docs_per[*c] += 1.0;
            for tok in text.split_whitespace() {
                *counts[*c].entry(tok.to_lowercase()).or_insert(0.0) += 1.0;
                totals[*c] += 1.0;
                vocab.insert(tok.to_lowercase(), ());
            }
        }
        let v = vocab.len() as f64;
        let n: f64 = docs_per.iter().sum();
        NaiveBayes {
            log_prior: docs_per.iter().map(|d| (d / n).ln()).collect(),
            log_like: (0..classes)
                .map(|c| {
                    counts[c]
                        .iter()
                        .map(|(t, k)| (t.clone(), ((k + 1.0) / (totals[c] + v)).ln()))
                        .collect()
                })
                .collect(),
            log_unseen: (0..classes).map(|c| (1.0 / (totals[c] + v)).ln()).collect(),
        }
    }

    pub fn predict(&self, text: &str) -> usize {
        let scores: Vec<f64> = (0..self.log_prior.len())
            .map(|c| {
                self.log_prior[c]
                    + text
                        .split_whitespace()
                        .map(|t| *self.log_like[c].get(&t.to_lowercase()).unwrap_or(&self.log_unseen[c]))
                        .sum::<f64>()
            })
            .collect();
        argmax_first(&scores)
    }
}
