mod common;

use common::{close, loss_oracle, parent_of, random_dists};
use dhc::hierarchy::{CategoryTree, LabelPath};
use dhc::loss::{
    dependence_loss, hierarchical_loss, indicators, layer_loss, Indicators, LossConfig, PlossMode,
};
use dhc::nncore::{softmax_rows, DoubleDouble, Matrix, Rng};
use proptest::prelude::*;

fn gold_path(tree: &CategoryTree, leaf: usize) -> Vec<usize> {
    let mut p = vec![leaf];
    for l in (1..tree.depth()).rev() {
        p.push(parent_of(tree, l, *p.last().unwrap()));
    }
    p.reverse();
    p
}

/// Batch objective as a function of the logits, in double-double, with the
/// indicators held fixed.
fn objective_dd(logits: &[Vec<Vec<DoubleDouble>>], golds: &[Vec<usize>], frozen: &[Indicators], cfg: &LossConfig) -> DoubleDouble {
    let depth = logits.len();
    let mut total = DoubleDouble::ZERO;
    for (s, gold) in golds.iter().enumerate() {
        let lloss: Vec<DoubleDouble> = (0..depth)
            .map(|l| {
                let z = &logits[l][s];
                let m = z.iter().fold(z[0], |a, &b| a.max(b));
                let sum = z.iter().fold(DoubleDouble::ZERO, |a, &b| a + (b - m).exp());
                -(((z[gold[l]] - m).exp() / sum).max(DoubleDouble::from(1e-30))).ln()
            })
            .collect();
        for l in 0..depth {
            total = total + lloss[l] * cfg.alpha[l];
        }
        for i in 0..depth - 1 {
            let ind = &frozen[s];
            let mut e = DoubleDouble::ZERO;
            if ind.violation[i] && ind.error[i] {
                e = e + lloss[i];
            }
            if ind.violation[i] && ind.error[i + 1] {
                e = e + lloss[i + 1];
            }
            total = total + (e.exp() - 1.0) * cfg.beta[i];
        }
    }
    total / golds.len() as f64
}

proptest! {
    #[test]
    fn logit_gradient_matches_extended_precision_differences(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = Rng::new(seed);
        let tree = CategoryTree::random(&mut rng, 3, 5);
        let depth = 3;
        let logits: Vec<Matrix> = (0..depth)
            .map(|l| {
                let c = tree.class_count(l);
                Matrix::from_vec(n, c, (0..n * c).map(|_| rng.uniform(-3.0, 3.0)).collect()).unwrap()
            })
            .collect();
        let golds: Vec<Vec<usize>> = (0..n).map(|_| gold_path(&tree, rng.below(tree.leaf_count()))).collect();
        let cfg = LossConfig {
            alpha: (0..depth).map(|_| rng.uniform(0.0, 1.0)).collect(),
            beta: (1..depth).map(|_| rng.uniform(0.0, 1.0)).collect(),
            ploss: PlossMode::Error,
        };
        let dists: Vec<Matrix> = logits.iter().map(|z| softmax_rows(z).unwrap()).collect();
        let gold_paths: Vec<LabelPath> = golds.iter().map(|g| LabelPath(g.clone())).collect();
        let out = hierarchical_loss(&dists, &gold_paths, &tree, &cfg, None).unwrap();
        let frozen: Vec<Indicators> = out.report.samples.iter().map(|s| s.indicators.clone()).collect();

        let mut z: Vec<Vec<Vec<DoubleDouble>>> = logits
            .iter()
            .map(|m| m.iter_rows().map(|r| r.iter().map(|&v| DoubleDouble::from(v)).collect()).collect())
            .collect();
        let eps = 1e-6;
        for l in 0..depth {
            for s in 0..n {
                for c in 0..tree.class_count(l) {
                    let orig = z[l][s][c];
                    z[l][s][c] = orig + eps;
                    let plus = objective_dd(&z, &golds, &frozen, &cfg);
                    z[l][s][c] = orig - eps;
                    let minus = objective_dd(&z, &golds, &frozen, &cfg);
                    z[l][s][c] = orig;
                    let numeric = ((plus - minus) / (2.0 * eps)).to_f64();
                    let analytic = out.logit_grads[l].get(s, c);
                    let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
                    prop_assert!(rel < 1e-5, "layer {l} sample {s} class {c}: {analytic} vs {numeric}");
                }
            }
        }
    }

    #[test]
    fn reported_losses_match_oracle_and_are_nonnegative(seed in any::<u64>(), depth in 1usize..5) {
        let mut rng = Rng::new(seed);
        let tree = CategoryTree::random(&mut rng, depth, 6);
        let n = 1 + rng.below(4);
        let rows: Vec<Vec<Vec<f64>>> = (0..n).map(|_| random_dists(&mut rng, &tree, 6.0)).collect();
        let golds: Vec<Vec<usize>> = (0..n).map(|_| gold_path(&tree, rng.below(tree.leaf_count()))).collect();
        let constant = (rng.below(2) == 0).then(|| rng.uniform(1.5, 4.0));
        let cfg = LossConfig {
            alpha: (0..depth).map(|_| rng.uniform(0.0, 1.0)).collect(),
            beta: (1..depth).map(|_| rng.uniform(0.0, 1.0)).collect(),
            ploss: constant.map_or(PlossMode::Error, PlossMode::Constant),
        };
        let dists: Vec<Matrix> = (0..depth)
            .map(|l| Matrix::from_rows(&rows.iter().map(|r| r[l].clone()).collect::<Vec<_>>()).unwrap())
            .collect();
        let gold_paths: Vec<LabelPath> = golds.iter().map(|g| LabelPath(g.clone())).collect();
        let out = hierarchical_loss(&dists, &gold_paths, &tree, &cfg, None).unwrap();
        let mut mean = 0.0;
        for (s, sample) in out.report.samples.iter().enumerate() {
            let oracle = loss_oracle(&tree, &rows[s], &golds[s], &cfg.alpha, &cfg.beta, constant);
            prop_assert!(sample.lloss.iter().chain(&sample.dloss).all(|&v| v >= 0.0));
            prop_assert!(close(sample.total, oracle.total.to_f64(), 1e-12));
            prop_assert_eq!(&sample.indicators.violation, &oracle.violation);
            mean += oracle.total.to_f64() / n as f64;
        }
        prop_assert!(close(out.report.total, mean, 1e-12));
    }
}

#[test]
fn spelled_out_cases() {
    assert!((layer_loss(&[0.5, 0.5], 0).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    assert_eq!(layer_loss(&[0.0, 1.0], 1).unwrap(), 0.0);
    assert!((layer_loss(&[0.0, 1.0], 0).unwrap() - 30.0 * std::f64::consts::LN_10).abs() < 1e-9);
    assert!(layer_loss(&[0.5, 0.5], 2).is_err());

    let c2 = dependence_loss(0.3, 0.9, true, true, true, PlossMode::Constant(2.0)).unwrap();
    assert_eq!((c2.value, c2.d_prev, c2.d_cur), (3.0, 0.0, 0.0));
    let e = dependence_loss(5.0, std::f64::consts::LN_2, true, false, true, PlossMode::Error).unwrap();
    assert!((e.value - 1.0).abs() < 1e-15);
    assert_eq!(e.d_prev, 0.0);
    assert!((e.d_cur - 2.0).abs() < 1e-15);
    assert!(dependence_loss(1.0, 1.0, true, true, true, PlossMode::Constant(1.0)).is_err());
}

#[test]
fn indicator_semantics() {
    let tree = CategoryTree::load("a\tROOT\nb\tROOT\na1\ta\nb1\tb\n").unwrap();
    let ind = indicators(&[0, 1], &LabelPath(vec![1, 1]), &tree).unwrap();
    assert_eq!(ind.violation, vec![true]);
    assert_eq!(ind.error, vec![true, false]);
    let ind = indicators(&[1, 1], &LabelPath(vec![1, 1]), &tree).unwrap();
    assert_eq!(ind.violation, vec![false]);
    assert!(indicators(&[1, 5], &LabelPath(vec![1, 1]), &tree).is_err());
}

#[test]
fn zero_beta_objective_is_weighted_cross_entropy_bitwise() {
    let mut rng = Rng::new(12);
    for _ in 0..200 {
        let tree = CategoryTree::random(&mut rng, 3, 5);
        let n = 1 + rng.below(6);
        let rows: Vec<Vec<Vec<f64>>> = (0..n).map(|_| random_dists(&mut rng, &tree, 4.0)).collect();
        let golds: Vec<LabelPath> = (0..n).map(|_| LabelPath(gold_path(&tree, rng.below(tree.leaf_count())))).collect();
        let alpha: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, 1.0)).collect();
        let cfg = LossConfig { alpha: alpha.clone(), beta: vec![0.0; 2], ploss: PlossMode::Error };
        let dists: Vec<Matrix> = (0..3)
            .map(|l| Matrix::from_rows(&rows.iter().map(|r| r[l].clone()).collect::<Vec<_>>()).unwrap())
            .collect();
        let out = hierarchical_loss(&dists, &golds, &tree, &cfg, None).unwrap();
        let mut sum = 0.0;
        for (s, g) in golds.iter().enumerate() {
            let mut j = 0.0;
            for l in 0..3 {
                j += alpha[l] * layer_loss(&rows[s][l], g.0[l]).unwrap();
            }
            sum += j;
        }
        assert_eq!(out.report.total.to_bits(), (sum / n as f64).to_bits());
        for (l, g) in out.logit_grads.iter().enumerate() {
            for s in 0..n {
                for c in 0..g.cols() {
                    let onehot = (c == golds[s].0[l]) as u8 as f64;
                    let expected = alpha[l] * (1.0 / n as f64) * (rows[s][l][c] - onehot);
                    assert!((g.get(s, c) - expected).abs() < 1e-15);
                }
            }
        }
    }
}

#[test]
fn weights_are_validated() {
    let tree = CategoryTree::balanced(&[2, 2]).unwrap();
    let d = vec![Matrix::row_vector(&[0.5, 0.5]), Matrix::row_vector(&[0.25; 4])];
    let g = [LabelPath(vec![0, 0])];
    for cfg in [
        LossConfig { alpha: vec![1.5, 1.0], beta: vec![0.1], ploss: PlossMode::Error },
        LossConfig { alpha: vec![1.0], beta: vec![0.1], ploss: PlossMode::Error },
        LossConfig { alpha: vec![1.0, 1.0], beta: vec![-0.1], ploss: PlossMode::Error },
    ] {
        assert!(hierarchical_loss(&d, &g, &tree, &cfg, None).is_err());
    }
}
