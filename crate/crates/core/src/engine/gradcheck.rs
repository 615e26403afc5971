//! Finite-difference check of the full training gradient on random small
//! models.
//!
//! The reference objective is recomputed from the raw parameters in
//! double-double precision, so the central differences at ε = 1e-6 are not
//! swamped by f64 rounding of the objective (which is amplified by the
//! exponential penalty). The plain f64 differences are reported alongside.

use crate::error::Result;
use crate::hierarchy::{CategoryTree, LabelPath};
use crate::loss::{hierarchical_loss, Indicators, LossConfig, PlossMode};
use crate::model::{DhcModel, ModelConfig, ShareMode};
use crate::nncore::{
    finite_difference_grad, max_relative_error, relative_error, Dense, DoubleDouble, Matrix, ParameterSet, Rng,
};

pub const GRADCHECK_EPS: f64 = 1e-6;
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
/// Smallest allowed |pre-activation| at a ReLU. Inputs are redrawn until
/// every hidden unit is this far from the kink, so no perturbation of size
/// ε crosses it and the objective is smooth over the difference stencil.
pub const RELU_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckCase {
    pub class_counts: Vec<usize>,
    pub config: ModelConfig,
    pub max_rel_error: f64,
    /// Parameter holding the worst entry, with its analytic and numeric values.
    pub worst_param: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    /// Same comparison against differences of the f64 objective.
    pub f64_max_rel_error: f64,
    /// Objective at the unperturbed parameters.
    pub objective: f64,
    /// Smallest |pre-activation| over the hidden ReLU units.
    pub relu_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub cases: Vec<GradcheckCase>,
    pub max_rel_error: f64,
    pub f64_max_rel_error: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADCHECK_TOLERANCE
    }
}

fn dim(rng: &mut Rng) -> usize {
    1 + rng.below(8)
}

/// One random three-layer configuration: every width at most 8, at most
/// 5 classes per layer, batch of 4, error-driven penalty, indicators frozen
/// at their values for the unperturbed parameters, every ReLU at least
/// [`RELU_MARGIN`] from its kink.
pub fn check_case(rng: &mut Rng, eps: f64) -> Result<GradcheckCase> {
    let tree = CategoryTree::random(rng, 3, 5);
    let depth = tree.depth();
    let hidden = rng.below(3);
    let config = ModelConfig {
        input_dim: dim(rng),
        hidden_dims: (0..hidden).map(|_| dim(rng)).collect(),
        root_dim: dim(rng),
        layer_dims: (0..depth).map(|_| dim(rng)).collect(),
        share_mode: if rng.below(2) == 0 { ShareMode::Hierarchical } else { ShareMode::Independent },
        hen_bias: rng.below(2) == 0,
        head_bias: rng.below(2) == 0,
    };
    let mut model = DhcModel::new(&tree, &config, rng)?;
    // lift the biases off zero so their gradients are exercised in general position
    for p in model.params_mut().iter_mut() {
        if p.name.ends_with(".bias") {
            for v in p.value.as_mut_slice() {
                *v = rng.uniform(-0.5, 0.5);
            }
        }
    }
    let batch = 4;
    let (x, trace, relu_margin) = loop {
        let x = Matrix::from_vec(
            batch,
            config.input_dim,
            (0..batch * config.input_dim).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )?;
        let trace = model.forward(&x)?;
        let margin = trace
            .base_pre
            .iter()
            .flat_map(|m| m.as_slice())
            .fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if margin >= RELU_MARGIN {
            break (x, trace, margin);
        }
    };
    let golds: Vec<LabelPath> = (0..batch).map(|_| tree.path_of_leaf(rng.below(tree.leaf_count()))).collect();
    let loss_cfg = LossConfig {
        alpha: (0..depth).map(|_| rng.uniform(0.1, 1.0)).collect(),
        beta: (0..depth - 1).map(|_| rng.uniform(0.1, 1.0)).collect(),
        ploss: PlossMode::Error,
    };

    let out = hierarchical_loss(&trace.dists, &golds, &tree, &loss_cfg, None)?;
    let frozen: Vec<Indicators> = out.report.samples.iter().map(|s| s.indicators.clone()).collect();
    model.params_mut().zero_grad();
    model.backward(&trace, &out.logit_grads)?;
    let analytic: Vec<Matrix> = model.params().iter().map(|p| p.grad.clone()).collect();

    let reference = Reference {
        model: &model,
        x: &x,
        golds: &golds,
        config: &loss_cfg,
        frozen: &frozen,
    };
    let numeric = reference.central_differences(eps);

    let mut probe = model.clone();
    let mut params = model.params().clone();
    let mut failure = None;
    let numeric_f64 = finite_difference_grad(&mut params, eps, |p| {
        *probe.params_mut() = p.clone();
        let value = probe
            .forward(&x)
            .and_then(|t| hierarchical_loss(&t.dists, &golds, &tree, &loss_cfg, Some(&frozen)))
            .map(|o| o.report.total);
        match value {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let mut max_rel_error = 0.0f64;
    let mut worst_param = String::new();
    let (mut worst_analytic, mut worst_numeric) = (0.0, 0.0);
    for ((a, n), p) in analytic.iter().zip(&numeric).zip(model.params().iter()) {
        for (&av, &nv) in a.as_slice().iter().zip(n.as_slice()) {
            let e = relative_error(av, nv);
            if e > max_rel_error || e.is_nan() {
                max_rel_error = if e.is_nan() { f64::INFINITY } else { e };
                worst_param = p.name.clone();
                (worst_analytic, worst_numeric) = (av, nv);
            }
        }
    }
    Ok(GradcheckCase {
        class_counts: tree.class_counts(),
        config,
        max_rel_error,
        worst_param,
        worst_analytic,
        worst_numeric,
        f64_max_rel_error: max_relative_error(&analytic, &numeric_f64),
        objective: out.report.total,
        relu_margin,
    })
}

pub fn gradcheck(seed: u64, cases: usize) -> Result<GradcheckReport> {
    let mut rng = Rng::new(seed);
    let cases = (0..cases).map(|_| check_case(&mut rng, GRADCHECK_EPS)).collect::<Result<Vec<_>>>()?;
    let max_rel_error = cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    let f64_max_rel_error = cases.iter().map(|c| c.f64_max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        cases,
        max_rel_error,
        f64_max_rel_error,
    })
}

type Rows = Vec<Vec<DoubleDouble>>;

/// The batch objective with frozen indicators, evaluated from scratch in
/// double-double arithmetic.
struct Reference<'a> {
    model: &'a DhcModel,
    x: &'a Matrix,
    golds: &'a [LabelPath],
    config: &'a LossConfig,
    frozen: &'a [Indicators],
}

impl Reference<'_> {
    fn dense(values: &[Vec<DoubleDouble>], params: &ParameterSet, layer: &Dense, input: &Rows) -> Rows {
        let cols = params.value(layer.weight).cols();
        let w = &values[layer.weight.index()];
        input
            .iter()
            .map(|row| {
                (0..cols)
                    .map(|c| {
                        let mut acc = match layer.bias {
                            Some(b) => values[b.index()][c],
                            None => DoubleDouble::ZERO,
                        };
                        for (i, v) in row.iter().enumerate() {
                            acc = acc + *v * w[i * cols + c];
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    fn objective(&self, values: &[Vec<DoubleDouble>]) -> DoubleDouble {
        let params = self.model.params();
        let mut h: Rows = self
            .x
            .iter_rows()
            .map(|r| r.iter().map(|&v| DoubleDouble::from(v)).collect())
            .collect();
        let base = self.model.base_layers();
        for (i, layer) in base.iter().enumerate() {
            h = Self::dense(values, params, layer, &h);
            if i + 1 < base.len() {
                for v in h.iter_mut().flatten() {
                    *v = v.max(DoubleDouble::ZERO);
                }
            }
        }
        let mut reps: Vec<Rows> = Vec::new();
        for layer in self.model.hen_layers() {
            let own = Self::dense(values, params, layer, &h);
            let rep = match (self.model.config().share_mode, reps.last()) {
                (ShareMode::Hierarchical, Some(prev)) => prev
                    .iter()
                    .zip(&own)
                    .map(|(p, o)| p.iter().chain(o).copied().collect())
                    .collect(),
                _ => own,
            };
            reps.push(rep);
        }
        let lloss: Vec<Vec<DoubleDouble>> = self
            .model
            .head_layers()
            .iter()
            .zip(&reps)
            .enumerate()
            .map(|(l, (head, rep))| {
                Self::dense(values, params, head, rep)
                    .iter()
                    .zip(self.golds)
                    .map(|(z, gold)| {
                        let m = z.iter().fold(z[0], |a, &b| a.max(b));
                        let e: Vec<DoubleDouble> = z.iter().map(|&v| (v - m).exp()).collect();
                        let sum = e.iter().fold(DoubleDouble::ZERO, |a, &b| a + b);
                        let p = (e[gold.0[l]] / sum).max(DoubleDouble::from(1e-30));
                        -p.ln()
                    })
                    .collect()
            })
            .collect();
        let depth = lloss.len();
        let mut total = DoubleDouble::ZERO;
        for (s, ind) in self.frozen.iter().enumerate() {
            for l in 0..depth {
                total = total + lloss[l][s] * self.config.alpha[l];
            }
            for i in 0..depth - 1 {
                let gate_prev = ind.violation[i] && ind.error[i];
                let gate_cur = ind.violation[i] && ind.error[i + 1];
                let mut exponent = DoubleDouble::ZERO;
                if gate_prev {
                    exponent = exponent + lloss[i][s];
                }
                if gate_cur {
                    exponent = exponent + lloss[i + 1][s];
                }
                total = total + (exponent.exp() - 1.0) * self.config.beta[i];
            }
        }
        total / self.frozen.len() as f64
    }

    fn central_differences(&self, eps: f64) -> Vec<Matrix> {
        let mut values: Vec<Vec<DoubleDouble>> = self
            .model
            .params()
            .iter()
            .map(|p| p.value.as_slice().iter().map(|&v| DoubleDouble::from(v)).collect())
            .collect();
        let mut out = Vec::with_capacity(values.len());
        for (pi, p) in self.model.params().iter().enumerate() {
            let mut g = Matrix::zeros(p.value.rows(), p.value.cols());
            for k in 0..values[pi].len() {
                let orig = values[pi][k];
                values[pi][k] = orig + eps;
                let plus = self.objective(&values);
                values[pi][k] = orig - eps;
                let minus = self.objective(&values);
                values[pi][k] = orig;
                g.as_mut_slice()[k] = ((plus - minus) / (2.0 * eps)).to_f64();
            }
            out.push(g);
        }
        out
    }
}
