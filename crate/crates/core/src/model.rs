//! The hierarchical classifier network.
//!
//! A base perceptron maps the input to a root representation. Each layer of
//! the taxonomy gets its own linear projection of that root representation;
//! in hierarchical mode the representation fed to layer `l`'s softmax head is
//! the concatenation of the projections of layers `1..=l`, so deeper heads see
//! everything the shallower ones see. Independent mode feeds each head only
//! its own projection.

use crate::error::{Error, Result};
use crate::hierarchy::CategoryTree;
use crate::nncore::{
    concat_cols, relu, relu_backward, softmax_rows, split_cols, Dense, Matrix, ParameterSet, Rng,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShareMode {
    /// `R_1 = R'_1`, `R_l = R_{l-1} ⊕ R'_l`.
    Hierarchical,
    /// `R_l = R'_l`.
    Independent,
}

impl std::str::FromStr for ShareMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(ShareMode::Hierarchical),
            "independent" => Ok(ShareMode::Independent),
            other => Err(Error::InvalidArgument(format!("unknown share mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for ShareMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ShareMode::Hierarchical => "hierarchical",
            ShareMode::Independent => "independent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub root_dim: usize,
    /// Width of each per-layer projection. A single entry applies to every layer.
    pub layer_dims: Vec<usize>,
    pub share_mode: ShareMode,
    pub hen_bias: bool,
    pub head_bias: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_dim: 4096,
            hidden_dims: vec![256],
            root_dim: 128,
            layer_dims: vec![64],
            share_mode: ShareMode::Hierarchical,
            hen_bias: true,
            head_bias: true,
        }
    }
}

impl ModelConfig {
    /// Per-layer projection widths resolved against a tree depth.
    pub fn resolved_layer_dims(&self, depth: usize) -> Result<Vec<usize>> {
        match self.layer_dims.len() {
            1 => Ok(vec![self.layer_dims[0]; depth]),
            n if n == depth => Ok(self.layer_dims.clone()),
            n => Err(Error::InvalidArgument(format!(
                "{n} layer dims for a {depth}-layer tree"
            ))),
        }
    }
}

/// Everything computed by one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    step: u64,
    /// Inputs of each base dense layer; entry 0 is the batch itself.
    pub base_inputs: Vec<Matrix>,
    /// Pre-activations of the hidden base layers.
    pub base_pre: Vec<Matrix>,
    pub root: Matrix,
    pub independent: Vec<Matrix>,
    pub hierarchical: Vec<Matrix>,
    pub logits: Vec<Matrix>,
    pub dists: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn input(&self) -> &Matrix {
        &self.base_inputs[0]
    }

    pub fn batch_size(&self) -> usize {
        self.root.rows()
    }
}

#[derive(Debug, Clone)]
pub struct DhcModel {
    config: ModelConfig,
    layer_dims: Vec<usize>,
    tree: CategoryTree,
    params: ParameterSet,
    base: Vec<Dense>,
    hen: Vec<Dense>,
    heads: Vec<Dense>,
}

impl DhcModel {
    /// Allocates and initializes every parameter. Draw order: base layers
    /// first to last, then the per-layer projections, then the heads; each
    /// weight matrix row-major. Biases start at zero and take no draws.
    pub fn new(tree: &CategoryTree, config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        let depth = tree.depth();
        if depth == 0 {
            return Err(Error::InvalidArgument("tree has no layers".into()));
        }
        let layer_dims = config.resolved_layer_dims(depth)?;
        let dims_ok = config.input_dim > 0
            && config.root_dim > 0
            && config.hidden_dims.iter().all(|&d| d > 0)
            && layer_dims.iter().all(|&d| d > 0);
        if !dims_ok {
            return Err(Error::InvalidArgument(format!(
                "model dimensions must be positive: {config:?}"
            )));
        }

        let mut params = ParameterSet::new();
        let mut base = Vec::new();
        let mut fan_in = config.input_dim;
        let widths = config.hidden_dims.iter().chain(std::iter::once(&config.root_dim));
        for (i, &w) in widths.enumerate() {
            let weight = params.add_uniform(format!("base.{i}.weight"), fan_in, w, rng);
            let bias = params.add(format!("base.{i}.bias"), Matrix::zeros(1, w));
            base.push(Dense {
                weight,
                bias: Some(bias),
            });
            fan_in = w;
        }
        let mut hen = Vec::new();
        for (l, &d) in layer_dims.iter().enumerate() {
            let weight = params.add_uniform(format!("hen.{}.weight", l + 1), config.root_dim, d, rng);
            let bias = config
                .hen_bias
                .then(|| params.add(format!("hen.{}.bias", l + 1), Matrix::zeros(1, d)));
            hen.push(Dense { weight, bias });
        }
        let rep_widths = rep_widths(&layer_dims, config.share_mode);
        let mut heads = Vec::new();
        for (l, &w) in rep_widths.iter().enumerate() {
            let classes = tree.class_count(l);
            let weight = params.add_uniform(format!("head.{}.weight", l + 1), w, classes, rng);
            let bias = config
                .head_bias
                .then(|| params.add(format!("head.{}.bias", l + 1), Matrix::zeros(1, classes)));
            heads.push(Dense { weight, bias });
        }
        Ok(DhcModel {
            config: config.clone(),
            layer_dims,
            tree: tree.clone(),
            params,
            base,
            hen,
            heads,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tree(&self) -> &CategoryTree {
        &self.tree
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    /// Width of the representation fed to each head.
    pub fn rep_widths(&self) -> Vec<usize> {
        rep_widths(&self.layer_dims, self.config.share_mode)
    }

    pub fn base_layers(&self) -> &[Dense] {
        &self.base
    }

    pub fn hen_layers(&self) -> &[Dense] {
        &self.hen
    }

    pub fn head_layers(&self) -> &[Dense] {
        &self.heads
    }

    /// Base network: dense+relu per hidden width, then a final dense to the
    /// root width.
    pub fn fnn_forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.fnn_forward_traced(x)?.2)
    }

    fn fnn_forward_traced(&self, x: &Matrix) -> Result<(Vec<Matrix>, Vec<Matrix>, Matrix)> {
        if x.cols() != self.config.input_dim {
            return Err(Error::shape(
                "fnn_forward",
                format!("input width {} but model expects {}", x.cols(), self.config.input_dim),
            ));
        }
        let mut inputs = vec![x.clone()];
        let mut pre = Vec::new();
        let last = self.base.len() - 1;
        for (i, layer) in self.base.iter().enumerate() {
            let z = layer.forward(&self.params, inputs.last().unwrap())?;
            if i == last {
                return Ok((inputs, pre, z));
            }
            inputs.push(relu(&z));
            pre.push(z);
        }
        unreachable!("base network has at least one layer")
    }

    /// Per-layer projections and the representations built from them.
    pub fn hen_forward(&self, root: &Matrix) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
        if root.cols() != self.config.root_dim {
            return Err(Error::shape(
                "hen_forward",
                format!("root width {} but model expects {}", root.cols(), self.config.root_dim),
            ));
        }
        let independent = self
            .hen
            .iter()
            .map(|layer| layer.forward(&self.params, root))
            .collect::<Result<Vec<_>>>()?;
        let hierarchical = match self.config.share_mode {
            ShareMode::Independent => independent.clone(),
            ShareMode::Hierarchical => {
                let mut reps: Vec<Matrix> = Vec::with_capacity(independent.len());
                for (l, own) in independent.iter().enumerate() {
                    let rep = match reps.last() {
                        None => own.clone(),
                        Some(prev) => concat_cols(&[prev, own])?,
                    };
                    debug_assert_eq!(rep.cols(), self.rep_widths()[l]);
                    reps.push(rep);
                }
                reps
            }
        };
        Ok((independent, hierarchical))
    }

    /// Logits and softmax distributions for each layer.
    pub fn heads_forward(&self, reps: &[Matrix]) -> Result<(Vec<Matrix>, Vec<Matrix>)> {
        if reps.len() != self.heads.len() {
            return Err(Error::shape(
                "heads_forward",
                format!("{} representations for {} heads", reps.len(), self.heads.len()),
            ));
        }
        let mut logits = Vec::with_capacity(reps.len());
        let mut dists = Vec::with_capacity(reps.len());
        for (head, rep) in self.heads.iter().zip(reps) {
            let z = head.forward(&self.params, rep)?;
            dists.push(softmax_rows(&z)?);
            logits.push(z);
        }
        Ok((logits, dists))
    }

    pub fn forward(&self, x: &Matrix) -> Result<ForwardTrace> {
        let (base_inputs, base_pre, root) = self.fnn_forward_traced(x)?;
        let (independent, hierarchical) = self.hen_forward(&root)?;
        let (logits, dists) = self.heads_forward(&hierarchical)?;
        Ok(ForwardTrace {
            step: self.params.step(),
            base_inputs,
            base_pre,
            root,
            independent,
            hierarchical,
            logits,
            dists,
        })
    }

    /// Per-layer distributions only.
    pub fn predict_dists(&self, x: &Matrix) -> Result<Vec<Matrix>> {
        Ok(self.forward(x)?.dists)
    }

    /// Accumulates parameter gradients given the gradient of the objective
    /// with respect to each layer's logits.
    pub fn backward(&mut self, trace: &ForwardTrace, logit_grads: &[Matrix]) -> Result<()> {
        if trace.step != self.params.step() {
            return Err(Error::InvalidArgument(format!(
                "stale trace: recorded at step {}, parameters are at step {}",
                trace.step,
                self.params.step()
            )));
        }
        if logit_grads.len() != self.heads.len()
            || logit_grads
                .iter()
                .zip(&trace.logits)
                .any(|(g, z)| g.shape() != z.shape())
        {
            return Err(Error::shape(
                "model_backward",
                "logit gradients do not match the trace",
            ));
        }

        // heads
        let mut rep_grads = Vec::with_capacity(self.heads.len());
        for ((head, rep), g) in self.heads.iter().zip(&trace.hierarchical).zip(logit_grads) {
            rep_grads.push(head.backward(&mut self.params, rep, g, true)?.unwrap());
        }

        // R_l -> R'_k: walk deepest first, handing the prefix block of each
        // representation's gradient up to the previous layer.
        let own_grads: Vec<Matrix> = match self.config.share_mode {
            ShareMode::Independent => rep_grads,
            ShareMode::Hierarchical => {
                let widths = self.rep_widths();
                let mut own = vec![Matrix::zeros(0, 0); rep_grads.len()];
                let mut carry: Option<Matrix> = None;
                for l in (0..rep_grads.len()).rev() {
                    let mut g = rep_grads[l].clone();
                    if let Some(c) = carry.take() {
                        g.add_assign(&c)?;
                    }
                    if l == 0 {
                        own[0] = g;
                    } else {
                        let mut parts = split_cols(&g, &[widths[l - 1], self.layer_dims[l]])?;
                        own[l] = parts.pop().unwrap();
                        carry = parts.pop();
                    }
                }
                own
            }
        };

        let mut root_grad = Matrix::zeros(trace.root.rows(), trace.root.cols());
        for (layer, g) in self.hen.iter().zip(&own_grads) {
            let gx = layer.backward(&mut self.params, &trace.root, g, true)?.unwrap();
            root_grad.add_assign(&gx)?;
        }

        let mut upstream = root_grad;
        for i in (0..self.base.len()).rev() {
            let want_x = i > 0;
            let gx = self.base[i].backward(&mut self.params, &trace.base_inputs[i], &upstream, want_x)?;
            match gx {
                Some(gx) => upstream = relu_backward(&trace.base_pre[i - 1], &gx)?,
                None => break,
            }
        }
        Ok(())
    }
}

fn rep_widths(layer_dims: &[usize], mode: ShareMode) -> Vec<usize> {
    match mode {
        ShareMode::Independent => layer_dims.to_vec(),
        ShareMode::Hierarchical => layer_dims
            .iter()
            .scan(0, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect(),
    }
}
