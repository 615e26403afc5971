//! Experiment configuration: `key = value` lines, `#` comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::Featurizer;
use crate::error::{Error, Result};
use crate::inference::Decoder;
use crate::loss::{LossConfig, PlossMode};
use crate::model::{ModelConfig, ShareMode};
use crate::nncore::{Adam, Optimizer, Sgd};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub taxonomy: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub hidden_dims: Vec<usize>,
    pub root_dim: usize,
    pub layer_dims: Vec<usize>,
    pub share_mode: ShareMode,
    pub hen_bias: bool,
    pub head_bias: bool,
    /// One weight, or one per layer.
    pub alpha: Vec<f64>,
    /// One weight, or one per adjacent layer pair.
    pub beta: Vec<f64>,
    pub ploss: PlossMode,
    pub decoder: Decoder,
    pub featurizer: Featurizer,
    pub test_fraction: f64,
    /// Evaluate on the held-out split every this many epochs (0 = only at the end).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        TrainConfig {
            taxonomy: None,
            data: None,
            checkpoint: None,
            log: None,
            epochs: 50,
            batch_size: 32,
            seed: 1,
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            momentum: 0.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            hidden_dims: model.hidden_dims,
            root_dim: model.root_dim,
            layer_dims: model.layer_dims,
            share_mode: model.share_mode,
            hen_bias: model.hen_bias,
            head_bias: model.head_bias,
            alpha: vec![1.0],
            beta: vec![0.25],
            ploss: PlossMode::Error,
            decoder: Decoder::Greedy,
            featurizer: Featurizer::default(),
            test_fraction: 0.1,
            eval_every: 0,
        }
    }
}

/// Help text listing every key with its default.
pub const CONFIG_KEYS: &str = "\
Config file keys (`key = value`, `#` comments):
  taxonomy, data, checkpoint, log   paths, relative to the config file
  epochs = 50            batch_size = 32        seed = 1
  optimizer = adam|sgd   lr = 0.001             momentum = 0 (sgd)
  adam_beta1 = 0.9       adam_beta2 = 0.999     adam_eps = 1e-8
  hidden_dims = 256      root_dim = 128         layer_dims = 64
  share_mode = hierarchical|independent
  hen_bias = true        head_bias = true
  alpha = 1              beta = 0.25            (single value or comma list)
  ploss = error|constant ploss_constant = 2     (used when ploss = constant)
  decoder = greedy|heuristic|beam               beam_width = 5
  input_dim = 4096       ngram = 2
  test_fraction = 0.1    eval_every = 0";

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        msg: format!("invalid value `{value}` for `{key}`"),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|v| parse_value(line, key, v.trim()))
        .collect()
}

fn fmt_list<T: std::fmt::Display>(values: &[T]) -> String {
    if values.is_empty() {
        return "none".into();
    }
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn broadcast(values: &[f64], n: usize, what: &str) -> Result<Vec<f64>> {
    match values.len() {
        1 => Ok(vec![values[0]; n]),
        len if len == n => Ok(values.to_vec()),
        len => Err(Error::InvalidArgument(format!("{len} {what} weights, expected 1 or {n}"))),
    }
}

impl TrainConfig {
    pub fn parse(source: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut beam_width = 5usize;
        let mut ploss_kind = String::from("error");
        let mut ploss_constant = 2.0f64;
        let mut decoder_name = String::from("greedy");
        for (lineno, raw) in source.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: line_no,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            let l = line_no;
            match key {
                "taxonomy" => cfg.taxonomy = Some(PathBuf::from(value)),
                "data" => cfg.data = Some(PathBuf::from(value)),
                "checkpoint" => cfg.checkpoint = Some(PathBuf::from(value)),
                "log" => cfg.log = Some(PathBuf::from(value)),
                "epochs" => cfg.epochs = parse_value(l, key, value)?,
                "batch_size" => cfg.batch_size = parse_value(l, key, value)?,
                "seed" => cfg.seed = parse_value(l, key, value)?,
                "optimizer" => {
                    cfg.optimizer = match value {
                        "adam" => OptimizerKind::Adam,
                        "sgd" => OptimizerKind::Sgd,
                        _ => return Err(Error::Config { line: l, msg: format!("unknown optimizer `{value}`") }),
                    }
                }
                "lr" => cfg.lr = parse_value(l, key, value)?,
                "momentum" => cfg.momentum = parse_value(l, key, value)?,
                "adam_beta1" => cfg.adam_beta1 = parse_value(l, key, value)?,
                "adam_beta2" => cfg.adam_beta2 = parse_value(l, key, value)?,
                "adam_eps" => cfg.adam_eps = parse_value(l, key, value)?,
                "hidden_dims" => cfg.hidden_dims = parse_list(l, key, value)?,
                "root_dim" => cfg.root_dim = parse_value(l, key, value)?,
                "layer_dims" => cfg.layer_dims = parse_list(l, key, value)?,
                "share_mode" => {
                    cfg.share_mode = value.parse().map_err(|e: Error| Error::Config { line: l, msg: e.to_string() })?
                }
                "hen_bias" => cfg.hen_bias = parse_value(l, key, value)?,
                "head_bias" => cfg.head_bias = parse_value(l, key, value)?,
                "alpha" => cfg.alpha = parse_list(l, key, value)?,
                "beta" => cfg.beta = parse_list(l, key, value)?,
                "ploss" => ploss_kind = value.to_string(),
                "ploss_constant" => ploss_constant = parse_value(l, key, value)?,
                "decoder" => decoder_name = value.to_string(),
                "beam_width" => beam_width = parse_value(l, key, value)?,
                "input_dim" => cfg.featurizer.input_dim = parse_value(l, key, value)?,
                "ngram" => cfg.featurizer.n_max = parse_value(l, key, value)?,
                "test_fraction" => cfg.test_fraction = parse_value(l, key, value)?,
                "eval_every" => cfg.eval_every = parse_value(l, key, value)?,
                _ => {
                    return Err(Error::Config {
                        line: l,
                        msg: format!("unknown key `{key}`"),
                    })
                }
            }
        }
        cfg.ploss = match ploss_kind.as_str() {
            "error" => PlossMode::Error,
            "constant" => PlossMode::Constant(ploss_constant),
            other => {
                return Err(Error::Config {
                    line: 0,
                    msg: format!("unknown ploss mode `{other}`"),
                })
            }
        };
        cfg.decoder = Decoder::parse(&decoder_name, beam_width).map_err(|e| Error::Config {
            line: 0,
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.taxonomy, &mut self.data, &mut self.checkpoint, &mut self.log]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config { line: 0, msg });
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction {} not in (0, 1)", self.test_fraction));
        }
        if self.featurizer.input_dim < 1 || self.featurizer.n_max < 1 {
            return bad("input_dim and ngram must be >= 1".into());
        }
        if self.alpha.is_empty() || self.beta.is_empty() || self.layer_dims.is_empty() {
            return bad("alpha, beta and layer_dims need at least one value".into());
        }
        if let Decoder::Beam(0) = self.decoder {
            return bad("beam_width must be >= 1".into());
        }
        self.build_optimizer().map_err(|e| Error::Config {
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            input_dim: self.featurizer.input_dim,
            hidden_dims: self.hidden_dims.clone(),
            root_dim: self.root_dim,
            layer_dims: self.layer_dims.clone(),
            share_mode: self.share_mode,
            hen_bias: self.hen_bias,
            head_bias: self.head_bias,
        }
    }

    pub fn loss_config(&self, depth: usize) -> Result<LossConfig> {
        let beta = if depth > 1 {
            broadcast(&self.beta, depth - 1, "beta")?
        } else {
            Vec::new()
        };
        let cfg = LossConfig {
            alpha: broadcast(&self.alpha, depth, "alpha")?,
            beta,
            ploss: self.ploss,
        };
        cfg.validate(depth)?;
        Ok(cfg)
    }

    pub fn build_optimizer(&self) -> Result<Box<dyn Optimizer>> {
        Ok(match self.optimizer {
            OptimizerKind::Adam => Box::new(Adam::new(self.lr, self.adam_beta1, self.adam_beta2, self.adam_eps)?),
            OptimizerKind::Sgd => Box::new(Sgd::new(self.lr, self.momentum)?),
        })
    }

    /// Serializes every setting; [`parse`](Self::parse) reads it back unchanged.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        for (k, p) in [
            ("taxonomy", &self.taxonomy),
            ("data", &self.data),
            ("checkpoint", &self.checkpoint),
            ("log", &self.log),
        ] {
            if let Some(p) = p {
                kv(k, p.display().to_string());
            }
        }
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("seed", self.seed.to_string());
        kv(
            "optimizer",
            match self.optimizer {
                OptimizerKind::Adam => "adam",
                OptimizerKind::Sgd => "sgd",
            }
            .into(),
        );
        kv("lr", self.lr.to_string());
        kv("momentum", self.momentum.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("hidden_dims", fmt_list(&self.hidden_dims));
        kv("root_dim", self.root_dim.to_string());
        kv("layer_dims", fmt_list(&self.layer_dims));
        kv("share_mode", self.share_mode.to_string());
        kv("hen_bias", self.hen_bias.to_string());
        kv("head_bias", self.head_bias.to_string());
        kv("alpha", fmt_list(&self.alpha));
        kv("beta", fmt_list(&self.beta));
        match self.ploss {
            PlossMode::Error => kv("ploss", "error".into()),
            PlossMode::Constant(c) => {
                kv("ploss", "constant".into());
                kv("ploss_constant", c.to_string());
            }
        }
        kv("decoder", self.decoder.name().into());
        if let Decoder::Beam(k) = self.decoder {
            kv("beam_width", k.to_string());
        }
        kv("input_dim", self.featurizer.input_dim.to_string());
        kv("ngram", self.featurizer.n_max.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("eval_every", self.eval_every.to_string());
        out
    }
}
