//! Decoders that turn per-layer distributions into a root-to-leaf path.
//!
//! All three only ever emit paths that exist in the tree. Scores are sums of
//! per-layer log probabilities (floored at [`PROB_FLOOR`]).

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::hierarchy::{CategoryTree, LabelPath};
use crate::loss::{predicted_class, PROB_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct DecodedPath {
    pub path: LabelPath,
    /// Probability of the chosen class at each layer.
    pub probs: Vec<f64>,
    /// Σ log probability.
    pub score: f64,
}

impl DecodedPath {
    fn from_path(path: LabelPath, dists: &[&[f64]]) -> Self {
        let probs: Vec<f64> = path.0.iter().zip(dists).map(|(&c, d)| d[c]).collect();
        let score = probs.iter().map(|p| log_prob(*p)).sum();
        DecodedPath { path, probs, score }
    }
}

fn log_prob(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Decoder {
    #[default]
    Greedy,
    Heuristic,
    Beam(usize),
}

impl Decoder {
    pub fn parse(name: &str, beam_width: usize) -> Result<Self> {
        match name {
            "greedy" => Ok(Decoder::Greedy),
            "heuristic" => Ok(Decoder::Heuristic),
            "beam" => Ok(Decoder::Beam(beam_width)),
            other => Err(Error::InvalidArgument(format!("unknown decoder `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Decoder::Greedy => "greedy",
            Decoder::Heuristic => "heuristic",
            Decoder::Beam(_) => "beam",
        }
    }

    pub fn decode(&self, dists: &[&[f64]], tree: &CategoryTree) -> Result<DecodedPath> {
        match *self {
            Decoder::Greedy => greedy_decode(dists, tree),
            Decoder::Heuristic => heuristic_decode(dists, tree),
            Decoder::Beam(k) => Ok(beam_decode(dists, tree, k)?.swap_remove(0)),
        }
    }
}

fn check_shapes(dists: &[&[f64]], tree: &CategoryTree) -> Result<()> {
    if dists.len() != tree.depth() {
        return Err(Error::shape(
            "decode",
            format!("{} distributions for a {}-layer tree", dists.len(), tree.depth()),
        ));
    }
    for (l, d) in dists.iter().enumerate() {
        if d.len() != tree.class_count(l) {
            return Err(Error::shape(
                "decode",
                format!("layer {} has {} classes, distribution has {}", l + 1, tree.class_count(l), d.len()),
            ));
        }
    }
    Ok(())
}

/// Top-down: argmax at the first layer, then argmax among the children of
/// the previous choice. Ties go to the lowest class index (children lists are
/// ascending).
pub fn greedy_decode(dists: &[&[f64]], tree: &CategoryTree) -> Result<DecodedPath> {
    check_shapes(dists, tree)?;
    let mut path = vec![predicted_class(dists[0])?];
    for l in 1..tree.depth() {
        let prev = path[l - 1];
        let children = tree.children_indices(l - 1, prev);
        let mut best = *children.first().ok_or_else(|| {
            Error::InvalidTree(format!("`{}` has no children", tree.node_id(l - 1, prev)))
        })?;
        for &c in &children[1..] {
            if dists[l][c] > dists[l][best] {
                best = c;
            }
        }
        path.push(best);
    }
    Ok(DecodedPath::from_path(LabelPath(path), dists))
}

/// Leaf argmax, ancestors read off the tree.
pub fn heuristic_decode(dists: &[&[f64]], tree: &CategoryTree) -> Result<DecodedPath> {
    check_shapes(dists, tree)?;
    let leaf = predicted_class(dists[tree.depth() - 1])?;
    Ok(DecodedPath::from_path(tree.path_of_leaf(leaf), dists))
}

fn rank(a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Beam search over layers keeping the `k` best partial paths by joint log
/// probability. Returns the final beam, best first; equal scores are ordered
/// by class-index sequence.
pub fn beam_decode(dists: &[&[f64]], tree: &CategoryTree, k: usize) -> Result<Vec<DecodedPath>> {
    if k < 1 {
        return Err(Error::InvalidArgument("beam width must be at least 1".into()));
    }
    check_shapes(dists, tree)?;
    let mut beam: Vec<(Vec<usize>, f64)> = dists[0]
        .iter()
        .enumerate()
        .map(|(c, &p)| (vec![c], log_prob(p)))
        .collect();
    beam.sort_by(rank);
    beam.truncate(k);
    for l in 1..tree.depth() {
        let mut next = Vec::new();
        for (path, score) in &beam {
            for &c in tree.children_indices(l - 1, *path.last().unwrap()) {
                let mut extended = path.clone();
                extended.push(c);
                next.push((extended, score + log_prob(dists[l][c])));
            }
        }
        next.sort_by(rank);
        next.truncate(k);
        beam = next;
    }
    Ok(beam
        .into_iter()
        .map(|(path, _)| DecodedPath::from_path(LabelPath(path), dists))
        .collect())
}
