//! Category tree: the layered taxonomy every prediction is checked against.
//!
//! Layers are 0-based in this API (layer 0 holds the children of the implicit
//! root). The root itself is never a class. Class indices within a layer follow
//! the order in which nodes first appear in the taxonomy file.

use std::collections::HashMap;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nncore::Rng;

/// Parent id used in taxonomy files for first-layer nodes.
pub const ROOT: &str = "ROOT";

/// Position of a node inside the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeRef {
    pub layer: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryTree {
    ids: Vec<Vec<String>>,
    names: Vec<Vec<String>>,
    // parents[l][i] is the index in layer l-1; empty for layer 0.
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<Vec<usize>>>,
    lookup: HashMap<String, NodeRef>,
}

/// One class index per layer, from the first layer down to the leaf layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelPath(pub Vec<usize>);

impl LabelPath {
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn leaf(&self) -> usize {
        *self.0.last().expect("label path is never empty")
    }

    /// True when every adjacent pair is a parent/child pair in `tree`.
    pub fn is_consistent(&self, tree: &CategoryTree) -> bool {
        if self.0.len() != tree.depth() {
            return false;
        }
        if self
            .0
            .iter()
            .enumerate()
            .any(|(l, &c)| c >= tree.class_count(l))
        {
            return false;
        }
        self.0
            .windows(2)
            .enumerate()
            .all(|(l, w)| tree.parent_index(l + 1, w[1]) == w[0])
    }

    pub fn ids<'a>(&self, tree: &'a CategoryTree) -> Vec<&'a str> {
        self.0
            .iter()
            .enumerate()
            .map(|(l, &c)| tree.node_id(l, c))
            .collect()
    }
}

struct RawNode {
    id: String,
    parent: String,
    name: String,
    line: usize,
}

impl CategoryTree {
    /// Parses a taxonomy file: `node_id<TAB>parent_id[<TAB>display name]`, one
    /// node per line, `#` comments and blank lines skipped. Parents may be
    /// declared after their children.
    pub fn load(source: &str) -> Result<Self> {
        let mut raw = Vec::new();
        let mut position: HashMap<String, usize> = HashMap::new();
        for (lineno, line) in source.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&fields.len()) {
                return Err(Error::Taxonomy {
                    line: lineno,
                    msg: format!("expected `node<TAB>parent`, got {} field(s)", fields.len()),
                });
            }
            let id = fields[0].trim();
            let parent = fields[1].trim();
            if id.is_empty() || parent.is_empty() {
                return Err(Error::Taxonomy {
                    line: lineno,
                    msg: "empty node or parent id".into(),
                });
            }
            if id == ROOT {
                return Err(Error::Taxonomy {
                    line: lineno,
                    msg: format!("`{ROOT}` is reserved for the implicit root"),
                });
            }
            if position.insert(id.to_string(), raw.len()).is_some() {
                return Err(Error::Taxonomy {
                    line: lineno,
                    msg: format!("duplicate node id `{id}`"),
                });
            }
            let name = fields.get(2).map(|s| s.trim()).filter(|s| !s.is_empty());
            raw.push(RawNode {
                id: id.to_string(),
                parent: parent.to_string(),
                name: name.unwrap_or(id).to_string(),
                line: lineno,
            });
        }
        if raw.is_empty() {
            return Err(Error::InvalidTree("taxonomy has no nodes (empty layer 1)".into()));
        }
        for node in &raw {
            if node.parent != ROOT && !position.contains_key(&node.parent) {
                return Err(Error::Taxonomy {
                    line: node.line,
                    msg: format!("parent `{}` of `{}` is not a known node", node.parent, node.id),
                });
            }
        }

        // Resolve layers by walking up to the root; a walk longer than the
        // node count means a cycle.
        let mut layer_of: Vec<Option<usize>> = vec![None; raw.len()];
        for start in 0..raw.len() {
            let mut chain = Vec::new();
            let mut cur = start;
            let base = loop {
                if let Some(l) = layer_of[cur] {
                    break Some(l);
                }
                if raw[cur].parent == ROOT {
                    chain.push(cur);
                    break None;
                }
                chain.push(cur);
                if chain.len() > raw.len() {
                    return Err(Error::Taxonomy {
                        line: raw[start].line,
                        msg: format!("cycle through `{}`", raw[start].id),
                    });
                }
                cur = position[&raw[cur].parent];
            };
            // chain runs child -> ancestor; the last entry is either a
            // first-layer node (base None) or the child of a resolved node.
            let top = match base {
                Some(l) => l + 1,
                None => 0,
            };
            for (depth_from_top, &node) in chain.iter().rev().enumerate() {
                layer_of[node] = Some(top + depth_from_top);
            }
        }
        let layer_of: Vec<usize> = layer_of.into_iter().map(|l| l.unwrap()).collect();
        let depth = layer_of.iter().max().unwrap() + 1;

        let mut ids = vec![Vec::new(); depth];
        let mut names = vec![Vec::new(); depth];
        let mut lookup = HashMap::new();
        for (i, node) in raw.iter().enumerate() {
            let layer = layer_of[i];
            lookup.insert(
                node.id.clone(),
                NodeRef {
                    layer,
                    index: ids[layer].len(),
                },
            );
            ids[layer].push(node.id.clone());
            names[layer].push(node.name.clone());
        }
        let mut parents = vec![Vec::new(); depth];
        let mut children: Vec<Vec<Vec<usize>>> =
            ids.iter().map(|layer| vec![Vec::new(); layer.len()]).collect();
        for layer in 1..depth {
            for id in &ids[layer] {
                let node = &raw[position[id]];
                let p = lookup[&node.parent];
                parents[layer].push(p.index);
                children[layer - 1][p.index].push(lookup[id].index);
            }
        }
        for (layer, kids) in children.iter().enumerate().take(depth - 1) {
            if let Some(i) = kids.iter().position(|c| c.is_empty()) {
                let node = &raw[position[&ids[layer][i]]];
                return Err(Error::Taxonomy {
                    line: node.line,
                    msg: format!(
                        "`{}` is a leaf in layer {} but the tree has {} layers; \
                         every leaf must sit in the last layer",
                        node.id,
                        layer + 1,
                        depth
                    ),
                });
            }
        }
        Ok(CategoryTree {
            ids,
            names,
            parents,
            children,
            lookup,
        })
    }

    /// Builds a tree where every node in layer `l` has `fanout[l + 1]`
    /// children. Ids are `c0`, `c0_1`, `c0_1_2`, ...
    pub fn balanced(fanout: &[usize]) -> Result<Self> {
        if fanout.is_empty() || fanout.contains(&0) {
            return Err(Error::InvalidArgument(
                "balanced tree needs at least one layer and nonzero fanout".into(),
            ));
        }
        let mut text = String::new();
        let mut frontier: Vec<String> = Vec::new();
        for (layer, &n) in fanout.iter().enumerate() {
            let mut next = Vec::new();
            if layer == 0 {
                for i in 0..n {
                    let id = format!("c{i}");
                    text.push_str(&format!("{id}\t{ROOT}\n"));
                    next.push(id);
                }
            } else {
                for parent in &frontier {
                    for i in 0..n {
                        let id = format!("{parent}_{i}");
                        text.push_str(&format!("{id}\t{parent}\n"));
                        next.push(id);
                    }
                }
            }
            frontier = next;
        }
        Self::load(&text)
    }

    /// Random valid tree with `depth` layers and at most `max_width` nodes in
    /// any layer. Layer widths never shrink going down.
    pub fn random(rng: &mut Rng, depth: usize, max_width: usize) -> Self {
        assert!(depth >= 1 && max_width >= 1);
        let mut text = String::new();
        let mut prev = 0usize;
        for layer in 0..depth {
            let lo = prev.max(1);
            let width = rng.inner().gen_range(lo..=max_width.max(lo));
            if layer == 0 {
                for i in 0..width {
                    text.push_str(&format!("n0_{i}\t{ROOT}\n"));
                }
            } else {
                // every parent gets one child, the rest are spread at random
                let mut owners: Vec<usize> = (0..prev).collect();
                for _ in prev..width {
                    owners.push(rng.inner().gen_range(0..prev));
                }
                owners.sort_unstable();
                for (i, p) in owners.iter().enumerate() {
                    text.push_str(&format!("n{layer}_{i}\tn{}_{p}\n", layer - 1));
                }
            }
            prev = width;
        }
        Self::load(&text).expect("generated tree is valid")
    }

    /// Number of layers L (root excluded).
    pub fn depth(&self) -> usize {
        self.ids.len()
    }

    pub fn class_count(&self, layer: usize) -> usize {
        self.ids[layer].len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.ids.iter().map(Vec::len).collect()
    }

    pub fn leaf_count(&self) -> usize {
        self.class_count(self.depth() - 1)
    }

    pub fn nodes(&self, layer: usize) -> &[String] {
        &self.ids[layer]
    }

    pub fn node_id(&self, layer: usize, index: usize) -> &str {
        &self.ids[layer][index]
    }

    pub fn node_name(&self, layer: usize, index: usize) -> &str {
        &self.names[layer][index]
    }

    pub fn find(&self, id: &str) -> Result<NodeRef> {
        self.lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    /// Index of the parent (in layer `layer - 1`) of class `index` in `layer`.
    /// Panics for layer 0, whose parent is the implicit root.
    pub fn parent_index(&self, layer: usize, index: usize) -> usize {
        self.parents[layer][index]
    }

    pub fn parent(&self, id: &str) -> Result<Option<&str>> {
        let node = self.find(id)?;
        Ok(match node.layer {
            0 => None,
            l => Some(self.node_id(l - 1, self.parent_index(l, node.index))),
        })
    }

    /// Children (indices into layer `layer + 1`) of class `index` in `layer`.
    pub fn children_indices(&self, layer: usize, index: usize) -> &[usize] {
        &self.children[layer][index]
    }

    pub fn class_index(&self, layer: usize, id: &str) -> Result<usize> {
        let node = self.find(id)?;
        if node.layer != layer {
            return Err(Error::LayerMismatch {
                node: id.to_string(),
                expected: layer + 1,
                actual: node.layer + 1,
            });
        }
        Ok(node.index)
    }

    pub fn is_child(&self, parent: &str, child: &str) -> Result<bool> {
        let p = self.find(parent)?;
        let c = self.find(child)?;
        Ok(c.layer == p.layer + 1 && self.parents[c.layer][c.index] == p.index)
    }

    /// Index form of [`is_child`](Self::is_child): is class `child` of layer
    /// `layer` a child of class `parent` of layer `layer - 1`?
    pub fn is_child_index(&self, layer: usize, parent: usize, child: usize) -> bool {
        self.parents[layer][child] == parent
    }

    pub fn leaf_to_path(&self, leaf: &str) -> Result<LabelPath> {
        let node = self.find(leaf)?;
        let last = self.depth() - 1;
        if node.layer != last {
            return Err(Error::LayerMismatch {
                node: leaf.to_string(),
                expected: last + 1,
                actual: node.layer + 1,
            });
        }
        Ok(self.path_of_leaf(node.index))
    }

    pub fn path_of_leaf(&self, leaf: usize) -> LabelPath {
        let depth = self.depth();
        let mut path = vec![0; depth];
        let mut cur = leaf;
        for layer in (0..depth).rev() {
            path[layer] = cur;
            if layer > 0 {
                cur = self.parents[layer][cur];
            }
        }
        LabelPath(path)
    }

    /// Every root-to-leaf path, in leaf order.
    pub fn all_paths(&self) -> Vec<LabelPath> {
        (0..self.leaf_count()).map(|i| self.path_of_leaf(i)).collect()
    }

    /// Writes the tree back out in taxonomy-file form, layer by layer.
    pub fn to_taxonomy_string(&self) -> String {
        let mut out = String::new();
        for layer in 0..self.depth() {
            for (i, id) in self.ids[layer].iter().enumerate() {
                let parent = if layer == 0 {
                    ROOT
                } else {
                    self.node_id(layer - 1, self.parents[layer][i])
                };
                out.push_str(id);
                out.push('\t');
                out.push_str(parent);
                if self.names[layer][i] != *id {
                    out.push('\t');
                    out.push_str(&self.names[layer][i]);
                }
                out.push('\n');
            }
        }
        out
    }

    /// FNV-1a hash of the serialized tree; used to pair checkpoints with taxonomies.
    pub fn fingerprint(&self) -> u64 {
        crate::data::fnv1a64(self.to_taxonomy_string().as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_two_layer_tree() {
        let tree = CategoryTree::load("a\tROOT\na1\ta\n").unwrap();
        assert_eq!(tree.depth(), 2);
        assert_eq!(tree.nodes(0), ["a"]);
        assert_eq!(tree.nodes(1), ["a1"]);
        assert_eq!(tree.parent("a1").unwrap(), Some("a"));
        assert_eq!(tree.parent("a").unwrap(), None);
    }

    #[test]
    fn cifar_shaped_tree() {
        let tree = CategoryTree::balanced(&[20, 5]).unwrap();
        assert_eq!(tree.class_counts(), vec![20, 100]);
    }

    #[test]
    fn forward_references_and_comments() {
        let src = "# header\nb1\tb\n\na\tROOT\nb\tROOT\na1\ta\n";
        let tree = CategoryTree::load(src).unwrap();
        assert_eq!(tree.nodes(0), ["a", "b"]);
        assert_eq!(tree.nodes(1), ["b1", "a1"]);
        assert_eq!(tree.children_indices(1 - 1, 1), &[0]);
    }

    #[test]
    fn load_errors() {
        let err = |s: &str| CategoryTree::load(s).unwrap_err().to_string();
        assert!(err("a ROOT\n").contains("field"));
        assert!(err("a\tROOT\na\tROOT\n").contains("duplicate"));
        assert!(err("a\tROOT\nb\tzz\n").contains("not a known node"));
        assert!(err("").contains("empty"));
        assert!(err("# only a comment\n").contains("empty"));
        assert!(err("a\tb\nb\ta\n").contains("cycle"));
        assert!(err("a\ta\n").contains("cycle"));
        // x names a second-layer parent, leaving b as a shallow leaf
        assert!(err("a\tROOT\nb\tROOT\na1\ta\nb1\tb\nx\ta1\n").contains("last layer"));
    }

    #[test]
    fn display_names() {
        let tree = CategoryTree::load("a\tROOT\tApparel\na1\ta\n").unwrap();
        assert_eq!(tree.node_name(0, 0), "Apparel");
        assert_eq!(tree.node_name(1, 0), "a1");
        let back = CategoryTree::load(&tree.to_taxonomy_string()).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn leaf_paths() {
        let single = CategoryTree::load("a\tROOT\n").unwrap();
        assert_eq!(single.leaf_to_path("a").unwrap(), LabelPath(vec![0]));
        let tree = CategoryTree::load("a\tROOT\na1\ta\n").unwrap();
        assert_eq!(tree.leaf_to_path("a1").unwrap().ids(&tree), ["a", "a1"]);
        assert!(matches!(
            tree.leaf_to_path("a"),
            Err(Error::LayerMismatch { .. })
        ));
        assert!(matches!(tree.leaf_to_path("q"), Err(Error::UnknownNode(_))));
    }

    #[test]
    fn class_indices() {
        let tree = CategoryTree::load("a\tROOT\nb\tROOT\nc\tROOT\n").unwrap();
        assert_eq!(tree.class_index(0, "b").unwrap(), 1);
        assert_eq!(tree.class_index(0, "a").unwrap(), 0);
        let two = CategoryTree::load("a\tROOT\na1\ta\n").unwrap();
        assert!(two.class_index(0, "a1").is_err());
    }

    #[test]
    fn child_relation() {
        let tree = CategoryTree::load("a\tROOT\nb\tROOT\na1\ta\nb1\tb\n").unwrap();
        assert!(tree.is_child("a", "a1").unwrap());
        assert!(!tree.is_child("a", "b1").unwrap());
        assert!(!tree.is_child("a1", "a").unwrap());
        assert!(tree.is_child("a", "zz").is_err());
    }

    #[test]
    fn random_trees_are_valid() {
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let tree = CategoryTree::random(&mut rng, 3, 5);
            assert_eq!(tree.depth(), 3);
            assert!(tree.class_counts().iter().all(|&c| (1..=5).contains(&c)));
            for path in tree.all_paths() {
                assert!(path.is_consistent(&tree));
            }
        }
    }
}
