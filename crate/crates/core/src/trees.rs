//! Stochastic trees and woods.
//!
//! A stochastic tree (S-tree) is a rooted tree on the nodes `1..=N` where every
//! node `j >= 2` points to a parent with a smaller index, and every node carries
//! one of four labels. A stochastic wood (S-wood) is an ordered tuple of trees.
//! Each tree stands for one term of a Taylor expansion of the mild solution;
//! the label decides which integral operator the node contributes:
//!
//! | label | meaning                                              |
//! |-------|------------------------------------------------------|
//! | `0`   | `(e^{AΔt} − I) U_{t0}`                                |
//! | `1`   | time integral of a derivative of `F` frozen at `U_{t0}` |
//! | `2`   | stochastic convolution increment                     |
//! | `1*`  | time integral still depending on the solution path   |
//!
//! Nodes labeled `1*` are *active*: they can be expanded further with
//! [`SWood::expand`]. All node and tree addresses are 1-based.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("a tree needs at least one node")]
    EmptyTree,
    #[error("a wood needs at least one tree")]
    EmptyWood,
    #[error("{parents} parent entries given for {labels} labels (expected labels - 1)")]
    LengthMismatch { parents: usize, labels: usize },
    #[error("node {node} has parent {parent}, parents must have a smaller index")]
    ParentNotSmaller { node: usize, parent: usize },
    #[error("node {0} is not an active node")]
    NotActive(NodeAddr),
    #[error("step {step}: {addr} is not active")]
    DerivationFailed { step: usize, addr: NodeAddr },
    #[error("the wood has no active tree")]
    NoActiveTree,
    #[error("cannot parse node address list: {0}")]
    Parse(String),
}

/// Node type of an S-tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeLabel {
    Zero,
    One,
    Two,
    OneStar,
}

impl NodeLabel {
    pub fn is_active(self) -> bool {
        self == NodeLabel::OneStar
    }

    pub fn symbol(self) -> &'static str {
        match self {
            NodeLabel::Zero => "0",
            NodeLabel::One => "1",
            NodeLabel::Two => "2",
            NodeLabel::OneStar => "1*",
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for NodeLabel {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "0" => Ok(NodeLabel::Zero),
            "1" => Ok(NodeLabel::One),
            "2" => Ok(NodeLabel::Two),
            "1*" => Ok(NodeLabel::OneStar),
            other => Err(TreeError::Parse(format!("unknown node label `{other}`"))),
        }
    }
}

/// Address `(i, j)` of node `j` in tree `i` of a wood, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeAddr {
    pub tree: usize,
    pub node: usize,
}

impl NodeAddr {
    pub const fn new(tree: usize, node: usize) -> Self {
        NodeAddr { tree, node }
    }
}

impl fmt::Display for NodeAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.tree, self.node)
    }
}

impl From<(usize, usize)> for NodeAddr {
    fn from((tree, node): (usize, usize)) -> Self {
        NodeAddr { tree, node }
    }
}

/// A labeled rooted tree. `parents[k]` is the parent of node `k + 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct STree {
    parents: Vec<usize>,
    labels: Vec<NodeLabel>,
}

impl STree {
    /// Builds a tree from the parent map of nodes `2..=N` and the labels of
    /// nodes `1..=N`.
    pub fn new(parents: Vec<usize>, labels: Vec<NodeLabel>) -> Result<Self, TreeError> {
        if labels.is_empty() {
            return Err(TreeError::EmptyTree);
        }
        if parents.len() + 1 != labels.len() {
            return Err(TreeError::LengthMismatch {
                parents: parents.len(),
                labels: labels.len(),
            });
        }
        for (k, &parent) in parents.iter().enumerate() {
            let node = k + 2;
            if parent == 0 || parent >= node {
                return Err(TreeError::ParentNotSmaller { node, parent });
            }
        }
        Ok(STree { parents, labels })
    }

    pub fn leaf(label: NodeLabel) -> Self {
        STree {
            parents: Vec::new(),
            labels: vec![label],
        }
    }

    /// Number of nodes `l(t)`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn label(&self, node: usize) -> NodeLabel {
        self.labels[node - 1]
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    /// Parent map of nodes `2..=N`.
    pub fn parents(&self) -> &[usize] {
        &self.parents
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        if node >= 2 {
            Some(self.parents[node - 2])
        } else {
            None
        }
    }

    /// Children of `node` in increasing index order.
    pub fn children(&self, node: usize) -> Vec<usize> {
        self.parents
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p == node)
            .map(|(k, _)| k + 2)
            .collect()
    }

    pub fn root_label(&self) -> NodeLabel {
        self.labels[0]
    }

    pub fn is_active(&self) -> bool {
        self.labels.iter().any(|l| l.is_active())
    }

    pub fn count(&self, label: NodeLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn order(&self) -> SymbolicOrder {
        let gamma = self.count(NodeLabel::Zero) as u32;
        let delta = self.count(NodeLabel::Two) as u32;
        SymbolicOrder {
            constant: self.len() as i64 - i64::from(gamma) - i64::from(delta),
            gamma,
            delta,
        }
    }

    /// Nodes reachable from `node` (including itself), sorted.
    pub fn descendants(&self, node: usize) -> Vec<usize> {
        // Parents precede children, so one forward sweep suffices.
        let mut inside = vec![false; self.len() + 1];
        inside[node] = true;
        let mut out = vec![node];
        for k in (node + 1)..=self.len() {
            if inside[self.parents[k - 2]] {
                inside[k] = true;
                out.push(k);
            }
        }
        out
    }

    /// The subtrees hanging off the root, one per child of node 1, with their
    /// nodes renumbered in increasing original order.
    pub fn subtrees(&self) -> Vec<STree> {
        self.children(1)
            .into_iter()
            .map(|child| self.extract(child))
            .collect()
    }

    fn extract(&self, top: usize) -> STree {
        let nodes = self.descendants(top);
        let mut new_index = vec![0usize; self.len() + 1];
        for (k, &n) in nodes.iter().enumerate() {
            new_index[n] = k + 1;
        }
        let labels = nodes.iter().map(|&n| self.label(n)).collect();
        let parents = nodes[1..]
            .iter()
            .map(|&n| new_index[self.parents[n - 2]])
            .collect();
        STree { parents, labels }
    }

    /// Grafts `subtrees` under a fresh root. Nodes are numbered by placing each
    /// subtree's block after the previous one.
    pub fn graft(root: NodeLabel, subtrees: &[STree]) -> STree {
        let mut labels = vec![root];
        let mut parents = Vec::new();
        for sub in subtrees {
            let offset = labels.len();
            labels.extend_from_slice(&sub.labels);
            parents.push(1);
            parents.extend(sub.parents.iter().map(|p| p + offset));
        }
        STree { parents, labels }
    }

    /// Canonical form under renumbering that keeps every subtree contiguous.
    /// Two trees with the same canonical form have the same parent/label
    /// structure up to such renumbering.
    pub fn canonical(&self) -> STree {
        STree::graft(
            self.root_label(),
            &self.subtrees().iter().map(STree::canonical).collect::<Vec<_>>(),
        )
    }

    /// Maximum number of nodes labeled `1` or `1*` on a root-to-leaf path,
    /// i.e. the nesting depth of time integrals in the tree's process.
    pub fn integral_depth(&self) -> usize {
        let mut depth = vec![0usize; self.len() + 1];
        let mut best = 0;
        for node in 1..=self.len() {
            let above = self.parent(node).map_or(0, |p| depth[p]);
            let own = matches!(self.label(node), NodeLabel::One | NodeLabel::OneStar) as usize;
            depth[node] = above + own;
            best = best.max(depth[node]);
        }
        best
    }
}

/// `constant + gamma·γ + delta·δ`, the order of a tree as a function of the
/// smoothness parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicOrder {
    pub constant: i64,
    pub gamma: u32,
    pub delta: u32,
}

impl SymbolicOrder {
    pub const fn new(constant: i64, gamma: u32, delta: u32) -> Self {
        SymbolicOrder {
            constant,
            gamma,
            delta,
        }
    }

    pub fn eval(&self, gamma: f64, delta: f64) -> f64 {
        self.constant as f64 + f64::from(self.gamma) * gamma + f64::from(self.delta) * delta
    }

    /// True if `self <= other` for every `γ ∈ [0,1]`, `δ ∈ [0,1/2]`.
    pub fn dominates(&self, other: &SymbolicOrder) -> bool {
        // Linear functions: comparing at the corners of the box is enough.
        [(0.0, 0.0), (1.0, 0.0), (0.0, 0.5), (1.0, 0.5)]
            .iter()
            .all(|&(g, d)| self.eval(g, d) <= other.eval(g, d))
    }
}

impl fmt::Display for SymbolicOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.constant != 0 || (self.gamma == 0 && self.delta == 0) {
            parts.push(self.constant.to_string());
        }
        match self.gamma {
            0 => {}
            1 => parts.push("γ".to_string()),
            g => parts.push(format!("{g}γ")),
        }
        match self.delta {
            0 => {}
            1 => parts.push("δ".to_string()),
            d => parts.push(format!("{d}δ")),
        }
        f.write_str(&parts.join(" + "))
    }
}

/// An ordered, nonempty tuple of stochastic trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SWood {
    trees: Vec<STree>,
}

impl SWood {
    pub fn new(trees: Vec<STree>) -> Result<Self, TreeError> {
        if trees.is_empty() {
            return Err(TreeError::EmptyWood);
        }
        Ok(SWood { trees })
    }

    /// `w0 = ([0], [1*], [2])`, the starting point of every expansion.
    pub fn initial() -> Self {
        SWood {
            trees: vec![
                STree::leaf(NodeLabel::Zero),
                STree::leaf(NodeLabel::OneStar),
                STree::leaf(NodeLabel::Two),
            ],
        }
    }

    pub fn trees(&self) -> &[STree] {
        &self.trees
    }

    /// Tree `i` (1-based).
    pub fn tree(&self, i: usize) -> &STree {
        &self.trees[i - 1]
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All active nodes in lexicographic `(tree, node)` order.
    pub fn active_nodes(&self) -> Vec<NodeAddr> {
        self.trees
            .iter()
            .enumerate()
            .flat_map(|(i, t)| {
                t.labels
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.is_active())
                    .map(move |(j, _)| NodeAddr::new(i + 1, j + 1))
            })
            .collect()
    }

    pub fn is_active_node(&self, addr: NodeAddr) -> bool {
        addr.tree >= 1
            && addr.tree <= self.len()
            && addr.node >= 1
            && addr.node <= self.tree(addr.tree).len()
            && self.tree(addr.tree).label(addr.node).is_active()
    }

    /// The expansion operator `E_(i,j)`: relabels the active node to `1` and
    /// appends three copies of the original tree, each with one extra leaf
    /// under node `j` labeled `0`, `1*` and `2` respectively.
    pub fn expand(&self, addr: NodeAddr) -> Result<SWood, TreeError> {
        if !self.is_active_node(addr) {
            return Err(TreeError::NotActive(addr));
        }
        let original = self.tree(addr.tree);
        let mut trees = self.trees.clone();
        trees[addr.tree - 1].labels[addr.node - 1] = NodeLabel::One;
        for label in [NodeLabel::Zero, NodeLabel::OneStar, NodeLabel::Two] {
            let mut grown = original.clone();
            grown.parents.push(addr.node);
            grown.labels.push(label);
            trees.push(grown);
        }
        Ok(SWood { trees })
    }

    /// Replays a derivation path from `w0`.
    pub fn derive(path: &DerivationPath) -> Result<SWood, TreeError> {
        let mut wood = SWood::initial();
        for (k, &addr) in path.steps().iter().enumerate() {
            wood = wood
                .expand(addr)
                .map_err(|_| TreeError::DerivationFailed { step: k + 1, addr })?;
        }
        Ok(wood)
    }

    /// Symbolic orders of the active trees, with their 1-based indices.
    pub fn active_orders(&self) -> Vec<(usize, SymbolicOrder)> {
        self.trees
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_active())
            .map(|(i, t)| (i + 1, t.order()))
            .collect()
    }

    /// Numeric wood order at `(γ, δ)` and the smallest tree index attaining it.
    pub fn order(&self, gamma: f64, delta: f64) -> Result<(f64, usize), TreeError> {
        let mut best: Option<(f64, usize)> = None;
        for (i, ord) in self.active_orders() {
            let value = ord.eval(gamma, delta);
            if best.is_none_or(|(b, _)| value < b) {
                best = Some((value, i));
            }
        }
        best.ok_or(TreeError::NoActiveTree)
    }

    /// Active tree orders that are not dominated by another one on the whole
    /// parameter box; their pointwise minimum is the wood order.
    pub fn order_envelope(&self) -> Vec<SymbolicOrder> {
        let mut orders: Vec<SymbolicOrder> =
            self.active_orders().into_iter().map(|(_, o)| o).collect();
        orders.sort();
        orders.dedup();
        orders
            .iter()
            .filter(|o| !orders.iter().any(|p| p != *o && p.dominates(o)))
            .copied()
            .collect()
    }

    pub fn render(&self, format: RenderFormat) -> String {
        match format {
            RenderFormat::Dot => self.to_dot(),
            RenderFormat::Ascii => self.to_ascii(),
        }
    }

    fn to_dot(&self) -> String {
        let mut out = String::new();
        out.push_str("digraph wood {\n");
        out.push_str("  rankdir=BT;\n");
        out.push_str("  node [fontsize=10];\n");
        for (i, tree) in self.trees.iter().enumerate() {
            let i = i + 1;
            let _ = writeln!(out, "  subgraph cluster_t{i} {{");
            let _ = writeln!(out, "    label=\"t{i}\";");
            for (j, label) in tree.labels.iter().enumerate() {
                let j = j + 1;
                let _ = writeln!(
                    out,
                    "    t{i}_n{j} [shape={}, label=\"{j}:{}\"];",
                    dot_shape(*label),
                    label.symbol()
                );
            }
            for (k, &parent) in tree.parents.iter().enumerate() {
                let _ = writeln!(out, "    t{i}_n{} -> t{i}_n{parent};", k + 2);
            }
            out.push_str("  }\n");
        }
        out.push_str("}\n");
        out
    }

    fn to_ascii(&self) -> String {
        let mut out = String::new();
        for (i, tree) in self.trees.iter().enumerate() {
            let _ = writeln!(out, "t{}  ord = {}", i + 1, tree.order());
            ascii_node(tree, 1, "", true, &mut out);
        }
        out
    }
}

impl fmt::Display for SWood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

fn dot_shape(label: NodeLabel) -> &'static str {
    match label {
        NodeLabel::Zero => "diamond",
        NodeLabel::One => "circle",
        NodeLabel::Two => "doublecircle",
        NodeLabel::OneStar => "box",
    }
}

fn ascii_glyph(label: NodeLabel) -> String {
    match label {
        NodeLabel::Zero => "<0>".into(),
        NodeLabel::One => "(1)".into(),
        NodeLabel::Two => "((2))".into(),
        NodeLabel::OneStar => "[1*]".into(),
    }
}

fn ascii_node(tree: &STree, node: usize, prefix: &str, last: bool, out: &mut String) {
    let branch = if last { "└── " } else { "├── " };
    let _ = writeln!(out, "{prefix}{branch}{node} {}", ascii_glyph(tree.label(node)));
    let children = tree.children(node);
    let next_prefix = format!("{prefix}{}", if last { "    " } else { "│   " });
    for (k, &child) in children.iter().enumerate() {
        ascii_node(tree, child, &next_prefix, k + 1 == children.len(), out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderFormat {
    Dot,
    Ascii,
}

impl FromStr for RenderFormat {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(RenderFormat::Dot),
            "ascii" => Ok(RenderFormat::Ascii),
            other => Err(TreeError::Parse(format!("unknown render format `{other}`"))),
        }
    }
}

/// A sequence of expansion steps applied to `w0`; a wood obtained by
/// replaying it is certified to lie in the constructible set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DerivationPath {
    steps: Vec<NodeAddr>,
}

impl DerivationPath {
    pub fn new(steps: Vec<NodeAddr>) -> Self {
        DerivationPath { steps }
    }

    pub fn steps(&self) -> &[NodeAddr] {
        &self.steps
    }
}

impl From<&[(usize, usize)]> for DerivationPath {
    fn from(steps: &[(usize, usize)]) -> Self {
        DerivationPath::new(steps.iter().map(|&s| s.into()).collect())
    }
}

/// Parses `"(2,1) (4,1)"`, `"(2,1),(4,1)"` and similar spellings.
impl FromStr for DerivationPath {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut steps = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            rest = rest.trim_start_matches(|c: char| c.is_whitespace() || c == ',');
            if rest.is_empty() {
                break;
            }
            let body = rest
                .strip_prefix('(')
                .ok_or_else(|| TreeError::Parse(format!("expected `(` at `{rest}`")))?;
            let close = body
                .find(')')
                .ok_or_else(|| TreeError::Parse(format!("missing `)` in `{rest}`")))?;
            let mut nums = body[..close].split(',').map(|p| p.trim().parse::<usize>());
            let (tree, node) = match (nums.next(), nums.next(), nums.next()) {
                (Some(Ok(i)), Some(Ok(j)), None) => (i, j),
                _ => {
                    return Err(TreeError::Parse(format!(
                        "bad address `({})`",
                        &body[..close]
                    )))
                }
            };
            steps.push(NodeAddr::new(tree, node));
            rest = &body[close + 1..];
        }
        Ok(DerivationPath { steps })
    }
}

/// Derivation paths of the woods `w0 … w5` used throughout the examples.
pub mod named {
    use super::*;

    pub const W1: &[(usize, usize)] = &[(2, 1)];
    pub const W2: &[(usize, usize)] = &[(2, 1), (4, 1)];
    pub const W3: &[(usize, usize)] = &[(2, 1), (4, 1), (6, 1)];
    pub const W4: &[(usize, usize)] = &[(2, 1), (4, 1), (6, 1), (7, 1)];
    pub const W5: &[(usize, usize)] = &[(2, 1), (4, 1), (6, 1), (7, 1), (9, 1), (10, 1), (12, 1)];

    /// `w_k` for `k` in `0..=5`.
    pub fn wood(k: usize) -> SWood {
        let path: &[(usize, usize)] = match k {
            0 => &[],
            1 => W1,
            2 => W2,
            3 => W3,
            4 => W4,
            5 => W5,
            _ => panic!("only w0..w5 are named"),
        };
        SWood::derive(&DerivationPath::from(path)).expect("named paths are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::NodeLabel::*;
    use super::*;

    fn fig1_left() -> STree {
        STree::new(vec![1, 2, 1], vec![One, OneStar, Two, Zero]).unwrap()
    }

    fn fig1_right() -> STree {
        STree::new(
            vec![1, 1, 1, 1, 4, 4],
            vec![Zero, Zero, Two, One, OneStar, One, Zero],
        )
        .unwrap()
    }

    #[test]
    fn make_tree_validates() {
        assert_eq!(STree::new(vec![], vec![OneStar]).unwrap().len(), 1);
        assert_eq!(fig1_left().len(), 4);
        assert_eq!(fig1_left().parent(4), Some(1));
        assert_eq!(
            STree::new(vec![2], vec![Zero, Zero]),
            Err(TreeError::ParentNotSmaller { node: 2, parent: 2 })
        );
        assert_eq!(
            STree::new(vec![1, 1], vec![Zero, Zero]),
            Err(TreeError::LengthMismatch {
                parents: 2,
                labels: 2
            })
        );
        assert_eq!(STree::new(vec![], vec![]), Err(TreeError::EmptyTree));
        assert!(matches!(
            STree::new(vec![0], vec![One, Zero]),
            Err(TreeError::ParentNotSmaller { .. })
        ));
    }

    #[test]
    fn orders_of_figure_one_trees() {
        assert_eq!(fig1_left().order(), SymbolicOrder::new(2, 1, 1));
        assert_eq!(fig1_right().order(), SymbolicOrder::new(3, 3, 1));
        assert_eq!(STree::leaf(OneStar).order(), SymbolicOrder::new(1, 0, 0));
        assert_eq!(fig1_right().order().to_string(), "3 + 3γ + δ");
    }

    #[test]
    fn subtrees_of_figure_one_right() {
        let subs = fig1_right().subtrees();
        // Children of the root are nodes 2, 3, 4, 5; node 4 carries 6 and 7.
        assert_eq!(subs.len(), 4);
        assert_eq!(subs[0], STree::leaf(Zero));
        assert_eq!(subs[1], STree::leaf(Two));
        assert_eq!(
            subs[2],
            STree::new(vec![1, 1], vec![One, One, Zero]).unwrap()
        );
        assert_eq!(subs[3], STree::leaf(OneStar));
    }

    #[test]
    fn subtrees_edge_cases() {
        assert!(STree::leaf(OneStar).subtrees().is_empty());
        let t = STree::new(vec![1], vec![One, Two]).unwrap();
        assert_eq!(t.subtrees(), vec![STree::leaf(Two)]);
    }

    #[test]
    fn graft_inverts_subtrees() {
        let t = fig1_right();
        let rebuilt = STree::graft(t.root_label(), &t.subtrees());
        assert_eq!(rebuilt.canonical(), t.canonical());
        // node 5 hangs off the root after node 4's children in the rebuilt tree
        assert_ne!(rebuilt, t);
        assert_eq!(rebuilt.subtrees(), t.subtrees());
    }

    #[test]
    fn expand_rejects_inactive() {
        let w0 = SWood::initial();
        assert_eq!(
            w0.expand(NodeAddr::new(1, 1)),
            Err(TreeError::NotActive(NodeAddr::new(1, 1)))
        );
        assert!(w0.expand(NodeAddr::new(9, 1)).is_err());
        assert!(w0.expand(NodeAddr::new(2, 2)).is_err());
    }

    #[test]
    fn w1_structure() {
        let w1 = named::wood(1);
        assert_eq!(w1.len(), 6);
        assert_eq!(w1.tree(2), &STree::leaf(One));
        assert_eq!(
            w1.tree(4),
            &STree::new(vec![1], vec![OneStar, Zero]).unwrap()
        );
        assert_eq!(
            w1.tree(5),
            &STree::new(vec![1], vec![OneStar, OneStar]).unwrap()
        );
        assert_eq!(
            w1.tree(6),
            &STree::new(vec![1], vec![OneStar, Two]).unwrap()
        );
    }

    #[test]
    fn wood_order_ties_pick_smallest_index() {
        // w1 at γ = δ: trees 4 and 6 both have order 1 + γ = 1 + δ.
        let (value, witness) = named::wood(1).order(0.25, 0.25).unwrap();
        assert_eq!(value, 1.25);
        assert_eq!(witness, 4);
    }

    #[test]
    fn inactive_wood_has_no_order() {
        let w = SWood::new(vec![STree::leaf(Zero), STree::leaf(Two)]).unwrap();
        assert_eq!(w.order(0.3, 0.3), Err(TreeError::NoActiveTree));
        assert!(w.active_nodes().is_empty());
    }

    #[test]
    fn parse_paths() {
        let p: DerivationPath = "(2,1) (4,1)".parse().unwrap();
        assert_eq!(p.steps(), &[NodeAddr::new(2, 1), NodeAddr::new(4, 1)]);
        let q: DerivationPath = " (2, 1),(4,1) ".parse().unwrap();
        assert_eq!(p, q);
        assert!("".parse::<DerivationPath>().unwrap().steps().is_empty());
        assert!("(2,1".parse::<DerivationPath>().is_err());
        assert!("(a,1)".parse::<DerivationPath>().is_err());
        assert!("2,1".parse::<DerivationPath>().is_err());
    }

    #[test]
    fn derive_reports_failing_step() {
        let bad: DerivationPath = "(2,1) (1,1)".parse().unwrap();
        assert_eq!(
            SWood::derive(&bad),
            Err(TreeError::DerivationFailed {
                step: 2,
                addr: NodeAddr::new(1, 1)
            })
        );
    }

    #[test]
    fn ascii_render_of_w0() {
        let text = SWood::initial().render(RenderFormat::Ascii);
        assert_eq!(
            text,
            "t1  ord = γ\n└── 1 <0>\nt2  ord = 1\n└── 1 [1*]\nt3  ord = δ\n└── 1 ((2))\n"
        );
    }

    #[test]
    fn integral_depth_counts_time_integrals() {
        assert_eq!(STree::leaf(Zero).integral_depth(), 0);
        assert_eq!(STree::leaf(OneStar).integral_depth(), 1);
        assert_eq!(fig1_left().integral_depth(), 2);
        assert_eq!(fig1_right().integral_depth(), 2);
    }
}
