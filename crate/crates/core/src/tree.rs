//! Sub-tree representation shared by the builder, the store and the oracle.
//!
//! A [`SubTree`] is kept as a flat list of nodes in depth-first pre-order.
//! Each node records the label of the edge leading into it as a half-open
//! `(start, end)` range of text positions and the number of children; leaves
//! also carry the offset of the suffix they spell. The root has no incoming
//! edge. Because children are listed in ascending symbol order, leaves come
//! out in lexicographic suffix order.

use std::cmp::Ordering;
use std::fmt;

use crate::alphabet::Alphabet;
use crate::error::{EraError, Result};
use crate::textio::Text;

/// Half-open range `[start, end)` of text positions labelling an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeLabel {
    pub start: u64,
    pub end: u64,
}

impl EdgeLabel {
    pub fn new(start: u64, end: u64) -> Self {
        debug_assert!(start < end, "empty edge label {start}..{end}");
        EdgeLabel { start, end }
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Branching information between two lexicographically adjacent leaves:
/// after `offset` common symbols the left leaf continues with `c1` and the
/// right one with `c2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BranchRecord {
    pub c1: u8,
    pub c2: u8,
    pub offset: u64,
}

impl BranchRecord {
    pub fn new(c1: u8, c2: u8, offset: u64) -> Self {
        BranchRecord { c1, c2, offset }
    }
}

impl fmt::Display for BranchRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.c1 as char, self.c2 as char, self.offset)
    }
}

const NO_SUFFIX: u64 = u64::MAX;

/// One node of a pre-order tree listing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Node {
    pub start: u64,
    pub end: u64,
    suffix: u64,
    pub child_count: u32,
}

impl Node {
    pub fn root(child_count: u32) -> Self {
        Node { start: 0, end: 0, suffix: NO_SUFFIX, child_count }
    }

    pub fn internal(label: EdgeLabel, child_count: u32) -> Self {
        Node { start: label.start, end: label.end, suffix: NO_SUFFIX, child_count }
    }

    pub fn leaf(label: EdgeLabel, suffix: u64) -> Self {
        Node { start: label.start, end: label.end, suffix, child_count: 0 }
    }

    /// Incoming edge label; `None` for the root.
    pub fn label(&self) -> Option<EdgeLabel> {
        (self.end > self.start).then_some(EdgeLabel { start: self.start, end: self.end })
    }

    pub fn label_len(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_leaf(&self) -> bool {
        self.child_count == 0
    }

    pub fn suffix_offset(&self) -> Option<u64> {
        (self.child_count == 0 && self.suffix != NO_SUFFIX).then_some(self.suffix)
    }
}

/// The suffix sub-tree indexing all suffixes that start with `prefix`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubTree {
    pub prefix: Vec<u8>,
    pub nodes: Vec<Node>,
}

/// Per-node context computed by a pre-order walk.
#[derive(Debug, Clone, Copy)]
pub struct NodeInfo {
    pub parent: Option<usize>,
    /// Path-label length above the node's incoming edge.
    pub depth_before: u64,
}

impl SubTree {
    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaf_count()
    }

    /// Suffix offsets in DFS (lexicographic) order.
    pub fn leaves(&self) -> impl Iterator<Item = u64> + '_ {
        self.nodes.iter().filter_map(|n| n.suffix_offset())
    }

    /// Parent links and depths, checking that child counts describe exactly
    /// one rooted tree over all nodes.
    pub fn walk(&self) -> std::result::Result<Vec<NodeInfo>, String> {
        let Some(root) = self.nodes.first() else {
            return Err("tree has no nodes".into());
        };
        if root.label().is_some() {
            return Err("root carries an edge label".into());
        }
        if root.child_count == 0 {
            return Err("root has no children".into());
        }
        let mut info = Vec::with_capacity(self.nodes.len());
        info.push(NodeInfo { parent: None, depth_before: 0 });
        // (node, remaining children, path-label length below node)
        let mut stack: Vec<(usize, u32, u64)> = vec![(0, root.child_count, 0)];
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            while let Some(&(_, 0, _)) = stack.last() {
                stack.pop();
            }
            let Some(top) = stack.last_mut() else {
                return Err(format!("node {i} lies outside the tree"));
            };
            top.1 -= 1;
            let (parent, depth) = (top.0, top.2);
            if node.label().is_none() {
                return Err(format!("node {i} has an empty edge label"));
            }
            info.push(NodeInfo { parent: Some(parent), depth_before: depth });
            if node.child_count > 0 {
                stack.push((i, node.child_count, depth + node.label_len()));
            } else if node.suffix_offset().is_none() {
                return Err(format!("leaf {i} has no suffix offset"));
            }
        }
        if stack.iter().any(|&(_, left, _)| left > 0) {
            return Err("child counts exceed the number of nodes".into());
        }
        Ok(info)
    }

    /// Recovers the leaf array `L` and branch array `B` (`B[1..]`) of this
    /// tree. `c1`/`c2` are read from `text`.
    pub fn leaf_branches(&self, text: &Text) -> Result<(Vec<u64>, Vec<BranchRecord>)> {
        let info = self.walk().map_err(EraError::CorruptIndex)?;
        let mut leaves = Vec::new();
        let mut branches = Vec::new();
        let mut lca_depth: Option<u64> = None;
        let mut after_leaf = false;
        for (i, node) in self.nodes.iter().enumerate().skip(1) {
            if after_leaf {
                // first node visited after a leaf hangs off the lowest common
                // ancestor of that leaf and the next one
                lca_depth = Some(info[i].depth_before);
                after_leaf = false;
            }
            if let Some(suffix) = node.suffix_offset() {
                if let (Some(&prev), Some(off)) = (leaves.last(), lca_depth.take()) {
                    let c1 = text.symbol_at(prev + off)?;
                    let c2 = text.symbol_at(suffix + off)?;
                    branches.push(BranchRecord::new(c1, c2, off));
                }
                leaves.push(suffix);
                after_leaf = true;
            }
        }
        Ok((leaves, branches))
    }
}

/// Category of a [`Violation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Malformed,
    LabelOutOfRange,
    LeafLabelMismatch,
    DuplicateFirstSymbol,
    UnorderedChildren,
    UnaryNode,
    TooManyInternalNodes,
    PrefixMismatch,
    LeafCount,
    LeafOrder,
    EdgeProperty,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Malformed => "malformed tree",
            ViolationKind::LabelOutOfRange => "label out of range",
            ViolationKind::LeafLabelMismatch => "leaf label mismatch",
            ViolationKind::DuplicateFirstSymbol => "duplicate first symbol",
            ViolationKind::UnorderedChildren => "unordered children",
            ViolationKind::UnaryNode => "unary internal node",
            ViolationKind::TooManyInternalNodes => "more internal nodes than leaves",
            ViolationKind::PrefixMismatch => "leaf does not start with prefix",
            ViolationKind::LeafCount => "leaf count differs from prefix frequency",
            ViolationKind::LeafOrder => "leaves out of lexicographic order",
            ViolationKind::EdgeProperty => "edge property violated",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: Option<usize>,
    pub detail: String,
}

impl Violation {
    pub fn new(kind: ViolationKind, node: Option<usize>, detail: impl Into<String>) -> Self {
        Violation { kind, node, detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node {
            Some(n) => write!(f, "{} at node {}: {}", self.kind, n, self.detail),
            None => write!(f, "{}: {}", self.kind, self.detail),
        }
    }
}

/// Checks that need no access to the text: tree shape, label bounds,
/// branching degree and node counts. `expected_leaves` is the prefix
/// frequency when known.
pub fn validate_structure(tree: &SubTree, text_len: u64, expected_leaves: Option<u64>) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Err(e) = tree.walk() {
        out.push(Violation::new(ViolationKind::Malformed, None, e));
        return out;
    }
    for (i, node) in tree.nodes.iter().enumerate().skip(1) {
        if node.end > text_len || node.start >= node.end {
            out.push(Violation::new(
                ViolationKind::LabelOutOfRange,
                Some(i),
                format!("{}..{} with n + 1 = {}", node.start, node.end, text_len),
            ));
        }
        if let Some(s) = node.suffix_offset() {
            if s >= text_len {
                out.push(Violation::new(
                    ViolationKind::LabelOutOfRange,
                    Some(i),
                    format!("suffix offset {s} with n + 1 = {text_len}"),
                ));
            }
        }
        if node.child_count == 1 {
            out.push(Violation::new(ViolationKind::UnaryNode, Some(i), "one child"));
        }
    }
    let leaves = tree.leaf_count();
    if tree.internal_count() > leaves {
        out.push(Violation::new(
            ViolationKind::TooManyInternalNodes,
            None,
            format!("{} internal, {} leaves", tree.internal_count(), leaves),
        ));
    }
    if let Some(f) = expected_leaves {
        if leaves as u64 != f {
            out.push(Violation::new(ViolationKind::LeafCount, None, format!("{leaves} leaves, expected {f}")));
        }
    }
    out
}

/// Full validation of `tree` against the text it indexes. Returns an empty
/// list iff every structural invariant holds, each leaf spells its suffix,
/// children are ordered by distinct first symbols, leaves are exactly the
/// occurrences of the prefix in lexicographic order, and every edge satisfies
/// the leaf / determinism / branching properties checked by
/// [`crate::oracle::check_edge_properties`].
pub fn validate_subtree(tree: &SubTree, text: &[u8], alphabet: &Alphabet) -> Vec<Violation> {
    let n1 = text.len() as u64;
    let occurrences = text.windows(tree.prefix.len().max(1)).filter(|w| *w == tree.prefix.as_slice()).count() as u64;
    let expected = if tree.prefix.is_empty() { n1 } else { occurrences };
    let mut out = validate_structure(tree, n1, Some(expected));
    if out.iter().any(|v| matches!(v.kind, ViolationKind::Malformed | ViolationKind::LabelOutOfRange)) {
        return out;
    }
    let info = tree.walk().expect("walk checked above");
    let content = |n: &Node| &text[n.start as usize..n.end as usize];

    // children: distinct first symbols in ascending order
    let mut last_child: Vec<Option<usize>> = vec![None; tree.nodes.len()];
    for (i, node) in tree.nodes.iter().enumerate().skip(1) {
        let parent = info[i].parent.expect("non-root");
        if let Some(prev) = last_child[parent] {
            let a = text[tree.nodes[prev].start as usize];
            let b = text[node.start as usize];
            match alphabet.cmp_symbols(a, b) {
                Ordering::Less => {}
                Ordering::Equal => out.push(Violation::new(
                    ViolationKind::DuplicateFirstSymbol,
                    Some(parent),
                    format!("two children start with {:?}", a as char),
                )),
                Ordering::Greater => out.push(Violation::new(
                    ViolationKind::UnorderedChildren,
                    Some(parent),
                    format!("{:?} listed before {:?}", a as char, b as char),
                )),
            }
        }
        last_child[parent] = Some(i);
    }

    // every leaf spells its suffix along the root path
    let mut path: Vec<usize> = Vec::new();
    let mut prev_leaf: Option<u64> = None;
    for (i, node) in tree.nodes.iter().enumerate().skip(1) {
        let parent = info[i].parent.expect("non-root");
        while let Some(&top) = path.last() {
            if top == parent {
                break;
            }
            path.pop();
        }
        path.push(i);
        let Some(suffix) = node.suffix_offset() else {
            continue;
        };
        let s = suffix as usize;
        let depth = info[i].depth_before + node.label_len();
        let mut ok = depth == n1 - suffix;
        if ok {
            for &e in &path {
                let d = info[e].depth_before as usize;
                let edge = &tree.nodes[e];
                if content(edge) != &text[s + d..s + d + edge.label_len() as usize] {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            out.push(Violation::new(
                ViolationKind::LeafLabelMismatch,
                Some(i),
                format!("path does not spell suffix {suffix}"),
            ));
        }
        if !text[s..].starts_with(&tree.prefix) {
            out.push(Violation::new(ViolationKind::PrefixMismatch, Some(i), format!("suffix {suffix}")));
        }
        if let Some(p) = prev_leaf {
            if alphabet.cmp_seq(&text[p as usize..], &text[s..]) != Ordering::Less {
                out.push(Violation::new(
                    ViolationKind::LeafOrder,
                    Some(i),
                    format!("suffix {p} does not precede suffix {suffix}"),
                ));
            }
        }
        prev_leaf = Some(suffix);
    }

    out.extend(crate::oracle::check_edge_properties(text, alphabet, tree));
    out
}
