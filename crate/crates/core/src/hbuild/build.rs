//! Tree assembly from sorted leaves and branch triplets, in one pass with a
//! stack holding the rightmost path.

use std::sync::Arc;

use crate::alphabet::Alphabet;
use crate::error::{EraError, Result};
use crate::memory::{charge_opt, Charge, MemoryTracker};
use crate::tree::{BranchRecord, EdgeLabel, Node, SubTree};

const NIL: u32 = u32::MAX;
const NO_SUFFIX: u64 = u64::MAX;

#[derive(Debug, Clone, Copy)]
struct ArenaNode {
    start: u64,
    end: u64,
    suffix: u64,
    first_child: u32,
    next_sibling: u32,
}

/// A sub-tree in first-child / next-sibling form. Node 0 is the root.
#[derive(Debug)]
pub struct TreeArena {
    nodes: Vec<ArenaNode>,
    prefix: Vec<u8>,
    leaves: usize,
    _charge: Charge,
}

/// Bytes per arena node.
pub const ARENA_NODE_SIZE: usize = std::mem::size_of::<ArenaNode>();

impl TreeArena {
    pub fn prefix(&self) -> &[u8] {
        &self.prefix
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves
    }

    /// Internal nodes, root included.
    pub fn internal_count(&self) -> usize {
        self.nodes.len() - self.leaves
    }

    fn child_count(&self, x: u32) -> u32 {
        let mut c = self.nodes[x as usize].first_child;
        let mut k = 0;
        while c != NIL {
            k += 1;
            c = self.nodes[c as usize].next_sibling;
        }
        k
    }

    /// Visits the nodes in depth-first pre-order, children in symbol order.
    pub fn for_each_preorder<F>(&self, mut f: F) -> Result<()>
    where
        F: FnMut(&Node) -> Result<()>,
    {
        let mut stack = vec![0u32];
        while let Some(x) = stack.pop() {
            let n = &self.nodes[x as usize];
            let node = if x == 0 {
                Node::root(self.child_count(0))
            } else if n.suffix != NO_SUFFIX {
                Node::leaf(EdgeLabel::new(n.start, n.end), n.suffix)
            } else {
                Node::internal(EdgeLabel::new(n.start, n.end), self.child_count(x))
            };
            f(&node)?;
            if x != 0 && n.next_sibling != NIL {
                stack.push(n.next_sibling);
            }
            if n.first_child != NIL {
                stack.push(n.first_child);
            }
        }
        Ok(())
    }

    pub fn to_subtree(&self) -> SubTree {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        self.for_each_preorder(|n| {
            nodes.push(*n);
            Ok(())
        })
        .expect("infallible visitor");
        SubTree { prefix: self.prefix.clone(), nodes }
    }
}

fn invalid(index: usize, reason: impl Into<String>) -> EraError {
    EraError::InvalidBranch { index, reason: reason.into() }
}

/// Assembles the sub-tree for `prefix` from `l` (sorted leaves) and `b`
/// (`b[i - 1]` separates `l[i - 1]` and `l[i]`) over a text of `text_len`
/// symbols, the sentinel included.
pub fn build_arena(
    l: &[u64],
    b: &[BranchRecord],
    text_len: u64,
    prefix: &[u8],
    alphabet: &Alphabet,
    tracker: Option<&Arc<MemoryTracker>>,
) -> Result<TreeArena> {
    let m = l.len();
    if m == 0 {
        return Err(EraError::Precondition("no leaves".into()));
    }
    if b.len() + 1 != m {
        return Err(EraError::Precondition(format!("{m} leaves need {} branch records, got {}", m - 1, b.len())));
    }
    if m.saturating_mul(2) >= NIL as usize {
        return Err(EraError::Precondition(format!("{m} leaves exceed the node index width")));
    }
    let p_len = prefix.len() as u64;
    let leaf_start = |i: usize, off: u64| -> Result<u64> {
        let s = l[i].checked_add(off).filter(|&s| s < text_len);
        s.ok_or_else(|| invalid(i, format!("leaf {} at depth {off} runs past the text end", l[i])))
    };

    let mut nodes: Vec<ArenaNode> = Vec::with_capacity(2 * m);
    let charge = charge_opt(tracker, (nodes.capacity() * ARENA_NODE_SIZE) as u64);
    nodes.push(ArenaNode { start: 0, end: 0, suffix: NO_SUFFIX, first_child: 1, next_sibling: NIL });
    nodes.push(ArenaNode {
        start: leaf_start(0, 0)?,
        end: text_len,
        suffix: l[0],
        first_child: NIL,
        next_sibling: NIL,
    });
    let mut stack: Vec<u32> = vec![1];
    let mut depth = text_len - l[0];

    for i in 1..m {
        let br = b[i - 1];
        let off = br.offset;
        if off < p_len {
            return Err(invalid(i, format!("offset {off} is shorter than the prefix ({p_len})")));
        }
        if alphabet.rank(br.c1)? >= alphabet.rank(br.c2)? {
            return Err(invalid(i, format!("symbols {br} are not ascending")));
        }
        if off >= depth {
            return Err(invalid(i, format!("offset {off} is not above the previous leaf depth {depth}")));
        }
        let start = leaf_start(i, off)?;

        let mut popped;
        loop {
            popped = stack.pop().expect("depth > off implies a non-empty path");
            let n = &nodes[popped as usize];
            depth -= n.end - n.start;
            if depth <= off {
                break;
            }
        }
        let leaf = nodes.len() as u32;
        if depth < off {
            // split the popped edge after (off - depth) symbols
            let k = off - depth;
            let x = nodes[popped as usize];
            let y = nodes.len() as u32 + 1;
            nodes.push(ArenaNode { start, end: text_len, suffix: l[i], first_child: NIL, next_sibling: NIL });
            nodes.push(ArenaNode {
                start: x.start + k,
                end: x.end,
                suffix: x.suffix,
                first_child: x.first_child,
                next_sibling: leaf,
            });
            let xm = &mut nodes[popped as usize];
            xm.end = x.start + k;
            xm.suffix = NO_SUFFIX;
            xm.first_child = y;
            stack.push(popped);
        } else {
            nodes.push(ArenaNode { start, end: text_len, suffix: l[i], first_child: NIL, next_sibling: NIL });
            nodes[popped as usize].next_sibling = leaf;
        }
        stack.push(leaf);
        depth = text_len - l[i];
    }
    Ok(TreeArena { nodes, prefix: prefix.to_vec(), leaves: m, _charge: charge })
}

/// [`build_arena`] returned as a pre-order [`SubTree`].
pub fn build_subtree(
    l: &[u64],
    b: &[BranchRecord],
    text_len: u64,
    prefix: &[u8],
    alphabet: &Alphabet,
) -> Result<SubTree> {
    Ok(build_arena(l, b, text_len, prefix, alphabet, None)?.to_subtree())
}
