//! Brute-force reference implementations.
//!
//! Everything here works on the whole text in memory and favours obvious
//! correctness over speed (quadratic behaviour is fine). None of it shares
//! code with the prepare/build path it is used to check.

use std::cmp::Ordering;
use std::ops::Range;

use crate::alphabet::Alphabet;
use crate::tree::{BranchRecord, EdgeLabel, Node, SubTree, Violation, ViolationKind};

/// Text with every symbol replaced by its rank, so plain slice comparison is
/// suffix order.
fn ranked(text: &[u8], alphabet: &Alphabet) -> Vec<u8> {
    text.iter().map(|&s| alphabet.rank(s).expect("text symbol outside alphabet")).collect()
}

fn lcp(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// All positions where `pattern` starts, ascending.
pub fn find_brute(text: &[u8], pattern: &[u8]) -> Vec<u64> {
    if pattern.is_empty() || pattern.len() > text.len() {
        return Vec::new();
    }
    text.windows(pattern.len()).enumerate().filter(|(_, w)| *w == pattern).map(|(i, _)| i as u64).collect()
}

/// Every suffix offset, sorted by suffix.
pub fn suffix_order(text: &[u8], alphabet: &Alphabet) -> Vec<u64> {
    let r = ranked(text, alphabet);
    let mut sa: Vec<usize> = (0..text.len()).collect();
    sa.sort_by(|&a, &b| r[a..].cmp(&r[b..]));
    sa.into_iter().map(|i| i as u64).collect()
}

/// Leaf and branch arrays of the sub-tree for `prefix`: occurrences sorted
/// by full-suffix comparison, and for each adjacent pair the lcp length and
/// the two diverging symbols.
pub fn naive_lb(text: &[u8], alphabet: &Alphabet, prefix: &[u8]) -> (Vec<u64>, Vec<BranchRecord>) {
    let r = ranked(text, alphabet);
    let mut leaves = if prefix.is_empty() { (0..text.len() as u64).collect() } else { find_brute(text, prefix) };
    leaves.sort_by(|&a, &b| r[a as usize..].cmp(&r[b as usize..]));
    let branches = leaves
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0] as usize, w[1] as usize);
            let off = lcp(&r[a..], &r[b..]);
            BranchRecord::new(text[a + off], text[b + off], off as u64)
        })
        .collect();
    (leaves, branches)
}

/// Longest common prefix over all pairs of suffixes starting with `prefix`
/// (the deepest branching point of its sub-tree); `None` with fewer than two
/// occurrences.
pub fn longest_repeat_depth(text: &[u8], alphabet: &Alphabet, prefix: &[u8]) -> Option<u64> {
    let (_, b) = naive_lb(text, alphabet, prefix);
    b.iter().map(|x| x.offset).max()
}

struct ArenaNode {
    start: u64,
    end: u64,
    suffix: Option<u64>,
    children: Vec<usize>,
}

/// Full suffix tree by inserting one suffix at a time from the root.
pub fn naive_tree(text: &[u8], alphabet: &Alphabet) -> SubTree {
    let n1 = text.len() as u64;
    let r = ranked(text, alphabet);
    let mut arena = vec![ArenaNode { start: 0, end: 0, suffix: None, children: Vec::new() }];
    for i in 0..text.len() {
        let mut node = 0usize;
        let mut depth = 0usize;
        loop {
            let want = r[i + depth];
            let pos = arena[node].children.binary_search_by(|&c| r[arena[c].start as usize].cmp(&want));
            match pos {
                Err(at) => {
                    let leaf = arena.len();
                    arena.push(ArenaNode {
                        start: (i + depth) as u64,
                        end: n1,
                        suffix: Some(i as u64),
                        children: Vec::new(),
                    });
                    arena[node].children.insert(at, leaf);
                    break;
                }
                Ok(at) => {
                    let child = arena[node].children[at];
                    let (s, e) = (arena[child].start as usize, arena[child].end as usize);
                    let k = lcp(&r[s..e], &r[i + depth..]);
                    if k == e - s {
                        node = child;
                        depth += k;
                        continue;
                    }
                    // split the edge after k symbols
                    let mid = arena.len();
                    arena.push(ArenaNode { start: s as u64, end: (s + k) as u64, suffix: None, children: vec![child] });
                    arena[child].start = (s + k) as u64;
                    arena[node].children[at] = mid;
                    node = mid;
                    depth += k;
                }
            }
        }
    }
    let mut nodes = Vec::with_capacity(arena.len());
    let mut stack = vec![0usize];
    while let Some(x) = stack.pop() {
        let a = &arena[x];
        nodes.push(match (x, a.suffix) {
            (0, _) => Node::root(a.children.len() as u32),
            (_, Some(s)) => Node::leaf(EdgeLabel::new(a.start, a.end), s),
            (_, None) => Node::internal(EdgeLabel::new(a.start, a.end), a.children.len() as u32),
        });
        stack.extend(a.children.iter().rev());
    }
    SubTree { prefix: Vec::new(), nodes }
}

/// The part of a full tree that indexes suffixes starting with `prefix`,
/// re-rooted so the root has one child whose edge spells the path down to
/// the first branching node (or leaf) at or below `prefix`.
pub fn restrict(full: &SubTree, text: &[u8], prefix: &[u8]) -> Option<SubTree> {
    let info = full.walk().ok()?;
    // find the locus: first node whose path label covers the prefix
    let mut end = vec![0usize; full.nodes.len()];
    // subtree end indices (exclusive) for slicing pre-order ranges
    for i in (0..full.nodes.len()).rev() {
        end[i] = i + 1;
        let mut c = i + 1;
        for _ in 0..full.nodes[i].child_count {
            c = end[c];
        }
        end[i] = c;
    }
    let mut node = 0usize;
    let mut depth = 0usize;
    while depth < prefix.len() {
        let mut c = node + 1;
        let mut found = None;
        for _ in 0..full.nodes[node].child_count {
            if text[full.nodes[c].start as usize] == prefix[depth] {
                found = Some(c);
                break;
            }
            c = end[c];
        }
        let child = found?;
        let n = &full.nodes[child];
        let take = (n.label_len() as usize).min(prefix.len() - depth);
        if text[n.start as usize..n.start as usize + take] != prefix[depth..depth + take] {
            return None;
        }
        node = child;
        depth += n.label_len() as usize;
    }
    let locus = node;
    let below = info[locus].depth_before + full.nodes[locus].label_len();
    let mut nodes = vec![Node::root(1)];
    let first_leaf = full.nodes[locus..end[locus]].iter().find_map(|n| n.suffix_offset())?;
    let top = EdgeLabel::new(first_leaf, first_leaf + below);
    let l = &full.nodes[locus];
    nodes.push(match l.suffix_offset() {
        Some(s) => Node::leaf(top, s),
        None => Node::internal(top, l.child_count),
    });
    nodes.extend_from_slice(&full.nodes[locus + 1..end[locus]]);
    Some(SubTree { prefix: prefix.to_vec(), nodes })
}

/// Structural equality up to the choice of label positions: same shape, same
/// spelled labels, same leaf offsets in the same order.
pub fn trees_equal(a: &SubTree, b: &SubTree, text: &[u8]) -> bool {
    a.nodes.len() == b.nodes.len()
        && a.nodes.iter().zip(&b.nodes).all(|(x, y)| {
            x.child_count == y.child_count
                && x.suffix_offset() == y.suffix_offset()
                && text[x.start as usize..x.end as usize] == text[y.start as usize..y.end as usize]
        })
}

/// Brute-force suffix array used to count substring occurrences.
struct SuffixOracle<'a> {
    ranked: Vec<u8>,
    sa: Vec<usize>,
    text: &'a [u8],
}

impl<'a> SuffixOracle<'a> {
    fn new(text: &'a [u8], alphabet: &Alphabet) -> Self {
        let ranked = ranked(text, alphabet);
        let mut sa: Vec<usize> = (0..text.len()).collect();
        sa.sort_by(|&a, &b| ranked[a..].cmp(&ranked[b..]));
        SuffixOracle { ranked, sa, text }
    }

    /// Narrows `range` (suffixes sharing their first `depth` symbols) to
    /// those continuing with `sym`.
    fn narrow(&self, range: Range<usize>, depth: usize, sym: u8) -> Range<usize> {
        let key = |i: usize| self.ranked.get(self.sa[i] + depth).map(|&r| r as i32).unwrap_or(-1);
        let want = self.ranked_sym(sym);
        let slice = &self.sa[range.clone()];
        let lo = slice.partition_point(|&p| self.ranked.get(p + depth).map(|&r| r as i32).unwrap_or(-1) < want);
        let hi = slice.partition_point(|&p| self.ranked.get(p + depth).map(|&r| r as i32).unwrap_or(-1) <= want);
        debug_assert!(lo == hi || key(range.start + lo) == want);
        range.start + lo..range.start + hi
    }

    fn ranked_sym(&self, sym: u8) -> i32 {
        // the text contains every symbol it is compared against
        self.text.iter().position(|&s| s == sym).map(|p| self.ranked[p] as i32).unwrap_or(i32::MAX)
    }

    /// Distinct symbols following the first `depth` symbols of the suffixes
    /// in `range`.
    fn followers(&self, range: Range<usize>, depth: usize) -> Vec<u8> {
        let mut out: Vec<u8> = Vec::new();
        for &p in &self.sa[range] {
            if let Some(&s) = self.text.get(p + depth) {
                if out.last() != Some(&s) {
                    out.push(s);
                }
            }
        }
        out
    }
}

/// Checks every edge of `tree` against the three edge properties of suffix
/// trees, by exhaustive occurrence counting on `text`:
///
/// 1. an edge ends in a leaf iff its path label occurs exactly once;
/// 2. inside a label `s1..sk`, `pathlabel(parent)·s1..s(i-1)` is always
///    followed by `si`;
/// 3. the first symbols of an internal node's child edges are exactly the
///    symbols that follow its path label somewhere in the text.
pub fn check_edge_properties(text: &[u8], alphabet: &Alphabet, tree: &SubTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let info = match tree.walk() {
        Ok(i) => i,
        Err(e) => {
            out.push(Violation::new(ViolationKind::Malformed, None, e));
            return out;
        }
    };
    let oracle = SuffixOracle::new(text, alphabet);
    let n = tree.nodes.len();
    let mut range: Vec<Range<usize>> = vec![0..0; n];
    range[0] = 0..text.len();
    let bad = |node: usize, detail: String| Violation::new(ViolationKind::EdgeProperty, Some(node), detail);

    for i in 1..n {
        let parent = info[i].parent.expect("non-root");
        let d = info[i].depth_before as usize;
        let node = &tree.nodes[i];
        let (s, e) = (node.start as usize, node.end as usize);
        if e > text.len() || s >= e {
            out.push(bad(i, "label outside text".into()));
            continue;
        }
        let label = &text[s..e];
        let mut r = range[parent].clone();
        let mut ok = true;
        for (j, &sym) in label.iter().enumerate() {
            if r.len() == 1 {
                // a single occurrence: the rest must match it directly
                let p = oracle.sa[r.start] + d + j;
                if text.get(p..p + label.len() - j) != Some(&label[j..]) {
                    out.push(bad(i, format!("path label does not occur (symbol {j})")));
                    ok = false;
                }
                break;
            }
            let next = oracle.narrow(r.clone(), d + j, sym);
            if next.is_empty() {
                out.push(bad(i, format!("path label does not occur (symbol {j})")));
                ok = false;
                break;
            }
            // the partition prefix itself is not a compressed path
            if j > 0 && d + j >= tree.prefix.len() && next.len() != r.len() {
                out.push(bad(i, format!("label symbol {j} does not always follow its context")));
            }
            r = next;
        }
        if !ok {
            continue;
        }
        let count = r.len();
        if node.is_leaf() != (count == 1) {
            out.push(bad(
                i,
                format!(
                    "path label occurs {count} times on a {}",
                    if node.is_leaf() { "leaf" } else { "internal node" }
                ),
            ));
        }
        if !node.is_leaf() {
            let depth = d + label.len();
            let followers = oracle.followers(r.clone(), depth);
            let mut firsts = Vec::new();
            let mut c = i + 1;
            // children are the nodes whose parent is i
            while firsts.len() < node.child_count as usize && c < n {
                if info[c].parent == Some(i) {
                    firsts.push(text[tree.nodes[c].start as usize]);
                }
                c += 1;
            }
            let mut sorted = firsts.clone();
            sorted.sort_by(|&a, &b| alphabet.cmp_symbols(a, b));
            sorted.dedup();
            if sorted != followers {
                out.push(bad(
                    i,
                    format!(
                        "children start with {:?}, text continues with {:?}",
                        String::from_utf8_lossy(&firsts),
                        String::from_utf8_lossy(&followers)
                    ),
                ));
            }
        }
        range[i] = r;
    }
    if tree.prefix.is_empty() && n > 0 {
        let followers = oracle.followers(0..text.len(), 0);
        let mut firsts: Vec<u8> =
            (1..n).filter(|&c| info[c].parent == Some(0)).map(|c| text[tree.nodes[c].start as usize]).collect();
        firsts.sort_by(|&a, &b| alphabet.cmp_symbols(a, b));
        if firsts != followers {
            out.push(bad(0, "root children differ from the symbols of the text".into()));
        }
    }
    out
}

/// Whether `sorted` is ordered by full-suffix comparison.
pub fn is_suffix_sorted(text: &[u8], alphabet: &Alphabet, sorted: &[u64]) -> bool {
    sorted.windows(2).all(|w| alphabet.cmp_seq(&text[w[0] as usize..], &text[w[1] as usize..]) == Ordering::Less)
}
