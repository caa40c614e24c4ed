//! Vertical partitioning: choose variable-length prefixes whose sub-trees fit
//! in memory, group them into virtual trees and find their occurrences.

use log::{debug, warn};
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::alphabet::Alphabet;
use crate::error::{EraError, Result};
use crate::textio::TextReader;

/// Prefix length past which discovery logs a warning.
pub const DEFAULT_WARN_DEPTH: usize = 64;

/// How many leaves a sub-tree may have so that it fits in the tree memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Capacity {
    pub mts: u64,
    pub node_size: u64,
    pub f_m: u64,
}

/// `f_m = mts / (2 * node_size)`: a tree with `f` leaves has fewer than
/// `2f` nodes.
pub fn compute_capacity(mts: u64, node_size: u64) -> Result<Capacity> {
    if node_size == 0 {
        return Err(EraError::Precondition("node size must be positive".into()));
    }
    let f_m = mts / (2 * node_size);
    if f_m == 0 {
        return Err(EraError::BudgetTooSmall(format!(
            "tree memory of {mts} bytes cannot hold one leaf of {node_size}-byte nodes"
        )));
    }
    Ok(Capacity { mts, node_size, f_m })
}

/// A partition prefix and its number of occurrences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PrefixEntry {
    pub prefix: Vec<u8>,
    pub frequency: u64,
}

impl PrefixEntry {
    pub fn new(prefix: impl Into<Vec<u8>>, frequency: u64) -> Self {
        PrefixEntry { prefix: prefix.into(), frequency }
    }
}

/// Prefixes built together so that each scan of the text serves all of them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VirtualTree {
    pub members: Vec<PrefixEntry>,
}

impl VirtualTree {
    pub fn frequency(&self) -> u64 {
        self.members.iter().map(|m| m.frequency).sum()
    }
}

/// Packs the first `m <= 8` bytes of `w` into an integer.
#[inline]
fn code_of(w: &[u8], m: usize) -> u64 {
    let mut buf = [0u8; 8];
    buf[..m].copy_from_slice(&w[..m]);
    u64::from_le_bytes(buf)
}

/// Finds where a set of prefixes occurs. A position is screened by its
/// first up-to-8 symbols before the full comparison.
#[derive(Debug)]
pub struct PrefixMatcher {
    prefixes: Vec<Vec<u8>>,
    m: usize,
    mask: u64,
    max_len: usize,
    few: Vec<(u64, u32)>,
    many: FxHashMap<u64, Vec<u32>>,
    filter: Vec<u64>,
}

const FEW: usize = 8;
const FILTER_BITS: u32 = 16;

#[inline]
fn filter_slot(c: u64) -> usize {
    (c.wrapping_mul(0x9E37_79B9_7F4A_7C15) >> (64 - FILTER_BITS)) as usize
}

impl PrefixMatcher {
    pub fn new(prefixes: Vec<Vec<u8>>) -> Result<Self> {
        if prefixes.iter().any(|p| p.is_empty()) {
            return Err(EraError::Precondition("empty prefix".into()));
        }
        let m = prefixes.iter().map(|p| p.len()).min().unwrap_or(1).min(8);
        let mask = if m == 8 { u64::MAX } else { (1u64 << (8 * m)) - 1 };
        let max_len = prefixes.iter().map(|p| p.len()).max().unwrap_or(0);
        let mut few = Vec::new();
        let mut many: FxHashMap<u64, Vec<u32>> = FxHashMap::default();
        let mut filter = vec![0u64; 1 << (FILTER_BITS - 6)];
        for (i, p) in prefixes.iter().enumerate() {
            let c = code_of(p, m);
            let h = filter_slot(c);
            filter[h >> 6] |= 1 << (h & 63);
            if prefixes.len() <= FEW {
                few.push((c, i as u32));
            } else {
                many.entry(c).or_default().push(i as u32);
            }
        }
        Ok(PrefixMatcher { prefixes, m, mask, max_len, few, many, filter })
    }

    pub fn prefixes(&self) -> &[Vec<u8>] {
        &self.prefixes
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Calls `hit(i, k)` for every `i < core` where prefix `k` starts at
    /// `chunk[i]`; `chunk` must extend `max_len - 1` symbols past `core`
    /// unless the text ends earlier.
    #[inline]
    pub fn for_each_match<F: FnMut(usize, usize)>(&self, chunk: &[u8], core: usize, mut hit: F) {
        let fast_end = chunk.len().saturating_sub(7).min(core);
        let prefixes = &self.prefixes;
        let mut try_one = |i: usize, k: u32| {
            let p = &prefixes[k as usize];
            if chunk.len() - i >= p.len() && chunk[i..i + p.len()] == p[..] {
                hit(i, k as usize);
            }
        };
        let filter = &self.filter;
        let maybe = |c: u64| {
            let h = filter_slot(c);
            filter[h >> 6] >> (h & 63) & 1 != 0
        };
        let words = chunk[..fast_end + 7.min(chunk.len() - fast_end)]
            .windows(8)
            .map(|w| u64::from_le_bytes(w.try_into().expect("8 bytes")) & self.mask);
        if self.many.is_empty() {
            for (i, c) in words.enumerate() {
                if maybe(c) {
                    for &(pc, k) in &self.few {
                        if pc == c {
                            try_one(i, k);
                        }
                    }
                }
            }
        } else {
            for (i, c) in words.enumerate() {
                if maybe(c) {
                    if let Some(ks) = self.many.get(&c) {
                        for &k in ks {
                            try_one(i, k);
                        }
                    }
                }
            }
        }
        for i in fast_end..core {
            if chunk.len() - i >= self.m {
                let c = code_of(&chunk[i..], self.m);
                if self.many.is_empty() {
                    for &(pc, k) in &self.few {
                        if pc == c {
                            try_one(i, k);
                        }
                    }
                } else if let Some(ks) = self.many.get(&c) {
                    for &k in ks {
                        try_one(i, k);
                    }
                }
            }
        }
    }
}

/// Counts of every prefix examined while refining the partition. Keeping
/// them lets coarser partitions be derived without rescanning.
#[derive(Debug, Clone)]
pub struct PrefixCensus {
    alphabet: Alphabet,
    f_m: u64,
    counts: FxHashMap<Vec<u8>, u64>,
    rounds: u32,
    text_len: u64,
}

impl PrefixCensus {
    /// Counts prefixes round by round, one text scan per round, extending
    /// every prefix that occurs more than `f_m` times by each symbol
    /// (sentinel included).
    pub fn run(reader: &mut TextReader, alphabet: &Alphabet, f_m: u64, warn_depth: usize) -> Result<Self> {
        if f_m == 0 {
            return Err(EraError::Precondition("f_m must be at least 1".into()));
        }
        let symbols: Vec<u8> = alphabet.symbols().collect();
        let mut counts: FxHashMap<Vec<u8>, u64> = FxHashMap::default();
        let mut working: Vec<Vec<u8>> = symbols.iter().map(|&s| vec![s]).collect();
        let mut rounds = 0u32;
        let mut warned = false;
        while !working.is_empty() {
            let k = working[0].len();
            debug_assert!(working.iter().all(|p| p.len() == k));
            if k > warn_depth && !warned {
                warn!(
                    "partition prefixes exceed {warn_depth} symbols; the text has long repeats relative to f_m = {f_m}"
                );
                warned = true;
            }
            let matcher = PrefixMatcher::new(std::mem::take(&mut working))?;
            let mut c = vec![0u64; matcher.prefixes().len()];
            reader.scan(matcher.max_len(), |_, chunk, core| {
                matcher.for_each_match(chunk, core, |_, idx| c[idx] += 1);
            })?;
            rounds += 1;
            let mut next = Vec::new();
            for (p, cnt) in matcher.prefixes.into_iter().zip(c) {
                if cnt > f_m {
                    for &s in &symbols {
                        let mut q = Vec::with_capacity(p.len() + 1);
                        q.extend_from_slice(&p);
                        q.push(s);
                        next.push(q);
                    }
                }
                counts.insert(p, cnt);
            }
            debug!("partition round {rounds}: length {k}, {} prefixes to extend", next.len() / symbols.len().max(1));
            working = next;
        }
        Ok(PrefixCensus { alphabet: alphabet.clone(), f_m, counts, rounds, text_len: reader.len() })
    }

    pub fn f_m(&self) -> u64 {
        self.f_m
    }

    /// Text scans spent counting.
    pub fn rounds(&self) -> u32 {
        self.rounds
    }

    pub fn count(&self, prefix: &[u8]) -> Option<u64> {
        self.counts.get(prefix).copied()
    }

    /// Number of prefixes counted.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// The prefix-free partition for leaf limit `f` (which must be at least
    /// the census limit), in lexicographic order.
    pub fn partition(&self, f: u64) -> Result<Vec<PrefixEntry>> {
        if f < self.f_m {
            return Err(EraError::Precondition(format!("partition limit {f} is below the census limit {}", self.f_m)));
        }
        let symbols: Vec<u8> = self.alphabet.symbols().collect();
        let mut out = Vec::new();
        let mut stack: Vec<Vec<u8>> = symbols.iter().rev().map(|&s| vec![s]).collect();
        while let Some(p) = stack.pop() {
            let c = self.count(&p).ok_or_else(|| {
                EraError::Consistency(format!("prefix {:?} was never counted", String::from_utf8_lossy(&p)))
            })?;
            if c == 0 {
                continue;
            }
            if c <= f {
                out.push(PrefixEntry::new(p, c));
                continue;
            }
            for &s in symbols.iter().rev() {
                let mut q = p.clone();
                q.push(s);
                stack.push(q);
            }
        }
        let total: u64 = out.iter().map(|e| e.frequency).sum();
        if total != self.text_len {
            return Err(EraError::Consistency(format!(
                "partition covers {total} suffixes, text has {}",
                self.text_len
            )));
        }
        Ok(out)
    }
}

/// The prefix partition for leaf limit `f_m`, in lexicographic order.
pub fn discover_prefixes(reader: &mut TextReader, alphabet: &Alphabet, f_m: u64) -> Result<Vec<PrefixEntry>> {
    PrefixCensus::run(reader, alphabet, f_m, DEFAULT_WARN_DEPTH)?.partition(f_m)
}

/// First-fit grouping: take entries by descending frequency; each group is
/// opened by the largest remaining entry and then collects, in order, every
/// remaining entry that still fits under `f_m`.
pub fn group_prefixes(entries: &[PrefixEntry], f_m: u64) -> Result<Vec<VirtualTree>> {
    if let Some(e) = entries.iter().find(|e| e.frequency > f_m || e.frequency == 0) {
        return Err(EraError::Precondition(format!(
            "prefix {:?} has frequency {}, limit is {f_m}",
            String::from_utf8_lossy(&e.prefix),
            e.frequency
        )));
    }
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| entries[b].frequency.cmp(&entries[a].frequency));
    let mut groups = Vec::new();
    while !order.is_empty() {
        let mut sum = 0u64;
        let mut members = Vec::new();
        order.retain(|&i| {
            let f = entries[i].frequency;
            if sum + f <= f_m {
                sum += f;
                members.push(entries[i].clone());
                false
            } else {
                true
            }
        });
        groups.push(VirtualTree { members });
    }
    Ok(groups)
}

/// Occurrence positions of each prefix, ascending, in one scan. Prefixes
/// must be pairwise non-prefixing.
pub fn locate_occurrences(reader: &mut TextReader, prefixes: &[Vec<u8>]) -> Result<Vec<Vec<u64>>> {
    locate_with_capacity(reader, prefixes, &[])
}

/// [`locate_occurrences`] reserving `expected[k]` positions for prefix `k`.
pub(crate) fn locate_with_capacity(
    reader: &mut TextReader,
    prefixes: &[Vec<u8>],
    expected: &[u64],
) -> Result<Vec<Vec<u64>>> {
    let mut out: Vec<Vec<u64>> =
        (0..prefixes.len()).map(|k| Vec::with_capacity(expected.get(k).copied().unwrap_or(0) as usize)).collect();
    if prefixes.is_empty() {
        return Ok(out);
    }
    let matcher = PrefixMatcher::new(prefixes.to_vec())?;
    reader.scan(matcher.max_len(), |base, chunk, core| {
        matcher.for_each_match(chunk, core, |i, k| out[k].push(base + i as u64));
    })?;
    Ok(out)
}
