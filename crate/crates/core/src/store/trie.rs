use std::cmp::Ordering;
use std::ops::Range;

use rustc_hash::FxHashMap;

use crate::alphabet::Alphabet;
use crate::error::{EraError, Result};
use crate::vpart::PrefixEntry;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrieEntry {
    pub prefix: Vec<u8>,
    pub record: u64,
    pub frequency: u64,
}

/// Where a pattern leads in the top trie.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Route {
    /// The pattern is a prefix of every entry in this range (and of no
    /// other): all their suffixes match.
    Entries(Range<usize>),
    /// This entry is a proper or exact prefix of the pattern; matching
    /// continues inside its sub-tree.
    Inside(usize),
    /// No suffix starts with the pattern.
    Nowhere,
}

/// The partition prefixes in lexicographic order, each pointing to the
/// record of its sub-tree.
#[derive(Debug, Clone)]
pub struct TopTrie {
    alphabet: Alphabet,
    entries: Vec<TrieEntry>,
    lookup: FxHashMap<Vec<u8>, usize>,
}

impl TopTrie {
    /// Record ids follow the order of `partition`, which must already be
    /// sorted and prefix-free.
    pub fn new(alphabet: Alphabet, partition: &[PrefixEntry]) -> Result<Self> {
        let entries = partition
            .iter()
            .enumerate()
            .map(|(i, e)| TrieEntry { prefix: e.prefix.clone(), record: i as u64, frequency: e.frequency })
            .collect();
        TopTrie::from_entries(alphabet, entries)
    }

    pub fn from_entries(alphabet: Alphabet, entries: Vec<TrieEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(EraError::Precondition("empty trie".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.record != i as u64 {
                return Err(EraError::Precondition(format!("entry {i} points to record {}", e.record)));
            }
            if e.frequency == 0 || e.prefix.is_empty() {
                return Err(EraError::Precondition(format!("entry {i} is empty")));
            }
            alphabet.check(&e.prefix)?;
        }
        for w in entries.windows(2) {
            if alphabet.cmp_seq(&w[0].prefix, &w[1].prefix) != Ordering::Less {
                return Err(EraError::Precondition("trie entries are not sorted".into()));
            }
            // in sorted order a prefix sits right before its extensions
            if w[1].prefix.starts_with(&w[0].prefix) {
                return Err(EraError::Precondition("trie entries are not prefix-free".into()));
            }
        }
        let lookup = entries.iter().enumerate().map(|(i, e)| (e.prefix.clone(), i)).collect();
        Ok(TopTrie { alphabet, entries, lookup })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn entries(&self) -> &[TrieEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_frequency(&self) -> u64 {
        self.entries.iter().map(|e| e.frequency).sum()
    }

    pub fn record_of(&self, prefix: &[u8]) -> Option<usize> {
        self.lookup.get(prefix).copied()
    }

    /// Approximate resident size in bytes.
    pub fn heap_size(&self) -> u64 {
        self.entries.iter().map(|e| (std::mem::size_of::<TrieEntry>() * 2 + 2 * e.prefix.len() + 16) as u64).sum()
    }

    pub fn route(&self, pattern: &[u8]) -> Route {
        for k in 1..=pattern.len() {
            if let Some(&i) = self.lookup.get(&pattern[..k]) {
                return Route::Inside(i);
            }
        }
        let cut = |e: &TrieEntry| {
            let n = e.prefix.len().min(pattern.len());
            self.alphabet.cmp_seq(&e.prefix[..n], pattern)
        };
        let lo = self.entries.partition_point(|e| cut(e) == Ordering::Less);
        let hi = self.entries.partition_point(|e| cut(e) != Ordering::Greater);
        if lo < hi {
            Route::Entries(lo..hi)
        } else {
            Route::Nowhere
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked() -> TopTrie {
        let part: Vec<PrefixEntry> = [
            ("A", 1),
            ("C", 2),
            ("GA", 1),
            ("GC", 2),
            ("GG", 5),
            ("GT", 5),
            ("TGA", 1),
            ("TGC", 2),
            ("TGG", 4),
            ("$", 1),
        ]
        .iter()
        .map(|&(p, f)| PrefixEntry::new(p.as_bytes(), f))
        .collect();
        TopTrie::new(Alphabet::dna(), &part).unwrap()
    }

    #[test]
    fn routes() {
        let t = worked();
        assert_eq!(t.total_frequency(), 24);
        assert_eq!(t.route(b"TG"), Route::Entries(6..9));
        assert_eq!(t.route(b"G"), Route::Entries(2..6));
        assert_eq!(t.route(b"TGC"), Route::Inside(7));
        assert_eq!(t.route(b"TGCG"), Route::Inside(7));
        assert_eq!(t.route(b"TGT"), Route::Nowhere);
        assert_eq!(t.route(b"G$"), Route::Nowhere);
        assert_eq!(t.route(b"$"), Route::Inside(9));
    }

    #[test]
    fn rejects_bad_entries() {
        let dna = Alphabet::dna();
        let e = |p: &str, r: u64| TrieEntry { prefix: p.as_bytes().to_vec(), record: r, frequency: 1 };
        assert!(TopTrie::from_entries(dna.clone(), vec![e("C", 0), e("A", 1)]).is_err());
        assert!(TopTrie::from_entries(dna.clone(), vec![e("A", 0), e("AC", 1)]).is_err());
        assert!(TopTrie::from_entries(dna.clone(), vec![e("A", 1)]).is_err());
        assert!(TopTrie::from_entries(dna, vec![]).is_err());
    }
}
