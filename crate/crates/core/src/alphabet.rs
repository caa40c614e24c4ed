//! Symbol sets and their total order.
//!
//! Every symbol occupies one byte. Base symbols are ranked in the order they
//! were given and the sentinel always ranks above all of them, so a suffix
//! that ends early sorts after any suffix that continues with a base symbol
//! (`CGGT...` < `C$`).

use std::cmp::Ordering;
use std::fmt;

use crate::error::{EraError, Result};

pub const DEFAULT_SENTINEL: u8 = b'$';

const NO_RANK: u16 = u16::MAX;

/// An ordered set of base symbols plus a unique end-of-string sentinel.
#[derive(Clone, PartialEq, Eq)]
pub struct Alphabet {
    base: Vec<u8>,
    sentinel: u8,
    ranks: [u16; 256],
}

impl Alphabet {
    pub fn new(base: &[u8], sentinel: u8) -> Result<Self> {
        if base.is_empty() {
            return Err(EraError::InvalidAlphabet("no base symbols".into()));
        }
        if base.len() > 255 {
            return Err(EraError::InvalidAlphabet(format!("{} base symbols, at most 255 are supported", base.len())));
        }
        let mut ranks = [NO_RANK; 256];
        for (i, &s) in base.iter().enumerate() {
            if ranks[s as usize] != NO_RANK {
                return Err(EraError::InvalidAlphabet(format!("symbol {:?} listed twice", s as char)));
            }
            ranks[s as usize] = i as u16;
        }
        if ranks[sentinel as usize] != NO_RANK {
            return Err(EraError::InvalidAlphabet(format!("sentinel {:?} is also a base symbol", sentinel as char)));
        }
        ranks[sentinel as usize] = base.len() as u16;
        Ok(Alphabet { base: base.to_vec(), sentinel, ranks })
    }

    /// `{A, C, G, T}` with `$`.
    pub fn dna() -> Self {
        Self::new(b"ACGT", DEFAULT_SENTINEL).expect("static alphabet")
    }

    /// The twenty standard amino-acid letters with `$`.
    pub fn protein() -> Self {
        Self::new(b"ACDEFGHIKLMNPQRSTVWY", DEFAULT_SENTINEL).expect("static alphabet")
    }

    /// Printable ASCII (0x20..=0x7e) except the sentinel `$`.
    pub fn ascii() -> Self {
        let base: Vec<u8> = (0x20u8..=0x7e).filter(|&b| b != DEFAULT_SENTINEL).collect();
        Self::new(&base, DEFAULT_SENTINEL).expect("static alphabet")
    }

    pub fn base_symbols(&self) -> &[u8] {
        &self.base
    }

    pub fn sentinel(&self) -> u8 {
        self.sentinel
    }

    /// Number of base symbols plus the sentinel.
    pub fn size(&self) -> usize {
        self.base.len() + 1
    }

    /// Base symbols followed by the sentinel, in rank order.
    pub fn symbols(&self) -> impl Iterator<Item = u8> + '_ {
        self.base.iter().copied().chain(std::iter::once(self.sentinel))
    }

    pub fn contains(&self, sym: u8) -> bool {
        self.ranks[sym as usize] != NO_RANK
    }

    pub fn rank(&self, sym: u8) -> Result<u8> {
        match self.ranks[sym as usize] {
            NO_RANK => Err(EraError::InvalidSymbol { symbol: sym, offset: None }),
            r => Ok(r as u8),
        }
    }

    /// Rank of a symbol already known to be in the alphabet.
    #[inline]
    pub(crate) fn rank_unchecked(&self, sym: u8) -> u8 {
        debug_assert!(self.contains(sym));
        self.ranks[sym as usize] as u8
    }

    /// Inverse of [`Alphabet::rank`].
    #[inline]
    pub fn symbol(&self, rank: u8) -> u8 {
        if rank as usize == self.base.len() {
            self.sentinel
        } else {
            self.base[rank as usize]
        }
    }

    pub fn cmp_symbols(&self, a: u8, b: u8) -> Ordering {
        self.ranks[a as usize].cmp(&self.ranks[b as usize])
    }

    /// Lexicographic comparison of two symbol sequences under the rank order.
    pub fn cmp_seq(&self, a: &[u8], b: &[u8]) -> Ordering {
        for (&x, &y) in a.iter().zip(b) {
            match self.cmp_symbols(x, y) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        a.len().cmp(&b.len())
    }

    /// Checks that every byte of `seq` belongs to the alphabet.
    pub fn check(&self, seq: &[u8]) -> Result<()> {
        match seq.iter().position(|&s| !self.contains(s)) {
            Some(i) => Err(EraError::InvalidSymbol { symbol: seq[i], offset: Some(i as u64) }),
            None => Ok(()),
        }
    }
}

impl fmt::Debug for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Alphabet")
            .field("base", &String::from_utf8_lossy(&self.base))
            .field("sentinel", &(self.sentinel as char))
            .finish()
    }
}

/// Rank of `sym`; the sentinel gets the greatest rank.
pub fn symbol_rank(alphabet: &Alphabet, sym: u8) -> Result<u8> {
    alphabet.rank(sym)
}
