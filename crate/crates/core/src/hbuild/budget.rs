use serde::Serialize;

use crate::error::{EraError, Result};
use crate::vpart::{compute_capacity, Capacity};

pub const MIB: u64 = 1 << 20;

/// Tree node size used for the capacity computation.
pub const DEFAULT_NODE_SIZE: u64 = 32;

/// Default prefetch buffer for alphabets of at most
/// [`SMALL_ALPHABET_LIMIT`] symbols.
pub const SMALL_ALPHABET_R: u64 = 32 * MIB;
pub const LARGE_ALPHABET_R: u64 = 256 * MIB;
pub const SMALL_ALPHABET_LIMIT: usize = 8;

pub const DEFAULT_BS: u64 = MIB;
pub const MAX_TRIE_RESERVE: u64 = MIB;

/// Split of the memory budget between the tree being built (`mts`), the
/// prefetch buffer `R`, the input block buffer and the top trie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MemoryBudget {
    pub total: u64,
    pub mts: u64,
    pub r_size: u64,
    pub bs_size: u64,
    pub trie_reserve: u64,
}

impl MemoryBudget {
    /// Splits `total`: 60% for the tree, `R` defaulting to a size chosen by
    /// alphabet size and capped at `total / 8`, the block buffer defaulting
    /// to 1 MiB capped at `total / 8`, and up to 1 MiB (or a tenth) for the
    /// trie.
    pub fn split(total: u64, base_symbols: usize, r_size: Option<u64>, bs_size: Option<u64>) -> Result<Self> {
        let r_default = if base_symbols <= SMALL_ALPHABET_LIMIT { SMALL_ALPHABET_R } else { LARGE_ALPHABET_R };
        let b = MemoryBudget {
            total,
            mts: total / 10 * 6 + total % 10 * 6 / 10,
            r_size: r_size.unwrap_or_else(|| r_default.min(total / 8)),
            bs_size: bs_size.unwrap_or_else(|| DEFAULT_BS.min(total / 8)),
            trie_reserve: MAX_TRIE_RESERVE.min(total / 10),
        };
        b.check()?;
        Ok(b)
    }

    pub fn check(&self) -> Result<()> {
        let used = self.mts as u128 + self.r_size as u128 + self.bs_size as u128 + self.trie_reserve as u128;
        if used > self.total as u128 {
            return Err(EraError::BudgetTooSmall(format!(
                "tree {} + R {} + block buffer {} + trie {} exceed the budget of {} bytes",
                self.mts, self.r_size, self.bs_size, self.trie_reserve, self.total
            )));
        }
        if self.r_size == 0 {
            return Err(EraError::BudgetTooSmall("no room for the prefetch buffer".into()));
        }
        if self.bs_size == 0 {
            return Err(EraError::BudgetTooSmall("no room for the block buffer".into()));
        }
        Ok(())
    }

    pub fn capacity(&self, node_size: u64) -> Result<Capacity> {
        compute_capacity(self.mts, node_size)
    }

    /// The same split applied to an equal share for each of `workers`.
    pub fn per_worker(
        &self,
        workers: usize,
        base_symbols: usize,
        r_size: Option<u64>,
        bs_size: Option<u64>,
    ) -> Result<Self> {
        if workers == 0 {
            return Err(EraError::Precondition("worker count must be positive".into()));
        }
        MemoryBudget::split(self.total / workers as u64, base_symbols, r_size, bs_size)
    }
}
