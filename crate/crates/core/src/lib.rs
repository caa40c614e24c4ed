//! Disk-based suffix tree construction.
//!
//! The text is split vertically into sub-trees, one per short prefix, small
//! enough to build in memory. Each sub-tree is built horizontally: its leaves
//! are first sorted by repeated sequential scans of the text, then the tree
//! is assembled in a single left-to-right pass. Finished sub-trees are stored
//! in one index file under a small trie of prefixes.

pub mod alphabet;
pub mod error;
pub mod hbuild;
pub mod memory;
pub mod oracle;
pub mod parallel;
pub mod store;
pub mod textio;
pub mod tree;
pub mod vpart;

pub use alphabet::{symbol_rank, Alphabet, DEFAULT_SENTINEL};
pub use error::{EraError, Result};
pub use hbuild::{
    build_subtree, build_virtual_tree, elastic_range, prepare_subtree, MemoryBudget, PrepConfig, PrepOutput,
    PrepSnapshot, RangePolicy, TreeArena,
};
pub use memory::{Charge, MemoryTracker};
pub use parallel::{build_index, make_schedule, plan_build, run_parallel, BuildConfig, BuildReport, Plan, Schedule};
pub use store::{open_index, write_index, Index, IndexWriter, Route, TopTrie, TrieEntry};
pub use textio::{open_text, ScanStats, Text, TextReader, DEFAULT_BLOCK_SIZE};
pub use tree::{BranchRecord, EdgeLabel, Node, SubTree, Violation, ViolationKind};
pub use vpart::{
    compute_capacity, discover_prefixes, group_prefixes, locate_occurrences, Capacity, PrefixCensus, PrefixEntry,
    VirtualTree,
};
