//! Index files: a header with the top trie and section table, followed by
//! one serialized sub-tree per trie entry.

pub mod format;
pub mod index;
pub mod trie;

pub use format::{SectionEntry, MAGIC, VERSION};
pub use index::{open_index, write_arena_section, write_index, Index, IndexWriter, SuffixIter};
pub use trie::{Route, TopTrie, TrieEntry};
