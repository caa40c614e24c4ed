//! Horizontal construction of sub-trees: leaf sorting, tree assembly and
//! the virtual-tree driver.

pub mod budget;
pub mod build;
pub mod group;
pub mod prepare;

pub use budget::{MemoryBudget, DEFAULT_NODE_SIZE, MIB};
pub use build::{build_subtree, TreeArena};
pub use group::{build_virtual_tree, build_virtual_tree_with, GroupReport, MemberOutput, MemberReport};
pub use prepare::{
    elastic_range, prepare_lockstep, prepare_subtree, PrepConfig, PrepOutput, PrepSnapshot, PrepState, RangePolicy,
    TraceHook,
};
