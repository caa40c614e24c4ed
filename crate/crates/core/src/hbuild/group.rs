//! Building all members of a virtual tree with shared text scans.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{EraError, Result};
use crate::hbuild::build::{build_arena, TreeArena};
use crate::hbuild::prepare::{prepare_lockstep, PrepConfig, PrepState, TraceHook};
use crate::memory::MemoryTracker;
use crate::textio::{ScanStats, TextReader};
use crate::tree::BranchRecord;
use crate::vpart::{locate_with_capacity, VirtualTree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemberReport {
    pub prefix: String,
    pub frequency: u64,
    /// Fill passes the member took part in.
    pub passes: u64,
    /// Nodes of the assembled tree; `None` when only the sorted leaves were
    /// handed out.
    pub nodes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupReport {
    pub members: Vec<MemberReport>,
    /// Reader counters spent on this group (locating and filling).
    pub stats: ScanStats,
}

/// What [`build_virtual_tree_with`] hands out for one member.
pub enum MemberOutput<'a> {
    Tree(&'a TreeArena),
    /// Sorted leaves and branch triplets, for members the caller assembles
    /// itself.
    Sorted {
        l: &'a [u64],
        b: &'a [BranchRecord],
    },
}

/// Locates the members' occurrences in one scan, sorts all of them in
/// lockstep and assembles each member's tree in turn, handing it to `emit`
/// with the member's index before the next one is built.
pub fn build_virtual_tree<F>(
    reader: &mut TextReader,
    group: &VirtualTree,
    f_m: u64,
    config: &PrepConfig,
    tracker: Option<&Arc<MemoryTracker>>,
    hook: Option<TraceHook<'_>>,
    mut emit: F,
) -> Result<GroupReport>
where
    F: FnMut(usize, &TreeArena) -> Result<()>,
{
    build_virtual_tree_with(
        reader,
        group,
        f_m,
        config,
        tracker,
        hook,
        |_| true,
        |k, out| match out {
            MemberOutput::Tree(a) => emit(k, a),
            MemberOutput::Sorted { .. } => unreachable!("every member is assembled"),
        },
    )
}

/// [`build_virtual_tree`] where `assemble(k)` decides whether member `k`
/// is turned into a tree or handed out as sorted leaves.
#[allow(clippy::too_many_arguments)]
pub fn build_virtual_tree_with<A, F>(
    reader: &mut TextReader,
    group: &VirtualTree,
    f_m: u64,
    config: &PrepConfig,
    tracker: Option<&Arc<MemoryTracker>>,
    hook: Option<TraceHook<'_>>,
    assemble: A,
    mut emit: F,
) -> Result<GroupReport>
where
    A: Fn(usize) -> bool,
    F: FnMut(usize, MemberOutput<'_>) -> Result<()>,
{
    let sum = group.frequency();
    if sum > f_m {
        return Err(EraError::Precondition(format!("group holds {sum} leaves, limit is {f_m}")));
    }
    let before = reader.stats();
    let prefixes: Vec<Vec<u8>> = group.members.iter().map(|m| m.prefix.clone()).collect();
    let expected: Vec<u64> = group.members.iter().map(|m| m.frequency).collect();
    let occ = locate_with_capacity(reader, &prefixes, &expected)?;
    let alphabet = reader.text().alphabet().clone();
    let text_len = reader.len();
    let mut states = Vec::with_capacity(occ.len());
    for (member, o) in group.members.iter().zip(occ) {
        if o.len() as u64 != member.frequency {
            return Err(EraError::Consistency(format!(
                "{:?} occurs {} times, expected {}",
                String::from_utf8_lossy(&member.prefix),
                o.len(),
                member.frequency
            )));
        }
        states.push(PrepState::new(&member.prefix, o, &alphabet, text_len, tracker)?);
    }
    prepare_lockstep(reader, &mut states, config, tracker, hook)?;
    reader.release_buffer();

    let mut outputs: Vec<_> = states.into_iter().map(|s| s.into_output()).collect();
    let mut members = Vec::with_capacity(outputs.len());
    for (k, member) in group.members.iter().enumerate() {
        let out = std::mem::replace(
            &mut outputs[k],
            crate::hbuild::PrepOutput { l: Vec::new(), b: Vec::new(), passes: 0, ranges: Vec::new() },
        );
        let nodes = if assemble(k) {
            let arena = build_arena(&out.l, &out.b, text_len, &member.prefix, &alphabet, tracker)?;
            drop(out.l);
            drop(out.b);
            emit(k, MemberOutput::Tree(&arena))?;
            Some(arena.node_count() as u64)
        } else {
            emit(k, MemberOutput::Sorted { l: &out.l, b: &out.b })?;
            None
        };
        members.push(MemberReport {
            prefix: String::from_utf8_lossy(&member.prefix).into_owned(),
            frequency: member.frequency,
            passes: out.passes,
            nodes,
        });
    }
    let after = reader.stats();
    Ok(GroupReport {
        members,
        stats: ScanStats {
            passes: after.passes - before.passes,
            blocks_read: after.blocks_read - before.blocks_read,
            blocks_skipped: after.blocks_skipped - before.blocks_skipped,
            seeks: after.seeks - before.seeks,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::hbuild::build::build_subtree;
    use crate::hbuild::prepare::{prepare_subtree, RangePolicy};
    use crate::textio::Text;
    use crate::vpart::{locate_occurrences, PrefixEntry};

    const WORKED: &[u8] = b"TGGTGGTGGTGCGGTGATGGTGC$";

    #[test]
    fn tgg_tga_group() {
        let dna = Alphabet::dna();
        let mut r = TextReader::new(Text::from_bytes(WORKED.to_vec(), &dna).unwrap(), 4).unwrap();
        let cfg = PrepConfig { policy: RangePolicy::Elastic { r_capacity: 10 }, skip: true };
        let group = VirtualTree { members: vec![PrefixEntry::new(&b"TGG"[..], 4), PrefixEntry::new(&b"TGA"[..], 1)] };
        let mut trees = Vec::new();
        let rep = build_virtual_tree(&mut r, &group, 5, &cfg, None, None, |k, a| {
            trees.push((k, a.to_subtree()));
            Ok(())
        })
        .unwrap();
        let mut independent_passes = Vec::new();
        for (k, m) in group.members.iter().enumerate() {
            let occ = locate_occurrences(&mut r, std::slice::from_ref(&m.prefix)).unwrap().pop().unwrap();
            let out = prepare_subtree(&mut r, &m.prefix, occ, &cfg, None, None).unwrap();
            independent_passes.push(out.passes);
            let t = build_subtree(&out.l, &out.b, 24, &m.prefix, &dna).unwrap();
            assert_eq!(trees[k], (k, t));
        }
        let fill_passes = rep.stats.passes - 1;
        assert!(fill_passes <= *independent_passes.iter().max().unwrap());
        assert_eq!(rep.members[1].passes, 0);

        let too_big = VirtualTree { members: vec![PrefixEntry::new(&b"TGG"[..], 4), PrefixEntry::new(&b"TGC"[..], 2)] };
        assert!(matches!(
            build_virtual_tree(&mut r, &too_big, 5, &cfg, None, None, |_, _| Ok(())),
            Err(EraError::Precondition(_))
        ));
        let wrong = VirtualTree { members: vec![PrefixEntry::new(&b"TGG"[..], 3)] };
        assert!(matches!(
            build_virtual_tree(&mut r, &wrong, 5, &cfg, None, None, |_, _| Ok(())),
            Err(EraError::Consistency(_))
        ));
    }
}
