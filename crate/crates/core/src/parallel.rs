//! Index construction driver: partitioning, a master that deals virtual
//! trees to workers, and deterministic assembly of the index file.
//!
//! Index records always come from the partition for the whole budget, so
//! the file does not depend on the worker count. Workers sort the finer
//! partition that fits their budget share; a fine prefix that is a record
//! of its own is assembled and serialized by the worker, the rest are
//! handed back as sorted leaves and merged into their record by the master.

use std::fs::File;
use std::io::{BufWriter, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;
use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{EraError, Result};
use crate::hbuild::build::build_arena;
use crate::hbuild::{
    build_virtual_tree_with, MemberOutput, MemberReport, MemoryBudget, PrepConfig, PrepSnapshot, RangePolicy,
    DEFAULT_NODE_SIZE,
};
use crate::memory::{charge_opt, MemoryTracker};
use crate::store::{write_arena_section, IndexWriter, TopTrie};
use crate::textio::{ScanStats, Text, TextReader};
use crate::tree::BranchRecord;
use crate::vpart::{group_prefixes, PrefixCensus, PrefixEntry, VirtualTree, DEFAULT_WARN_DEPTH};

const SPILL_BUFFER: usize = 64 * 1024;
const PAIR_BYTES: u64 = 10;

/// Groups dealt to each worker, in processing order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schedule {
    pub assignments: Vec<Vec<usize>>,
}

/// Orders groups by descending leaf count (ties by id) and deals them
/// round-robin.
pub fn make_schedule(groups: &[VirtualTree], workers: usize) -> Result<Schedule> {
    if workers == 0 {
        return Err(EraError::Precondition("worker count must be positive".into()));
    }
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by_key(|&g| std::cmp::Reverse(groups[g].frequency()));
    let mut assignments = vec![Vec::new(); workers];
    for (k, g) in order.into_iter().enumerate() {
        assignments[k % workers].push(g);
    }
    Ok(Schedule { assignments })
}

pub type TraceFn = Arc<dyn Fn(usize, &PrepSnapshot) + Send + Sync>;

#[derive(Clone)]
pub struct BuildConfig {
    /// Total memory budget in bytes, shared equally by the workers.
    pub memory: u64,
    pub r_size: Option<u64>,
    pub block_size: Option<u64>,
    pub node_size: u64,
    pub workers: usize,
    /// Threads running the workers' schedules; defaults to one per worker.
    pub threads: Option<usize>,
    /// Block skipping during fills; defaults to on for a single worker only.
    pub skip_seek: Option<bool>,
    /// Build every prefix on its own instead of in virtual trees.
    pub no_grouping: bool,
    /// Fixed per-iteration range instead of the elastic one.
    pub fixed_range: Option<u64>,
    /// Called with the group id after every fill iteration.
    pub trace: Option<TraceFn>,
    /// Directory for worker spill files; the output's directory by default.
    pub spill_dir: Option<PathBuf>,
}

impl std::fmt::Debug for BuildConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuildConfig")
            .field("memory", &self.memory)
            .field("r_size", &self.r_size)
            .field("block_size", &self.block_size)
            .field("node_size", &self.node_size)
            .field("workers", &self.workers)
            .field("threads", &self.threads)
            .field("skip_seek", &self.skip_seek)
            .field("no_grouping", &self.no_grouping)
            .field("fixed_range", &self.fixed_range)
            .field("trace", &self.trace.is_some())
            .finish()
    }
}

impl BuildConfig {
    pub fn new(memory: u64) -> Self {
        BuildConfig {
            memory,
            r_size: None,
            block_size: None,
            node_size: DEFAULT_NODE_SIZE,
            workers: 1,
            threads: None,
            skip_seek: None,
            no_grouping: false,
            fixed_range: None,
            trace: None,
            spill_dir: None,
        }
    }

    pub fn skip(&self) -> bool {
        self.skip_seek.unwrap_or(self.workers <= 1)
    }
}

/// Partitions and groups decided before any sub-tree is built.
#[derive(Debug, Clone)]
pub struct Plan {
    pub budget: MemoryBudget,
    pub worker_budget: MemoryBudget,
    /// Leaf limit of index records.
    pub record_f_m: u64,
    /// Leaf limit of the prefixes workers sort.
    pub work_f_m: u64,
    pub records: Vec<PrefixEntry>,
    pub work: Vec<PrefixEntry>,
    /// Record holding each work prefix.
    pub record_of: Vec<usize>,
    pub groups: Vec<VirtualTree>,
    /// Work prefix ids of each group's members.
    pub group_members: Vec<Vec<usize>>,
    pub schedule: Schedule,
    pub census_rounds: u32,
    pub census_stats: ScanStats,
    pub census_peak: u64,
}

/// Counts prefixes and fixes the record partition, the work partition, the
/// groups and the schedule.
pub fn plan_build(text: &Text, config: &BuildConfig) -> Result<Plan> {
    if config.workers == 0 {
        return Err(EraError::Precondition("worker count must be positive".into()));
    }
    let base = text.alphabet().base_symbols().len();
    let budget = MemoryBudget::split(config.memory, base, config.r_size, config.block_size)?;
    let worker_budget = budget.per_worker(config.workers, base, config.r_size, config.block_size)?;
    let record_f_m = budget.capacity(config.node_size)?.f_m;
    let work_f_m = worker_budget.capacity(config.node_size)?.f_m;

    let tracker = MemoryTracker::new();
    let mut reader = TextReader::new(text.clone(), worker_budget.bs_size as usize)?.with_tracker(tracker.clone());
    let census = PrefixCensus::run(&mut reader, text.alphabet(), work_f_m, DEFAULT_WARN_DEPTH)?;
    let census_stats = reader.stats();
    drop(reader);
    let records = census.partition(record_f_m)?;
    let work = census.partition(work_f_m)?;

    let mut record_of = Vec::with_capacity(work.len());
    let mut r = 0;
    for w in &work {
        while !w.prefix.starts_with(&records[r].prefix) {
            r += 1;
            if r == records.len() {
                return Err(EraError::Consistency("work partition does not refine the record partition".into()));
            }
        }
        record_of.push(r);
    }

    let groups = if config.no_grouping {
        work.iter().map(|e| VirtualTree { members: vec![e.clone()] }).collect()
    } else {
        group_prefixes(&work, work_f_m)?
    };
    let ids: FxHashMap<&[u8], usize> = work.iter().enumerate().map(|(i, e)| (e.prefix.as_slice(), i)).collect();
    let group_members = groups.iter().map(|g| g.members.iter().map(|m| ids[m.prefix.as_slice()]).collect()).collect();
    let schedule = make_schedule(&groups, config.workers)?;
    info!(
        "{} records (limit {record_f_m}), {} work prefixes (limit {work_f_m}) in {} groups",
        records.len(),
        work.len(),
        groups.len()
    );
    Ok(Plan {
        budget,
        worker_budget,
        record_f_m,
        work_f_m,
        records,
        work,
        record_of,
        groups,
        group_members,
        schedule,
        census_rounds: census.rounds(),
        census_stats,
        census_peak: tracker.peak(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupSummary {
    pub id: usize,
    pub worker: usize,
    pub frequency: u64,
    pub members: Vec<MemberReport>,
    pub stats: ScanStats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkerSummary {
    pub id: usize,
    pub groups: usize,
    pub stats: ScanStats,
    pub peak_memory: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordSummary {
    pub prefix: String,
    pub frequency: u64,
    pub nodes: u64,
}

/// Machine-readable account of one build.
#[derive(Debug, Clone, Serialize)]
pub struct BuildReport {
    pub text_len: u64,
    pub workers: usize,
    pub threads: usize,
    pub skip_seek: bool,
    pub node_size: u64,
    pub budget: MemoryBudget,
    pub worker_budget: MemoryBudget,
    pub record_f_m: u64,
    pub work_f_m: u64,
    pub census_rounds: u32,
    pub census_stats: ScanStats,
    pub group_count: usize,
    pub groups: Vec<GroupSummary>,
    pub records: Vec<RecordSummary>,
    pub worker_stats: Vec<WorkerSummary>,
    /// Reads by the workers, all groups together.
    pub build_stats: ScanStats,
    /// Census and build reads together.
    pub total_stats: ScanStats,
    /// Records the master assembled from several work prefixes.
    pub merged_records: usize,
    /// Highest tracked allocation of any phase: census, all workers
    /// together, or final assembly.
    pub peak_memory: u64,
    pub index_bytes: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy)]
enum Spilled {
    Section { offset: u64, len: u64, crc: u32 },
    Sorted { offset: u64, leaves: u64 },
}

struct WorkerOutput {
    id: usize,
    spill: File,
    items: Vec<(usize, Spilled)>,
    groups: Vec<GroupSummary>,
    stats: ScanStats,
    peak: u64,
}

fn spill_sorted<W: Write>(w: &mut W, l: &[u64], b: &[BranchRecord]) -> std::io::Result<u64> {
    for &x in l {
        w.write_all(&x.to_le_bytes())?;
    }
    for br in b {
        w.write_all(&[br.c1, br.c2])?;
        w.write_all(&br.offset.to_le_bytes())?;
    }
    Ok(8 * l.len() as u64 + PAIR_BYTES * b.len() as u64)
}

fn run_worker(id: usize, text: &Text, plan: &Plan, config: &BuildConfig, spill_dir: &Path) -> Result<WorkerOutput> {
    let tracker = MemoryTracker::new();
    let spill = tempfile::tempfile_in(spill_dir)?;
    let _buf = charge_opt(Some(&tracker), SPILL_BUFFER as u64);
    let mut out = BufWriter::with_capacity(SPILL_BUFFER, spill.try_clone()?);
    let mut pos = 0u64;
    let mut items = Vec::new();
    let mut groups = Vec::new();
    let mut reader = TextReader::new(text.clone(), plan.worker_budget.bs_size as usize)?.with_tracker(tracker.clone());
    let prep = PrepConfig {
        policy: match config.fixed_range {
            Some(r) => RangePolicy::Fixed(r),
            None => RangePolicy::Elastic { r_capacity: plan.worker_budget.r_size },
        },
        skip: config.skip(),
    };
    for &g in &plan.schedule.assignments[id] {
        let members = &plan.group_members[g];
        let own_record = |k: usize| {
            let w = members[k];
            plan.records[plan.record_of[w]].prefix == plan.work[w].prefix
        };
        let mut trace_fn = config.trace.as_ref().map(|f| move |s: &PrepSnapshot| f(g, s));
        let hook = trace_fn.as_mut().map(|f| f as &mut dyn FnMut(&PrepSnapshot));
        let report = build_virtual_tree_with(
            &mut reader,
            &plan.groups[g],
            plan.work_f_m,
            &prep,
            Some(&tracker),
            hook,
            own_record,
            |k, member| {
                let item = match member {
                    MemberOutput::Tree(arena) => {
                        let (len, crc) = write_arena_section(&mut out, arena)?;
                        let s = Spilled::Section { offset: pos, len, crc };
                        pos += len;
                        s
                    }
                    MemberOutput::Sorted { l, b } => {
                        let s = Spilled::Sorted { offset: pos, leaves: l.len() as u64 };
                        pos += spill_sorted(&mut out, l, b)?;
                        s
                    }
                };
                items.push((members[k], item));
                Ok(())
            },
        )?;
        groups.push(GroupSummary {
            id: g,
            worker: id,
            frequency: plan.groups[g].frequency(),
            members: report.members,
            stats: report.stats,
        });
    }
    out.flush()?;
    drop(out);
    Ok(WorkerOutput { id, spill, items, groups, stats: reader.stats(), peak: tracker.peak() })
}

/// Runs every worker's schedule on `threads` threads and returns the
/// outputs ordered by worker id.
fn run_workers(
    text: &Text,
    plan: &Plan,
    config: &BuildConfig,
    threads: usize,
    spill_dir: &Path,
) -> Result<Vec<WorkerOutput>> {
    let workers = config.workers;
    let mut outputs: Vec<Result<WorkerOutput>> = if threads <= 1 {
        (0..workers).map(|id| run_worker(id, text, plan, config, spill_dir)).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    s.spawn(move || {
                        (t..workers)
                            .step_by(threads)
                            .map(|id| run_worker(id, text, plan, config, spill_dir))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("worker thread panicked")).collect()
        })
    };
    let mut ok = Vec::with_capacity(outputs.len());
    for o in outputs.drain(..) {
        ok.push(o?);
    }
    ok.sort_by_key(|o| o.id);
    Ok(ok)
}

fn read_sorted(file: &File, offset: u64, leaves: u64, l: &mut Vec<u64>, b: &mut Vec<BranchRecord>) -> Result<()> {
    let mut buf = vec![0u8; (8 * leaves + PAIR_BYTES * leaves.saturating_sub(1)) as usize];
    file.read_exact_at(&mut buf, offset)?;
    let (ls, bs) = buf.split_at(8 * leaves as usize);
    l.extend(ls.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8"))));
    b.extend(
        bs.chunks_exact(PAIR_BYTES as usize)
            .map(|c| BranchRecord::new(c[0], c[1], u64::from_le_bytes(c[2..].try_into().expect("8")))),
    );
    Ok(())
}

/// Builds the index for `text` into `output` and reports what it did.
pub fn build_index(text: &Text, output: impl AsRef<Path>, config: &BuildConfig) -> Result<BuildReport> {
    let plan = plan_build(text, config)?;
    run_parallel(text, &plan, output, config)
}

/// Runs the workers for `plan` and writes the index.
pub fn run_parallel(text: &Text, plan: &Plan, output: impl AsRef<Path>, config: &BuildConfig) -> Result<BuildReport> {
    let started = Instant::now();
    let output = output.as_ref();
    let threads = config.threads.unwrap_or(config.workers).clamp(1, config.workers.max(1));
    let spill_dir = match &config.spill_dir {
        Some(d) => d.clone(),
        None => match output.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        },
    };
    let outputs = run_workers(text, plan, config, threads, &spill_dir)?;

    let mut located: Vec<Option<(usize, Spilled)>> = vec![None; plan.work.len()];
    for (k, o) in outputs.iter().enumerate() {
        for &(w, s) in &o.items {
            if located[w].replace((k, s)).is_some() {
                return Err(EraError::Consistency(format!("work prefix {w} built twice")));
            }
        }
    }
    if let Some(w) = located.iter().position(|x| x.is_none()) {
        return Err(EraError::Consistency(format!("work prefix {w} never built")));
    }

    let master = MemoryTracker::new();
    let alphabet = text.alphabet();
    let trie = TopTrie::new(alphabet.clone(), &plan.records)?;
    let mut writer = IndexWriter::create(output, text.len(), trie, Some(&master))?;
    let mut records = Vec::with_capacity(plan.records.len());
    let mut merged_records = 0;
    let mut w = 0;
    for (r, rec) in plan.records.iter().enumerate() {
        let first = w;
        while w < plan.work.len() && plan.record_of[w] == r {
            w += 1;
        }
        let parts = first..w;
        let nodes = match located[first].expect("checked above") {
            (k, Spilled::Section { offset, len, crc }) if parts.len() == 1 => {
                let mut f = &outputs[k].spill;
                f.seek(SeekFrom::Start(offset))?;
                writer.write_raw(r, &rec.prefix, &mut f, len, crc)?;
                let mut head = [0u8; 8];
                outputs[k].spill.read_exact_at(&mut head, offset)?;
                u64::from_le_bytes(head)
            }
            _ => {
                merged_records += 1;
                let m = rec.frequency as usize;
                let mut l = Vec::with_capacity(m);
                let mut b = Vec::with_capacity(m.saturating_sub(1));
                let _charge = charge_opt(
                    Some(&master),
                    (l.capacity() * 8 + b.capacity() * std::mem::size_of::<BranchRecord>()) as u64,
                );
                for i in parts.clone() {
                    let (k, s) = located[i].expect("checked above");
                    let Spilled::Sorted { offset, leaves } = s else {
                        return Err(EraError::Consistency(format!(
                            "work prefix {i} was assembled but belongs to a larger record"
                        )));
                    };
                    if i > first {
                        let (p1, p2) = (&plan.work[i - 1].prefix, &plan.work[i].prefix);
                        let lcp = p1.iter().zip(p2.iter()).take_while(|(x, y)| x == y).count();
                        b.push(BranchRecord::new(p1[lcp], p2[lcp], lcp as u64));
                    }
                    read_sorted(&outputs[k].spill, offset, leaves, &mut l, &mut b)?;
                }
                let arena = build_arena(&l, &b, text.len(), &rec.prefix, alphabet, Some(&master))?;
                drop(l);
                drop(b);
                writer.write_arena(r, &arena)?;
                arena.node_count() as u64
            }
        };
        records.push(RecordSummary {
            prefix: String::from_utf8_lossy(&rec.prefix).into_owned(),
            frequency: rec.frequency,
            nodes,
        });
    }
    writer.finish()?;
    let index_bytes = std::fs::metadata(output)?.len();

    let mut groups: Vec<GroupSummary> = outputs.iter().flat_map(|o| o.groups.iter().cloned()).collect();
    groups.sort_by_key(|g| g.id);
    let worker_stats: Vec<WorkerSummary> = outputs
        .iter()
        .map(|o| WorkerSummary { id: o.id, groups: o.groups.len(), stats: o.stats, peak_memory: o.peak })
        .collect();
    let mut build_stats = ScanStats::default();
    for o in &outputs {
        build_stats += o.stats;
    }
    let mut total_stats = plan.census_stats;
    total_stats += build_stats;
    // at most `threads` workers run at once
    let mut peaks: Vec<u64> = outputs.iter().map(|o| o.peak).collect();
    peaks.sort_unstable_by(|a, b| b.cmp(a));
    let workers_peak: u64 = peaks.iter().take(threads).sum();
    let peak_memory = plan.census_peak.max(workers_peak).max(master.peak());
    Ok(BuildReport {
        text_len: text.len(),
        workers: config.workers,
        threads,
        skip_seek: config.skip(),
        node_size: config.node_size,
        budget: plan.budget,
        worker_budget: plan.worker_budget,
        record_f_m: plan.record_f_m,
        work_f_m: plan.work_f_m,
        census_rounds: plan.census_rounds,
        census_stats: plan.census_stats,
        group_count: plan.groups.len(),
        groups,
        records,
        worker_stats,
        build_stats,
        total_stats,
        merged_records,
        peak_memory,
        index_bytes,
        seconds: started.elapsed().as_secs_f64(),
    })
}
