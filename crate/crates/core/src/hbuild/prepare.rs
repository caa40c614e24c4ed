//! Leaf sorting by repeated range fills.
//!
//! Each iteration reads the next `range` symbols of every still-ambiguous
//! suffix in one pass over the text, sorts each active area by what was
//! read, records branch triplets wherever neighbours now differ, and moves
//! the depth forward by `range`.

use std::sync::Arc;

use serde::Serialize;

use crate::alphabet::Alphabet;
use crate::error::{EraError, Result};
use crate::memory::{charge_opt, Charge, MemoryTracker};
use crate::textio::TextReader;
use crate::tree::BranchRecord;

/// Marks finished entries in `I` and `A`, and unfilled entries in `R`.
pub const DONE: u32 = u32::MAX;
const UNDEF: u64 = u64::MAX;

/// How many symbols each active suffix reads per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RangePolicy {
    /// `r_capacity / active` symbols, at least one.
    Elastic {
        r_capacity: u64,
    },
    Fixed(u64),
}

/// Symbols to prefetch per active suffix so that all of them fit in
/// `r_capacity` symbols.
pub fn elastic_range(r_capacity: u64, active_count: u64) -> u64 {
    assert!(active_count > 0, "range requested with no active entries");
    (r_capacity / active_count).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PrepConfig {
    pub policy: RangePolicy,
    pub skip: bool,
}

/// Copy of one member's working arrays after an iteration. `None` stands
/// for done (in `i`, `a`), not read this iteration (`r`) or undefined (`b`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepSnapshot {
    pub member: usize,
    pub iteration: u32,
    /// Depth at which this iteration started reading.
    pub start: u64,
    pub range: u64,
    pub i: Vec<Option<u32>>,
    pub a: Vec<Option<u32>>,
    pub r: Vec<Option<Vec<u8>>>,
    pub p: Vec<u32>,
    pub l: Vec<u64>,
    pub b: Vec<Option<BranchRecord>>,
}

/// Sorted leaves and the `|L| - 1` branch triplets between neighbours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrepOutput {
    pub l: Vec<u64>,
    pub b: Vec<BranchRecord>,
    /// Fill passes this prefix took part in.
    pub passes: u64,
    /// Range used in each of those passes.
    pub ranges: Vec<u64>,
}

/// Working state of one prefix.
#[derive(Debug)]
pub struct PrepState {
    prefix_ranks: Vec<u8>,
    start: u64,
    l: Vec<u64>,
    b: Vec<BranchRecord>,
    i: Vec<u32>,
    a: Vec<u32>,
    p: Vec<u32>,
    r: Vec<u32>,
    next_tag: u32,
    active: usize,
    passes: u64,
    ranges: Vec<u64>,
    first: bool,
    _lb_charge: Charge,
    _work_charge: Charge,
}

/// Read-only view of the symbols gathered in one pass.
struct Fill<'a> {
    arena: &'a [u8],
    stride: usize,
    requests: &'a [(u64, usize)],
    text_len: u64,
    /// Leading symbols of each request that were the verified prefix.
    skip: usize,
    /// The member's range.
    width: usize,
}

impl Fill<'_> {
    fn slot(&self, k: u32) -> &[u8] {
        let k = k as usize;
        let pos = self.requests[k].0 + self.skip as u64;
        let len = (self.width as u64).min(self.text_len.saturating_sub(pos)) as usize;
        &self.arena[k * self.stride..k * self.stride + len]
    }
}

fn undefined() -> BranchRecord {
    BranchRecord::new(0, 0, UNDEF)
}

fn is_def(b: &BranchRecord) -> bool {
    b.offset != UNDEF
}

/// Reorders `l`, `p`, `r` in `[s, s + perm.len())` so that new entry
/// `s + k` is old entry `s + perm[k]`, following cycles in place.
fn permute(perm: &mut [u32], s: usize, l: &mut [u64], p: &mut [u32], r: &mut [u32]) {
    for k in 0..perm.len() {
        if perm[k] == DONE || perm[k] as usize == k {
            continue;
        }
        let tmp = (l[s + k], p[s + k], r[s + k]);
        let mut j = k;
        loop {
            let nxt = perm[j] as usize;
            perm[j] = DONE;
            if nxt == k {
                (l[s + j], p[s + j], r[s + j]) = tmp;
                break;
            }
            l[s + j] = l[s + nxt];
            p[s + j] = p[s + nxt];
            r[s + j] = r[s + nxt];
            j = nxt;
        }
    }
}

impl PrepState {
    /// Starts with the occurrences of `prefix` in text order; they must be
    /// strictly ascending positions inside a text of `text_len` symbols.
    pub fn new(
        prefix: &[u8],
        occurrences: Vec<u64>,
        alphabet: &Alphabet,
        text_len: u64,
        tracker: Option<&Arc<MemoryTracker>>,
    ) -> Result<Self> {
        let m = occurrences.len();
        if m == 0 {
            return Err(EraError::Consistency(format!(
                "no occurrences given for {:?}",
                String::from_utf8_lossy(prefix)
            )));
        }
        if m >= DONE as usize {
            return Err(EraError::Precondition(format!("{m} occurrences exceed the index width")));
        }
        if occurrences.windows(2).any(|w| w[0] >= w[1]) {
            return Err(EraError::Consistency("occurrences are not strictly ascending".into()));
        }
        if occurrences[m - 1] >= text_len {
            return Err(EraError::Consistency(format!(
                "occurrence {} lies past the text end {text_len}",
                occurrences[m - 1]
            )));
        }
        let prefix_ranks = prefix.iter().map(|&s| alphabet.rank(s)).collect::<Result<Vec<u8>>>()?;
        let lb_charge = charge_opt(tracker, (m * (8 + std::mem::size_of::<BranchRecord>())) as u64);
        let work_charge = charge_opt(tracker, (m * 16) as u64);
        let single = m == 1;
        let a = if single { vec![DONE] } else { vec![0; m] };
        let i = if single { vec![DONE] } else { (0..m as u32).collect() };
        Ok(PrepState {
            start: prefix.len() as u64,
            prefix_ranks,
            l: occurrences,
            b: vec![undefined(); m],
            i,
            a,
            p: (0..m as u32).collect(),
            r: vec![DONE; m],
            next_tag: 1,
            active: if single { 0 } else { m },
            passes: 0,
            ranges: Vec::new(),
            first: true,
            _lb_charge: lb_charge,
            _work_charge: work_charge,
        })
    }

    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.active
    }

    pub fn is_finished(&self) -> bool {
        self.active == 0
    }

    /// Current depth offset.
    pub fn start(&self) -> u64 {
        self.start
    }

    fn skip(&self) -> usize {
        if self.first {
            self.prefix_ranks.len()
        } else {
            0
        }
    }

    /// Positions and lengths this member reads next, in text order.
    fn requests(&self, range: u64) -> impl Iterator<Item = (u64, usize)> + '_ {
        let skip = self.skip() as u64;
        let start = self.start - skip;
        self.i.iter().filter(|&&j| j != DONE).map(move |&j| (self.l[j as usize] + start, (skip + range) as usize))
    }

    fn snapshot(&self, member: usize, range: u64, fill: &Fill<'_>, alphabet: &Alphabet) -> PrepSnapshot {
        let opt = |x: u32| (x != DONE).then_some(x);
        PrepSnapshot {
            member,
            iteration: self.passes as u32,
            start: self.start - range,
            range,
            i: self.i.iter().map(|&x| opt(x)).collect(),
            a: self.a.iter().map(|&x| opt(x)).collect(),
            r: self
                .r
                .iter()
                .map(|&k| (k != DONE).then(|| fill.slot(k).iter().map(|&x| alphabet.symbol(x)).collect()))
                .collect(),
            p: self.p.clone(),
            l: self.l.clone(),
            b: self.b.iter().map(|b| is_def(b).then_some(*b)).collect(),
        }
    }

    /// Sorts every active area by the symbols just read and updates `B`,
    /// `A`, `I` and the depth.
    fn finish_iteration(&mut self, range: u64, fill: &Fill<'_>, alphabet: &Alphabet) -> Result<()> {
        let m = self.l.len();
        let mut j = 0usize;
        let mut perm: Vec<u32> = Vec::new();
        while j < m {
            let tag = self.a[j];
            if tag == DONE {
                j += 1;
                continue;
            }
            let s = j;
            while j < m && self.a[j] == tag {
                j += 1;
            }
            let e = j;
            perm.clear();
            perm.extend(0..(e - s) as u32);
            {
                let r = &self.r;
                perm.sort_by(|&x, &y| fill.slot(r[s + x as usize]).cmp(fill.slot(r[s + y as usize])));
            }
            permute(&mut perm, s, &mut self.l, &mut self.p, &mut self.r);
            for k in s..e {
                self.i[self.p[k] as usize] = k as u32;
            }
            let mut run_start = s;
            for k in s + 1..=e {
                let same = k < e && fill.slot(self.r[k - 1]) == fill.slot(self.r[k]);
                if same {
                    continue;
                }
                if k < e {
                    let (x, y) = (fill.slot(self.r[k - 1]), fill.slot(self.r[k]));
                    let cs = x.iter().zip(y).take_while(|(a, b)| a == b).count();
                    if cs >= x.len() || cs >= y.len() {
                        return Err(EraError::Consistency(format!(
                            "suffixes {} and {} are not distinguishable",
                            self.l[k - 1],
                            self.l[k]
                        )));
                    }
                    self.b[k] =
                        BranchRecord::new(alphabet.symbol(x[cs]), alphabet.symbol(y[cs]), self.start + cs as u64);
                }
                if k - run_start >= 2 {
                    let tag = self.next_tag;
                    self.next_tag = self.next_tag.checked_add(1).filter(|&t| t != DONE).unwrap_or(1);
                    for t in run_start..k {
                        self.a[t] = tag;
                    }
                }
                run_start = k;
            }
        }
        for j in 0..m {
            if self.a[j] == DONE {
                continue;
            }
            let left = j == 0 || is_def(&self.b[j]);
            let right = j + 1 == m || is_def(&self.b[j + 1]);
            if left && right {
                self.a[j] = DONE;
                self.i[self.p[j] as usize] = DONE;
                self.active -= 1;
            }
        }
        self.start += range;
        self.first = false;
        self.passes += 1;
        self.ranges.push(range);
        Ok(())
    }

    /// Releases the working arrays and returns `L` and `B`.
    pub fn into_output(mut self) -> PrepOutput {
        if self.active > 0 {
            log::warn!("prepare output taken with {} entries still active", self.active);
        }
        self.i = Vec::new();
        self.a = Vec::new();
        self.p = Vec::new();
        self.r = Vec::new();
        self._work_charge = Charge::none();
        let mut b = std::mem::take(&mut self.b);
        b.remove(0);
        PrepOutput { l: std::mem::take(&mut self.l), b, passes: self.passes, ranges: std::mem::take(&mut self.ranges) }
    }
}

/// Called after every iteration with each participating member's state.
pub type TraceHook<'a> = &'a mut dyn FnMut(&PrepSnapshot);

/// Runs the members' iterations together: each pass over the text serves
/// the union of their requests, and `R` is shared in proportion to their
/// active counts.
pub fn prepare_lockstep(
    reader: &mut TextReader,
    states: &mut [PrepState],
    config: &PrepConfig,
    tracker: Option<&Arc<MemoryTracker>>,
    mut hook: Option<TraceHook<'_>>,
) -> Result<()> {
    let text_len = reader.len();
    let alphabet = reader.text().alphabet().clone();
    loop {
        let total_active: u64 = states.iter().map(|s| s.active_count() as u64).sum();
        if total_active == 0 {
            return Ok(());
        }
        let ranges: Vec<u64> = states
            .iter()
            .map(|s| {
                let a = s.active_count() as u64;
                if a == 0 {
                    return 0;
                }
                match config.policy {
                    RangePolicy::Fixed(r) => r.max(1),
                    RangePolicy::Elastic { r_capacity } => {
                        let share = (r_capacity as u128 * a as u128 / total_active as u128) as u64;
                        elastic_range(share, a)
                    }
                }
            })
            .collect();
        let stride = *ranges.iter().max().expect("members") as usize;

        // merged requests in text order, remembering the owner of each
        let mut requests: Vec<(u64, usize)> = Vec::with_capacity(total_active as usize);
        let mut owner: Vec<u32> = Vec::new();
        let live: Vec<usize> = (0..states.len()).filter(|&k| states[k].active_count() > 0).collect();
        if live.len() == 1 {
            requests.extend(states[live[0]].requests(ranges[live[0]]));
        } else {
            let mut tagged: Vec<(u64, usize, u32)> = Vec::with_capacity(total_active as usize);
            for &k in &live {
                tagged.extend(states[k].requests(ranges[k]).map(|(p, l)| (p, l, k as u32)));
            }
            tagged.sort_by_key(|t| t.0);
            requests.extend(tagged.iter().map(|t| (t.0, t.1)));
            owner.extend(tagged.iter().map(|t| t.2));
        }
        let owner_of = |k: usize| if owner.is_empty() { live[0] } else { owner[k] as usize };
        let _req_charge = charge_opt(tracker, (requests.capacity() * 16 + owner.capacity() * 4) as u64);

        let mut arena = vec![0u8; requests.len() * stride];
        let _arena_charge = charge_opt(tracker, arena.len() as u64);
        let mut bad: Option<usize> = None;
        {
            let states_ref = &*states;
            reader.gather_ranges(&requests, config.skip, |k, off, piece| {
                let st = &states_ref[owner_of(k)];
                let skip = st.skip();
                let mut off = off;
                let mut piece = piece;
                if off < skip {
                    let n = (skip - off).min(piece.len());
                    let want = &st.prefix_ranks[off..off + n];
                    if piece[..n].iter().zip(want).any(|(&s, &w)| alphabet.rank_unchecked(s) != w) {
                        bad.get_or_insert(k);
                    }
                    off += n;
                    piece = &piece[n..];
                    if piece.is_empty() {
                        return;
                    }
                }
                let dst = k * stride + (off - skip);
                for (d, &s) in arena[dst..dst + piece.len()].iter_mut().zip(piece) {
                    *d = alphabet.rank_unchecked(s);
                }
            })?;
        }
        // a read that ended inside the prefix
        for (k, &(pos, _)) in requests.iter().enumerate() {
            let skip = states[owner_of(k)].skip() as u64;
            if pos + skip > text_len {
                bad.get_or_insert(k);
            }
        }
        if let Some(k) = bad {
            let st = &states[owner_of(k)];
            let prefix: Vec<u8> = st.prefix_ranks.iter().map(|&r| alphabet.symbol(r)).collect();
            return Err(EraError::Consistency(format!(
                "position {} does not start with {:?}",
                requests[k].0,
                String::from_utf8_lossy(&prefix)
            )));
        }

        // hand each member its slots: members' requests appear in their own
        // text order within the merged list
        let mut cursor: Vec<usize> = vec![0; states.len()];
        for st in states.iter_mut() {
            st.r.iter_mut().for_each(|x| *x = DONE);
        }
        let mut order: Vec<Vec<u32>> =
            live.iter().map(|&k| states[k].i.iter().copied().filter(|&j| j != DONE).collect()).collect();
        let mut li_of = vec![0usize; states.len()];
        for (li, &m) in live.iter().enumerate() {
            li_of[m] = li;
        }
        for k in 0..requests.len() {
            let m = owner_of(k);
            let j = order[li_of[m]][cursor[m]];
            cursor[m] += 1;
            states[m].r[j as usize] = k as u32;
        }
        order.clear();

        for &m in &live {
            let fill = Fill {
                arena: &arena,
                stride,
                requests: &requests,
                text_len,
                skip: states[m].skip(),
                width: ranges[m] as usize,
            };
            states[m].finish_iteration(ranges[m], &fill, &alphabet)?;
            if let Some(h) = hook.as_deref_mut() {
                h(&states[m].snapshot(m, ranges[m], &fill, &alphabet));
            }
        }
    }
}

/// Sorts the occurrences of one prefix, returning `L` and `B`.
pub fn prepare_subtree(
    reader: &mut TextReader,
    prefix: &[u8],
    occurrences: Vec<u64>,
    config: &PrepConfig,
    tracker: Option<&Arc<MemoryTracker>>,
    hook: Option<TraceHook<'_>>,
) -> Result<PrepOutput> {
    let alphabet = reader.text().alphabet().clone();
    let mut states = vec![PrepState::new(prefix, occurrences, &alphabet, reader.len(), tracker)?];
    prepare_lockstep(reader, &mut states, config, tracker, hook)?;
    Ok(states.pop().expect("one state").into_output())
}
