//! Disk-backed sequential access to the input string.
//!
//! A [`Text`] is the string `S` plus its terminal sentinel. If the source
//! does not end with the sentinel byte, one is appended virtually: it is not
//! stored anywhere but occupies position `n` for every reader.
//!
//! [`TextReader`] owns the block buffer (BS) and performs the three kinds of
//! access the builder needs: full sequential scans, one-pass gathers of many
//! short ranges, and direct range reads.

use std::fs::File;
use std::io::Read;
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::alphabet::Alphabet;
use crate::error::{EraError, Result};
use crate::memory::{charge_opt, Charge, MemoryTracker};

pub const DEFAULT_BLOCK_SIZE: usize = 1 << 20;

enum Source {
    Memory(Vec<u8>),
    File { file: File, path: PathBuf },
}

struct TextInner {
    source: Source,
    physical_len: u64,
    len: u64,
    alphabet: Alphabet,
}

/// The input string with its sentinel. Cheap to clone; clones share the
/// underlying file handle or buffer.
#[derive(Clone)]
pub struct Text {
    inner: Arc<TextInner>,
}

impl std::fmt::Debug for Text {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Text").field("len", &self.inner.len).field("path", &self.path()).finish()
    }
}

/// Checks a chunk of raw input that starts at `base` in a file of
/// `total` bytes.
fn validate_chunk(alphabet: &Alphabet, chunk: &[u8], base: u64, total: u64) -> Result<()> {
    let sentinel = alphabet.sentinel();
    for (i, &b) in chunk.iter().enumerate() {
        let off = base + i as u64;
        if b == sentinel {
            if off + 1 != total {
                return Err(EraError::DuplicateSentinel { offset: off });
            }
        } else if !alphabet.contains(b) {
            return Err(EraError::InvalidSymbol { symbol: b, offset: Some(off) });
        }
    }
    Ok(())
}

impl Text {
    /// Wraps an in-memory string, validating every symbol.
    pub fn from_bytes(bytes: impl Into<Vec<u8>>, alphabet: &Alphabet) -> Result<Text> {
        let bytes = bytes.into();
        let total = bytes.len() as u64;
        validate_chunk(alphabet, &bytes, 0, total)?;
        let has_sentinel = bytes.last() == Some(&alphabet.sentinel());
        Ok(Text {
            inner: Arc::new(TextInner {
                physical_len: total,
                len: if has_sentinel { total } else { total + 1 },
                source: Source::Memory(bytes),
                alphabet: alphabet.clone(),
            }),
        })
    }

    /// Opens a file of raw one-byte symbols, validating it with one scan.
    pub fn open(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<Text> {
        let path = path.as_ref();
        let mut file = File::open(path)?;
        let total = file.metadata()?.len();
        let mut buf = vec![0u8; DEFAULT_BLOCK_SIZE];
        let mut base = 0u64;
        let mut last = None;
        loop {
            let got = file.read(&mut buf)?;
            if got == 0 {
                break;
            }
            validate_chunk(alphabet, &buf[..got], base, total)?;
            last = Some(buf[got - 1]);
            base += got as u64;
        }
        if base != total {
            return Err(EraError::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "input changed while reading",
            )));
        }
        let has_sentinel = last == Some(alphabet.sentinel());
        Ok(Text {
            inner: Arc::new(TextInner {
                physical_len: total,
                len: if has_sentinel { total } else { total + 1 },
                source: Source::File { file, path: path.to_path_buf() },
                alphabet: alphabet.clone(),
            }),
        })
    }

    /// `n + 1`: the number of symbols including the sentinel.
    pub fn len(&self) -> u64 {
        self.inner.len
    }

    /// Always false; a text holds at least the sentinel.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.inner.alphabet
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.inner.source {
            Source::File { path, .. } => Some(path),
            Source::Memory(_) => None,
        }
    }

    /// Positioned read of up to `buf.len()` symbols starting at `pos`.
    /// Returns the number of symbols copied (short only at the end of the
    /// text). Safe to call concurrently.
    pub fn read_at(&self, pos: u64, buf: &mut [u8]) -> Result<usize> {
        let inner = &*self.inner;
        if pos >= inner.len {
            return Ok(0);
        }
        let want = (buf.len() as u64).min(inner.len - pos) as usize;
        let physical = if pos < inner.physical_len { ((inner.physical_len - pos) as usize).min(want) } else { 0 };
        if physical > 0 {
            match &inner.source {
                Source::Memory(bytes) => {
                    let p = pos as usize;
                    buf[..physical].copy_from_slice(&bytes[p..p + physical]);
                }
                Source::File { file, .. } => file.read_exact_at(&mut buf[..physical], pos)?,
            }
        }
        if want > physical {
            // only the virtual sentinel can lie past the physical end
            debug_assert_eq!(want - physical, 1);
            buf[physical] = inner.alphabet.sentinel();
        }
        Ok(want)
    }

    /// Symbol at `pos`.
    pub fn symbol_at(&self, pos: u64) -> Result<u8> {
        let mut b = [0u8; 1];
        if self.read_at(pos, &mut b)? == 0 {
            return Err(EraError::OutOfRange { pos, len: self.len() });
        }
        Ok(b[0])
    }

    /// The whole text including the sentinel. Intended for test-scale data.
    pub fn to_vec(&self) -> Result<Vec<u8>> {
        let mut v = vec![0u8; self.len() as usize];
        self.read_at(0, &mut v)?;
        Ok(v)
    }
}

/// Counters for the I/O issued through one [`TextReader`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanStats {
    /// Full passes over the text: sequential scans plus gathers.
    pub passes: u64,
    pub blocks_read: u64,
    pub blocks_skipped: u64,
    pub seeks: u64,
}

impl std::ops::AddAssign for ScanStats {
    fn add_assign(&mut self, o: ScanStats) {
        self.passes += o.passes;
        self.blocks_read += o.blocks_read;
        self.blocks_skipped += o.blocks_skipped;
        self.seeks += o.seeks;
    }
}

/// Block-buffered reader over a [`Text`]. One per worker.
pub struct TextReader {
    text: Text,
    block_size: usize,
    block: Vec<u8>,
    block_charge: Charge,
    tracker: Option<Arc<MemoryTracker>>,
    position: u64,
    stats: ScanStats,
    block_trace: Option<Vec<Vec<u64>>>,
}

impl std::fmt::Debug for TextReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TextReader")
            .field("text", &self.text)
            .field("block_size", &self.block_size)
            .field("position", &self.position)
            .field("stats", &self.stats)
            .finish()
    }
}

impl TextReader {
    pub fn new(text: Text, block_size: usize) -> Result<Self> {
        if block_size == 0 {
            return Err(EraError::Precondition("block size must be positive".into()));
        }
        Ok(TextReader {
            text,
            block_size,
            block: Vec::new(),
            block_charge: Charge::none(),
            tracker: None,
            position: 0,
            stats: ScanStats::default(),
            block_trace: None,
        })
    }

    /// Charges the block buffer against `tracker` from now on.
    pub fn with_tracker(mut self, tracker: Arc<MemoryTracker>) -> Self {
        self.block_charge = tracker.charge(self.block.capacity() as u64);
        self.tracker = Some(tracker);
        self
    }

    /// Records the offset of every block fetched by [`gather_ranges`],
    /// one list per pass.
    ///
    /// [`gather_ranges`]: TextReader::gather_ranges
    pub fn enable_block_trace(&mut self) {
        self.block_trace = Some(Vec::new());
    }

    pub fn block_trace(&self) -> Option<&[Vec<u64>]> {
        self.block_trace.as_deref()
    }

    pub fn text(&self) -> &Text {
        &self.text
    }

    pub fn len(&self) -> u64 {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn stats(&self) -> ScanStats {
        self.stats
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Releases the block buffer; it is reallocated on the next access.
    pub fn release_buffer(&mut self) {
        self.block = Vec::new();
        self.block_charge = Charge::none();
    }

    fn ensure_buffer(&mut self, size: usize) {
        if self.block.len() < size {
            self.block.resize(size, 0);
            self.block_charge = charge_opt(self.tracker.as_ref(), 0);
            self.block_charge.resize(self.block.capacity() as u64);
        }
    }

    /// Reads `len` symbols starting at `pos`, truncated at the end of the
    /// text.
    pub fn read_range(&mut self, pos: u64, len: usize) -> Result<Vec<u8>> {
        let total = self.text.len();
        if pos >= total {
            return Err(EraError::OutOfRange { pos, len: total });
        }
        let take = (len as u64).min(total - pos) as usize;
        let mut out = vec![0u8; take];
        self.text.read_at(pos, &mut out)?;
        self.position = pos + take as u64;
        Ok(out)
    }

    /// One sequential pass over the whole text. `f(base, chunk, core)` is
    /// called once per block: `chunk` starts at text offset `base`, its first
    /// `core` symbols belong to the block and up to `lookahead` further
    /// symbols follow so that windows may cross the block boundary.
    pub fn scan<F>(&mut self, lookahead: usize, mut f: F) -> Result<()>
    where
        F: FnMut(u64, &[u8], usize),
    {
        let total = self.text.len();
        let bs = self.block_size as u64;
        self.ensure_buffer(self.block_size + lookahead);
        self.stats.passes += 1;
        let mut base = 0u64;
        while base < total {
            let core = bs.min(total - base) as usize;
            let want = (core + lookahead).min((total - base) as usize);
            let got = self.text.read_at(base, &mut self.block[..want])?;
            debug_assert_eq!(got, want);
            self.stats.blocks_read += 1;
            f(base, &self.block[..want], core);
            base += bs;
        }
        self.position = total;
        Ok(())
    }

    /// Fills every request `(pos, len)` in one pass over the text, visiting
    /// blocks in ascending order. Requests must be sorted by position; each
    /// is truncated at the end of the text. The sink receives
    /// `(request index, offset within request, symbols)` pieces in block
    /// order.
    ///
    /// With `skip` set, every maximal run of blocks holding no requested
    /// symbol is jumped over with a single seek instead of being read.
    pub fn gather_ranges<F>(&mut self, requests: &[(u64, usize)], skip: bool, mut sink: F) -> Result<()>
    where
        F: FnMut(usize, usize, &[u8]),
    {
        let total = self.text.len();
        let mut last_end = 0u64;
        let mut prev = 0u64;
        for &(pos, len) in requests {
            if pos < prev {
                return Err(EraError::Precondition(format!(
                    "gather requests must be sorted by position ({pos} after {prev})"
                )));
            }
            if pos >= total {
                return Err(EraError::OutOfRange { pos, len: total });
            }
            prev = pos;
            if len > 0 {
                last_end = last_end.max(pos + (len as u64).min(total - pos));
            }
        }
        if requests.is_empty() {
            return Ok(());
        }
        self.stats.passes += 1;
        if let Some(trace) = &mut self.block_trace {
            trace.push(Vec::new());
        }
        if last_end == 0 {
            return Ok(());
        }

        let bs = self.block_size as u64;
        let last_block = (last_end - 1) / bs;
        self.ensure_buffer(self.block_size);

        let end_of = |(pos, len): (u64, usize)| pos + (len as u64).min(total - pos);
        let mut next = 0usize;
        let mut open: Vec<usize> = Vec::new();
        let mut b = 0u64;
        while b <= last_block {
            let bstart = b * bs;
            let bend = (bstart + bs).min(total);
            while next < requests.len() && (requests[next].1 == 0 || end_of(requests[next]) <= bstart) {
                // empty, or wholly inside blocks already passed (cannot
                // happen for sorted input, kept for zero-length requests)
                next += 1;
            }
            let needed = !open.is_empty() || (next < requests.len() && requests[next].0 < bend);
            if !needed {
                if skip {
                    // no open request, so the next one decides where to land
                    let target = requests[next].0 / bs;
                    self.stats.blocks_skipped += target - b;
                    self.stats.seeks += 1;
                    b = target;
                    continue;
                }
                let n = (bend - bstart) as usize;
                self.text.read_at(bstart, &mut self.block[..n])?;
                self.stats.blocks_read += 1;
                if let Some(trace) = &mut self.block_trace {
                    trace.last_mut().expect("pass started").push(bstart);
                }
                b += 1;
                continue;
            }

            let n = (bend - bstart) as usize;
            self.text.read_at(bstart, &mut self.block[..n])?;
            self.stats.blocks_read += 1;
            if let Some(trace) = &mut self.block_trace {
                trace.last_mut().expect("pass started").push(bstart);
            }
            while next < requests.len() && requests[next].0 < bend {
                if requests[next].1 > 0 {
                    open.push(next);
                }
                next += 1;
            }
            let block = &self.block[..n];
            open.retain(|&r| {
                let (pos, _) = requests[r];
                let end = end_of(requests[r]);
                let from = pos.max(bstart);
                let to = end.min(bend);
                if from < to {
                    sink(r, (from - pos) as usize, &block[(from - bstart) as usize..(to - bstart) as usize]);
                }
                end > bend
            });
            b += 1;
        }
        self.position = (last_block + 1) * bs;
        Ok(())
    }

    /// [`gather_ranges`](TextReader::gather_ranges) collecting each request
    /// into its own buffer.
    pub fn gather_ranges_vec(&mut self, requests: &[(u64, usize)], skip: bool) -> Result<Vec<Vec<u8>>> {
        let total = self.text.len();
        let mut out: Vec<Vec<u8>> = requests
            .iter()
            .map(|&(pos, len)| Vec::with_capacity((len as u64).min(total.saturating_sub(pos)) as usize))
            .collect();
        self.gather_ranges(requests, skip, |r, off, piece| {
            debug_assert_eq!(out[r].len(), off);
            out[r].extend_from_slice(piece);
        })?;
        Ok(out)
    }
}

/// Opens `path` as a text over `alphabet` with the default block size.
pub fn open_text(path: impl AsRef<Path>, alphabet: &Alphabet) -> Result<TextReader> {
    TextReader::new(Text::open(path, alphabet)?, DEFAULT_BLOCK_SIZE)
}
