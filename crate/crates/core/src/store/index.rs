use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::alphabet::Alphabet;
use crate::error::{EraError, Result};
use crate::hbuild::TreeArena;
use crate::memory::{charge_opt, Charge, MemoryTracker};
use crate::store::format::{decode_section, encode_node, Header, SectionEntry, VERSION};
use crate::store::trie::{Route, TopTrie};
use crate::textio::Text;
use crate::tree::{EdgeLabel, Node, SubTree};

const WRITE_BUFFER: usize = 64 * 1024;

/// Counts and checksums everything written through it.
pub struct CrcWriter<W> {
    inner: W,
    hasher: crc32fast::Hasher,
    written: u64,
}

impl<W: Write> CrcWriter<W> {
    pub fn new(inner: W) -> Self {
        CrcWriter { inner, hasher: crc32fast::Hasher::new(), written: 0 }
    }

    /// Bytes written and their CRC-32 since creation.
    pub fn finish(self) -> (W, u64, u32) {
        (self.inner, self.written, self.hasher.finalize())
    }
}

impl<W: Write> Write for CrcWriter<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.written += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes one section for `arena`, returning its length and checksum.
pub fn write_arena_section<W: Write>(w: &mut W, arena: &TreeArena) -> Result<(u64, u32)> {
    let mut cw = CrcWriter::new(w);
    cw.write_all(&(arena.node_count() as u64).to_le_bytes())?;
    arena.for_each_preorder(|n| Ok(encode_node(&mut cw, n)?))?;
    let (_, len, crc) = cw.finish();
    Ok((len, crc))
}

/// Writes one section for `tree`, returning its length and checksum.
pub fn write_tree_section<W: Write>(w: &mut W, tree: &SubTree) -> Result<(u64, u32)> {
    let mut cw = CrcWriter::new(w);
    cw.write_all(&(tree.nodes.len() as u64).to_le_bytes())?;
    for n in &tree.nodes {
        encode_node(&mut cw, n)?;
    }
    let (_, len, crc) = cw.finish();
    Ok((len, crc))
}

/// Streams an index file: header first with a placeholder section table,
/// then sections in record order, then the finished header. The file is
/// written under a temporary name and renamed into place by
/// [`finish`](IndexWriter::finish).
pub struct IndexWriter {
    out: BufWriter<File>,
    tmp: PathBuf,
    path: PathBuf,
    header: Header,
    next: usize,
    pos: u64,
    _charge: Charge,
}

impl IndexWriter {
    pub fn create(
        path: impl AsRef<Path>,
        text_len: u64,
        trie: TopTrie,
        tracker: Option<&Arc<MemoryTracker>>,
    ) -> Result<Self> {
        if trie.total_frequency() != text_len {
            return Err(EraError::Precondition(format!(
                "trie covers {} suffixes, text has {text_len}",
                trie.total_frequency()
            )));
        }
        let path = path.as_ref().to_path_buf();
        let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".partial");
        let tmp = path.with_file_name(name);
        let header = Header {
            text_len,
            alphabet: trie.alphabet().clone(),
            sections: vec![SectionEntry::default(); trie.len()],
            trie,
        };
        let charge = charge_opt(tracker, WRITE_BUFFER as u64 + header.trie.heap_size());
        let mut out = BufWriter::with_capacity(WRITE_BUFFER, File::create(&tmp)?);
        let placeholder = header.encode();
        out.write_all(&placeholder)?;
        Ok(IndexWriter { out, tmp, path, pos: placeholder.len() as u64, header, next: 0, _charge: charge })
    }

    pub fn trie(&self) -> &TopTrie {
        &self.header.trie
    }

    fn claim(&mut self, record: usize, prefix: &[u8]) -> Result<()> {
        if record != self.next {
            return Err(EraError::Precondition(format!(
                "record {record} written out of order, expected {}",
                self.next
            )));
        }
        let want = &self
            .header
            .trie
            .entries()
            .get(record)
            .ok_or_else(|| EraError::Precondition(format!("record {record} is not in the trie")))?
            .prefix;
        if want != prefix {
            return Err(EraError::Precondition(format!(
                "record {record} is {:?}, got a tree for {:?}",
                String::from_utf8_lossy(want),
                String::from_utf8_lossy(prefix)
            )));
        }
        Ok(())
    }

    fn record(&mut self, len: u64, crc: u32) {
        self.header.sections[self.next] = SectionEntry { offset: self.pos, length: len, crc };
        self.pos += len;
        self.next += 1;
    }

    pub fn write_arena(&mut self, record: usize, arena: &TreeArena) -> Result<()> {
        self.claim(record, arena.prefix())?;
        let (len, crc) = write_arena_section(&mut self.out, arena)?;
        self.record(len, crc);
        Ok(())
    }

    pub fn write_subtree(&mut self, record: usize, tree: &SubTree) -> Result<()> {
        self.claim(record, &tree.prefix)?;
        let (len, crc) = write_tree_section(&mut self.out, tree)?;
        self.record(len, crc);
        Ok(())
    }

    /// Copies an already serialized section of `len` bytes.
    pub fn write_raw(&mut self, record: usize, prefix: &[u8], src: &mut impl Read, len: u64, crc: u32) -> Result<()> {
        self.claim(record, prefix)?;
        let copied = io::copy(&mut src.take(len), &mut self.out)?;
        if copied != len {
            return Err(EraError::Consistency(format!("section {record}: copied {copied} of {len} bytes")));
        }
        self.record(len, crc);
        Ok(())
    }

    /// Writes the final header and moves the file into place.
    pub fn finish(self) -> Result<()> {
        if self.next != self.header.sections.len() {
            return Err(EraError::Precondition(format!(
                "{} of {} sections written",
                self.next,
                self.header.sections.len()
            )));
        }
        let mut file = self.out.into_inner().map_err(|e| e.into_error())?;
        file.seek(SeekFrom::Start(0))?;
        file.write_all(&self.header.encode())?;
        file.sync_all()?;
        drop(file);
        fs::rename(&self.tmp, &self.path)?;
        Ok(())
    }
}

/// Writes a complete index from in-memory trees, one per trie entry in
/// record order.
pub fn write_index(path: impl AsRef<Path>, text_len: u64, trie: TopTrie, trees: &[SubTree]) -> Result<()> {
    if trees.len() != trie.len() {
        return Err(EraError::Precondition(format!("{} trees for {} trie entries", trees.len(), trie.len())));
    }
    let mut w = IndexWriter::create(path, text_len, trie, None)?;
    for (i, t) in trees.iter().enumerate() {
        w.write_subtree(i, t)?;
    }
    w.finish()
}

/// An opened index file. Queries that look at edge labels need the text
/// attached with [`attach_text`](Index::attach_text).
#[derive(Debug)]
pub struct Index {
    path: PathBuf,
    file: File,
    file_len: u64,
    header_len: u64,
    header: Header,
    text: Option<Text>,
}

/// Opens `path`, checking the header, the section table against the file
/// size and every section checksum.
pub fn open_index(path: impl AsRef<Path>) -> Result<Index> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path)?;
    let file_len = file.metadata()?.len();
    let mut r = BufReader::new(&file);
    let header = Header::decode(&mut r, file_len)?;
    let header_len = header.encoded_len();
    let mut expect = header_len;
    for (i, s) in header.sections.iter().enumerate() {
        if s.offset != expect || s.length < 8 {
            return Err(EraError::CorruptIndex(format!("section {i} is not where the table says")));
        }
        expect = s.offset.checked_add(s.length).ok_or_else(|| EraError::CorruptIndex("section length".into()))?;
    }
    if expect != file_len {
        return Err(EraError::CorruptIndex(format!("sections end at {expect}, file has {file_len} bytes")));
    }
    let mut buf = vec![0u8; 1 << 16];
    for (i, s) in header.sections.iter().enumerate() {
        let mut h = crc32fast::Hasher::new();
        let mut at = s.offset;
        let end = s.offset + s.length;
        while at < end {
            let n = ((end - at) as usize).min(buf.len());
            file.read_exact_at(&mut buf[..n], at)?;
            h.update(&buf[..n]);
            at += n as u64;
        }
        if h.finalize() != s.crc {
            return Err(EraError::CorruptIndex(format!("section {i} checksum mismatch")));
        }
    }
    Ok(Index { path, file, file_len, header_len, header, text: None })
}

/// Per node, the index one past its last descendant.
fn subtree_ends(nodes: &[Node]) -> Vec<usize> {
    let mut end = vec![0usize; nodes.len()];
    for i in (0..nodes.len()).rev() {
        let mut c = i + 1;
        for _ in 0..nodes[i].child_count {
            c = end[c];
        }
        end[i] = c;
    }
    end
}

impl Index {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn version(&self) -> u32 {
        VERSION
    }

    pub fn file_len(&self) -> u64 {
        self.file_len
    }

    /// Bytes before the first section.
    pub fn header_len(&self) -> u64 {
        self.header_len
    }

    pub fn text_len(&self) -> u64 {
        self.header.text_len
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.header.alphabet
    }

    pub fn trie(&self) -> &TopTrie {
        &self.header.trie
    }

    pub fn sections(&self) -> &[SectionEntry] {
        &self.header.sections
    }

    pub fn text(&self) -> Option<&Text> {
        self.text.as_ref()
    }

    /// Attaches the indexed text; it must have the recorded length and
    /// alphabet.
    pub fn attach_text(&mut self, text: Text) -> Result<()> {
        let a = text.alphabet();
        if a.base_symbols() != self.alphabet().base_symbols() || a.sentinel() != self.alphabet().sentinel() {
            return Err(EraError::Precondition("text alphabet differs from the index alphabet".into()));
        }
        if text.len() != self.text_len() {
            return Err(EraError::Precondition(format!(
                "text has {} symbols, index was built over {}",
                text.len(),
                self.text_len()
            )));
        }
        self.text = Some(text);
        Ok(())
    }

    fn require_text(&self) -> Result<&Text> {
        self.text.as_ref().ok_or_else(|| EraError::Precondition("this query needs the text attached".into()))
    }

    /// Raw bytes of section `record`.
    pub fn section_bytes(&self, record: usize) -> Result<Vec<u8>> {
        let s = self.sections().get(record).ok_or_else(|| EraError::Precondition(format!("no record {record}")))?;
        let mut buf = vec![0u8; s.length as usize];
        self.file.read_exact_at(&mut buf, s.offset)?;
        if crc32fast::hash(&buf) != s.crc {
            return Err(EraError::CorruptIndex(format!("section {record} checksum mismatch")));
        }
        Ok(buf)
    }

    /// Node count of section `record`, read from its first field.
    pub fn node_count(&self, record: usize) -> Result<u64> {
        let s = self.sections().get(record).ok_or_else(|| EraError::Precondition(format!("no record {record}")))?;
        let mut b = [0u8; 8];
        self.file.read_exact_at(&mut b, s.offset)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn load_subtree(&self, record: usize) -> Result<SubTree> {
        let nodes = decode_section(&self.section_bytes(record)?)?;
        let tree = SubTree { prefix: self.trie().entries()[record].prefix.clone(), nodes };
        tree.walk().map_err(|e| EraError::CorruptIndex(format!("section {record}: {e}")))?;
        Ok(tree)
    }

    /// Suffixes starting with `pattern`, in lexicographic order.
    pub fn enumerate_prefix(&self, pattern: &[u8]) -> Result<Vec<u64>> {
        if pattern.is_empty() {
            return self.enumerate_suffixes().collect();
        }
        self.alphabet().check(pattern)?;
        match self.trie().route(pattern) {
            Route::Nowhere => Ok(Vec::new()),
            Route::Entries(range) => {
                let mut out = Vec::new();
                for r in range {
                    out.extend(self.load_subtree(r)?.leaves());
                }
                Ok(out)
            }
            Route::Inside(r) => {
                let tree = self.load_subtree(r)?;
                self.descend(&tree, pattern)
            }
        }
    }

    fn descend(&self, tree: &SubTree, pattern: &[u8]) -> Result<Vec<u64>> {
        let text = self.require_text()?;
        let nodes = &tree.nodes;
        let end = subtree_ends(nodes);
        let mut node = 0usize;
        let mut matched = 0usize;
        let mut buf = Vec::new();
        while matched < pattern.len() {
            let mut c = node + 1;
            let mut next = None;
            for _ in 0..nodes[node].child_count {
                if text.symbol_at(nodes[c].start)? == pattern[matched] {
                    next = Some(c);
                    break;
                }
                c = end[c];
            }
            let Some(child) = next else {
                return Ok(Vec::new());
            };
            let n = &nodes[child];
            let take = (n.label_len() as usize).min(pattern.len() - matched);
            buf.resize(take, 0);
            text.read_at(n.start, &mut buf)?;
            if buf[..] != pattern[matched..matched + take] {
                return Ok(Vec::new());
            }
            matched += n.label_len() as usize;
            node = child;
        }
        Ok(nodes[node..end[node]].iter().filter_map(|n| n.suffix_offset()).collect())
    }

    /// Sorted positions where `pattern` occurs.
    pub fn find(&self, pattern: &[u8]) -> Result<Vec<u64>> {
        if pattern.is_empty() {
            return Err(EraError::Precondition("empty pattern".into()));
        }
        let mut out = self.enumerate_prefix(pattern)?;
        out.sort_unstable();
        Ok(out)
    }

    /// All suffix offsets in lexicographic order, one sub-tree at a time.
    pub fn enumerate_suffixes(&self) -> SuffixIter<'_> {
        SuffixIter { index: self, record: 0, leaves: Vec::new(), at: 0 }
    }

    /// The complete suffix tree: the trie's branching nodes above the
    /// partition prefixes, with every sub-tree hung below them.
    pub fn assemble_full_tree(&self) -> Result<SubTree> {
        let trees: Vec<SubTree> = (0..self.trie().len()).map(|r| self.load_subtree(r)).collect::<Result<_>>()?;
        let mut nodes = vec![Node::root(0)];
        let top = graft(&trees, 0, &mut nodes)?;
        nodes[0] = Node::root(top);
        Ok(SubTree { prefix: Vec::new(), nodes })
    }
}

/// Appends the nodes below a branching point at `depth` whose subtrees are
/// `trees` (sorted, all sharing their first `depth` symbols); returns the
/// number of children created.
fn graft(trees: &[SubTree], depth: usize, out: &mut Vec<Node>) -> Result<u32> {
    let mut children = 0;
    let mut i = 0;
    while i < trees.len() {
        let sym = trees[i].prefix[depth];
        let mut j = i + 1;
        while j < trees.len() && trees[j].prefix[depth] == sym {
            j += 1;
        }
        children += 1;
        if j - i == 1 {
            let t = &trees[i];
            if t.nodes.len() < 2 || t.nodes[0].child_count != 1 {
                return Err(EraError::CorruptIndex(format!(
                    "sub-tree {:?} does not hang from a single edge",
                    String::from_utf8_lossy(&t.prefix)
                )));
            }
            let top = t.nodes[1];
            let label = EdgeLabel::new(top.start + depth as u64, top.end);
            out.push(match top.suffix_offset() {
                Some(s) => Node::leaf(label, s),
                None => Node::internal(label, top.child_count),
            });
            out.extend_from_slice(&t.nodes[2..]);
        } else {
            let (a, b) = (&trees[i].prefix, &trees[j - 1].prefix);
            let lcp = a.iter().zip(b.iter()).take_while(|(x, y)| x == y).count();
            let first_leaf = trees[i].leaves().next().expect("non-empty sub-tree");
            let at = out.len();
            out.push(Node::root(0));
            let n = graft(&trees[i..j], lcp, out)?;
            out[at] = Node::internal(EdgeLabel::new(first_leaf + depth as u64, first_leaf + lcp as u64), n);
        }
        i = j;
    }
    Ok(children)
}

pub struct SuffixIter<'a> {
    index: &'a Index,
    record: usize,
    leaves: Vec<u64>,
    at: usize,
}

impl Iterator for SuffixIter<'_> {
    type Item = Result<u64>;

    fn next(&mut self) -> Option<Self::Item> {
        while self.at == self.leaves.len() {
            if self.record == self.index.trie().len() {
                return None;
            }
            match self.index.load_subtree(self.record) {
                Ok(t) => self.leaves = t.leaves().collect(),
                Err(e) => {
                    self.record = self.index.trie().len();
                    return Some(Err(e));
                }
            }
            self.record += 1;
            self.at = 0;
        }
        self.at += 1;
        Some(Ok(self.leaves[self.at - 1]))
    }
}
