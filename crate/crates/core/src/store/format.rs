//! Byte layout of index files. See FORMAT.md at the repository root.

use std::io::{self, Read, Write};

use crate::alphabet::Alphabet;
use crate::error::{EraError, Result};
use crate::store::trie::{TopTrie, TrieEntry};
use crate::tree::{EdgeLabel, Node};

pub const MAGIC: &[u8; 4] = b"ERA1";
pub const VERSION: u32 = 1;

/// Bytes of one section-table row.
pub const TABLE_ROW: u64 = 8 + 8 + 4;

/// Location and checksum of one serialized sub-tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SectionEntry {
    pub offset: u64,
    pub length: u64,
    pub crc: u32,
}

/// Everything before the first section.
#[derive(Debug, Clone)]
pub struct Header {
    pub text_len: u64,
    pub alphabet: Alphabet,
    pub trie: TopTrie,
    pub sections: Vec<SectionEntry>,
}

impl Header {
    /// Serialized size, which does not depend on section contents.
    pub fn encoded_len(&self) -> u64 {
        let alpha = 2 + 1 + self.alphabet.base_symbols().len() as u64;
        let trie: u64 = 8 + self.trie.entries().iter().map(|e| 4 + e.prefix.len() as u64 + 16).sum::<u64>();
        4 + 4 + 8 + alpha + trie + TABLE_ROW * self.trie.len() as u64 + 4
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len() as usize);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.text_len.to_le_bytes());
        let base = self.alphabet.base_symbols();
        out.extend_from_slice(&(base.len() as u16).to_le_bytes());
        out.push(self.alphabet.sentinel());
        out.extend_from_slice(base);
        out.extend_from_slice(&(self.trie.len() as u64).to_le_bytes());
        for e in self.trie.entries() {
            out.extend_from_slice(&(e.prefix.len() as u32).to_le_bytes());
            out.extend_from_slice(&e.prefix);
            out.extend_from_slice(&e.record.to_le_bytes());
            out.extend_from_slice(&e.frequency.to_le_bytes());
        }
        for s in &self.sections {
            out.extend_from_slice(&s.offset.to_le_bytes());
            out.extend_from_slice(&s.length.to_le_bytes());
            out.extend_from_slice(&s.crc.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        debug_assert_eq!(out.len() as u64, self.encoded_len());
        out
    }

    /// Reads and checks a header; `file_len` bounds every length field.
    pub fn decode<R: Read>(r: &mut R, file_len: u64) -> Result<Header> {
        let mut hr = HashingReader { inner: r, hasher: crc32fast::Hasher::new(), read: 0, limit: file_len };
        let mut magic = [0u8; 4];
        hr.exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EraError::UnsupportedFormat(format!("bad magic {:?}", String::from_utf8_lossy(&magic))));
        }
        let version = hr.u32()?;
        if version != VERSION {
            return Err(EraError::UnsupportedFormat(format!("version {version}, expected {VERSION}")));
        }
        let text_len = hr.u64()?;
        let base_count = hr.u16()? as usize;
        let sentinel = hr.u8()?;
        let mut base = vec![0u8; base_count];
        hr.exact(&mut base)?;
        let alphabet = Alphabet::new(&base, sentinel).map_err(|e| EraError::CorruptIndex(format!("alphabet: {e}")))?;
        let count = hr.u64()?;
        if count == 0 || count > file_len {
            return Err(EraError::CorruptIndex(format!("trie entry count {count}")));
        }
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let len = hr.u32()? as u64;
            if len == 0 || len > text_len || len > file_len {
                return Err(EraError::CorruptIndex(format!("trie prefix length {len}")));
            }
            let mut prefix = vec![0u8; len as usize];
            hr.exact(&mut prefix)?;
            let record = hr.u64()?;
            let frequency = hr.u64()?;
            entries.push(TrieEntry { prefix, record, frequency });
        }
        let mut sections = Vec::with_capacity(count as usize);
        for _ in 0..count {
            sections.push(SectionEntry { offset: hr.u64()?, length: hr.u64()?, crc: hr.u32()? });
        }
        let computed = hr.hasher.clone().finalize();
        let stored = hr.u32()?;
        if computed != stored {
            return Err(EraError::CorruptIndex("header checksum mismatch".into()));
        }
        let trie =
            TopTrie::from_entries(alphabet.clone(), entries).map_err(|e| EraError::CorruptIndex(e.to_string()))?;
        if trie.total_frequency() != text_len {
            return Err(EraError::CorruptIndex(format!(
                "trie covers {} suffixes, text has {text_len}",
                trie.total_frequency()
            )));
        }
        Ok(Header { text_len, alphabet, trie, sections })
    }
}

struct HashingReader<'a, R> {
    inner: &'a mut R,
    hasher: crc32fast::Hasher,
    read: u64,
    limit: u64,
}

impl<R: Read> HashingReader<'_, R> {
    fn exact(&mut self, buf: &mut [u8]) -> Result<()> {
        if self.read + buf.len() as u64 > self.limit {
            return Err(EraError::CorruptIndex("header runs past the end of the file".into()));
        }
        self.inner.read_exact(buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => EraError::CorruptIndex("truncated header".into()),
            _ => EraError::Io(e),
        })?;
        self.hasher.update(buf);
        self.read += buf.len() as u64;
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.exact(&mut b)?;
        Ok(b[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let mut b = [0u8; 2];
        self.exact(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
}

/// Bytes `node` takes in a section.
pub fn node_len(node: &Node) -> u64 {
    if node.is_leaf() {
        26
    } else {
        18
    }
}

/// Appends one node record.
pub fn encode_node<W: Write>(w: &mut W, node: &Node) -> io::Result<()> {
    let mut buf = [0u8; 26];
    buf[..8].copy_from_slice(&node.start.to_le_bytes());
    buf[8..16].copy_from_slice(&node.end.to_le_bytes());
    let children = u16::try_from(node.child_count).map_err(|_| io::Error::other("more than 65535 children"))?;
    buf[16..18].copy_from_slice(&children.to_le_bytes());
    match node.suffix_offset() {
        Some(s) => {
            buf[18..26].copy_from_slice(&s.to_le_bytes());
            w.write_all(&buf)
        }
        None => w.write_all(&buf[..18]),
    }
}

/// Decodes a whole section: node count, then nodes in pre-order.
pub fn decode_section(bytes: &[u8]) -> Result<Vec<Node>> {
    let bad = |what: &str| EraError::CorruptIndex(format!("section: {what}"));
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let s = bytes.get(*pos..*pos + n).ok_or_else(|| bad("truncated"))?;
        *pos += n;
        Ok(s)
    };
    let mut pos = 0usize;
    let count = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("8"));
    if count < 2 || count > bytes.len() as u64 / 18 + 1 {
        return Err(bad("node count"));
    }
    let mut nodes = Vec::with_capacity(count as usize);
    for i in 0..count {
        let start = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("8"));
        let end = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("8"));
        let children = u16::from_le_bytes(take(&mut pos, 2)?.try_into().expect("2")) as u32;
        let node = if i == 0 {
            if start != 0 || end != 0 || children == 0 {
                return Err(bad("root record"));
            }
            Node::root(children)
        } else if children == 0 {
            let suffix = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("8"));
            if start >= end {
                return Err(bad("empty leaf label"));
            }
            Node::leaf(EdgeLabel::new(start, end), suffix)
        } else {
            if start >= end {
                return Err(bad("empty edge label"));
            }
            Node::internal(EdgeLabel::new(start, end), children)
        };
        nodes.push(node);
    }
    if pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(nodes)
}
