//! On-disk index layout. All integers are little-endian.
//!
//! ```text
//! magic          8 bytes  "TRIALIDX"
//! header_len     u32
//! header         header_len bytes of UTF-8 JSON (IndexHeader)
//! documents      N times: id_len u32, id bytes, doc_len u32
//! terms          T times: term_len u32, term bytes, cf u64, df u32,
//!                         df times: doc u32, tf u32
//! ```
//!
//! Terms are written in byte-lexicographic order and postings in document
//! order, so equal indexes serialize to identical bytes.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Index, Posting, SectionConfig, TermEntry};
use crate::error::{Error, Result};

pub const INDEX_MAGIC: &[u8; 8] = b"TRIALIDX";
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub format_version: u32,
    pub sections: SectionConfig,
    pub stopwords_digest: String,
    pub num_docs: u64,
    pub num_terms: u64,
    pub total_tokens: u64,
    pub avgdl: f64,
}

fn io_err(e: std::io::Error) -> Error {
    Error::Data(format!("index I/O: {e}"))
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn put_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes()).map_err(io_err)
}

pub fn write_index<W: Write>(index: &Index, mut w: W) -> Result<()> {
    let header = IndexHeader {
        format_version: INDEX_FORMAT_VERSION,
        sections: index.config.clone(),
        stopwords_digest: index.stopwords_digest.clone(),
        num_docs: index.doc_ids.len() as u64,
        num_terms: index.terms.len() as u64,
        total_tokens: index.doc_lens.iter().map(|&l| u64::from(l)).sum(),
        avgdl: index.avgdl,
    };
    let json = serde_json::to_vec(&header).map_err(|source| Error::Json {
        context: "index header".into(),
        source,
    })?;
    w.write_all(INDEX_MAGIC).map_err(io_err)?;
    put_u32(&mut w, json.len() as u32)?;
    w.write_all(&json).map_err(io_err)?;
    for (id, &len) in index.doc_ids.iter().zip(&index.doc_lens) {
        put_str(&mut w, id)?;
        put_u32(&mut w, len)?;
    }
    for (term, entry) in &index.terms {
        put_str(&mut w, term)?;
        w.write_all(&entry.cf.to_le_bytes()).map_err(io_err)?;
        put_u32(&mut w, entry.df())?;
        for p in &entry.postings {
            put_u32(&mut w, p.doc)?;
            put_u32(&mut w, p.tf)?;
        }
    }
    w.flush().map_err(io_err)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Data(format!("truncated index file at byte {}", self.pos)))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| Error::Data(format!("invalid UTF-8 in index at byte {at}")))
    }
}

/// Reads just the header, e.g. to check compatibility before loading postings.
pub fn read_header(bytes: &[u8]) -> Result<IndexHeader> {
    let mut cur = Cursor { bytes, pos: 0 };
    read_header_from(&mut cur)
}

fn read_header_from(cur: &mut Cursor<'_>) -> Result<IndexHeader> {
    if cur.take(8).ok() != Some(INDEX_MAGIC.as_slice()) {
        return Err(Error::Data("not an index file (bad magic)".into()));
    }
    let len = cur.u32()? as usize;
    let header: IndexHeader = serde_json::from_slice(cur.take(len)?).map_err(|source| Error::Json {
        context: "index header".into(),
        source,
    })?;
    if header.format_version != INDEX_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "index format version {} is not supported (expected {INDEX_FORMAT_VERSION}); rebuild the index",
            header.format_version
        )));
    }
    Ok(header)
}

pub fn read_index<R: Read>(mut r: R) -> Result<Index> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io_err)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let header = read_header_from(&mut cur)?;
    header.sections.validate()?;

    let n = usize::try_from(header.num_docs).map_err(|_| Error::Data("index too large".into()))?;
    let mut doc_ids = Vec::with_capacity(n.min(1 << 20));
    let mut doc_lens = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        doc_ids.push(cur.string()?);
        doc_lens.push(cur.u32()?);
    }

    let mut terms = BTreeMap::new();
    for _ in 0..header.num_terms {
        let term = cur.string()?;
        let cf = cur.u64()?;
        let df = cur.u32()? as usize;
        let mut postings = Vec::with_capacity(df.min(n));
        let mut sum = 0u64;
        for _ in 0..df {
            let doc = cur.u32()?;
            let tf = cur.u32()?;
            if doc as usize >= n || tf == 0 || postings.last().is_some_and(|p: &Posting| p.doc >= doc) {
                return Err(Error::Data(format!("corrupt postings for term {term:?}")));
            }
            sum += u64::from(tf);
            postings.push(Posting { doc, tf });
        }
        if sum != cf {
            return Err(Error::Data(format!(
                "corrupt index: collection frequency of {term:?} is {cf} but postings sum to {sum}"
            )));
        }
        terms.insert(term, TermEntry { cf, postings });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Data("trailing bytes after index body".into()));
    }

    let index = Index::assemble(doc_ids, doc_lens, terms, header.sections, header.stopwords_digest);
    if index.avgdl.to_bits() != header.avgdl.to_bits() {
        return Err(Error::Data(
            "corrupt index: average length disagrees with header".into(),
        ));
    }
    Ok(index)
}
