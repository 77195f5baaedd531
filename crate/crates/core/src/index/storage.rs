//! Versioned binary persistence for indexes.
//!
//! Both index kinds share a 5-byte magic (`TDPR1`) followed by a kind
//! byte: 1 for the sparse inverted index, 2 for a dense vector index. All
//! integers are little-endian; vector components are stored as f32 and
//! renormalized on load. Strings are u32-length-prefixed UTF-8. Writers
//! iterate ordered maps, so saving the same index twice produces identical
//! bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::dense::{EmbeddingVector, IndexLevel, VectorEntry, VectorIndex};
use super::sparse::{mean_length, InvertedIndex, Posting};
use super::IndexError;

const MAGIC: &[u8; 5] = b"TDPR1";
const KIND_SPARSE: u8 = 1;
const KIND_DENSE: u8 = 2;
const LEVEL_PASSAGE: u8 = 1;
const LEVEL_DOCUMENT: u8 = 2;
/// Upper bound on serialized string length; larger prefixes mean a
/// corrupt file, not a real id.
const MAX_STR: u32 = 1 << 20;

fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f32(w: &mut impl Write, v: f32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

struct Reader<R: Read> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<(), IndexError> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                IndexError::Format("unexpected end of file".into())
            } else {
                IndexError::Io(e)
            }
        })
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        let mut b = [0u8; 1];
        self.fill(&mut b)?;
        Ok(b[0])
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f32(&mut self) -> Result<f32, IndexError> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(f32::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64, IndexError> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn string(&mut self) -> Result<String, IndexError> {
        let len = self.u32()?;
        if len > MAX_STR {
            return Err(IndexError::Format(format!("string length {len} exceeds limit")));
        }
        let mut buf = vec![0u8; len as usize];
        self.fill(&mut buf)?;
        String::from_utf8(buf).map_err(|_| IndexError::Format("invalid UTF-8".into()))
    }

    fn header(&mut self, expected_kind: u8) -> Result<(), IndexError> {
        let mut magic = [0u8; 5];
        self.fill(&mut magic)?;
        if &magic != MAGIC {
            return Err(IndexError::Format("bad magic; not an index file".into()));
        }
        let kind = self.u8()?;
        if kind != expected_kind {
            return Err(IndexError::Format(format!(
                "wrong index kind: expected {expected_kind}, found {kind}"
            )));
        }
        Ok(())
    }

    fn expect_eof(&mut self) -> Result<(), IndexError> {
        let mut b = [0u8; 1];
        match self.inner.read_exact(&mut b) {
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Ok(()),
            Ok(()) => Err(IndexError::Format("trailing data after index payload".into())),
            Err(e) => Err(IndexError::Io(e)),
        }
    }
}

/// Write a dense vector index.
pub fn save_dense_index(index: &VectorIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(MAGIC)?;
    w.write_all(&[KIND_DENSE])?;
    w.write_all(&[match index.level {
        IndexLevel::Passage => LEVEL_PASSAGE,
        IndexLevel::Document => LEVEL_DOCUMENT,
    }])?;
    put_u32(&mut w, index.dim as u32)?;
    put_u32(&mut w, index.entries.len() as u32)?;
    for e in &index.entries {
        put_str(&mut w, &e.passage_id)?;
        put_str(&mut w, &e.doc_id)?;
        debug_assert_eq!(e.vector.dim(), index.dim);
        for &v in e.vector.values() {
            put_f32(&mut w, v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a dense vector index, renormalizing vectors after the f32 round
/// trip.
pub fn load_dense_index(path: impl AsRef<Path>) -> Result<VectorIndex, IndexError> {
    let mut r = Reader { inner: BufReader::new(File::open(path.as_ref())?) };
    r.header(KIND_DENSE)?;
    let level = match r.u8()? {
        LEVEL_PASSAGE => IndexLevel::Passage,
        LEVEL_DOCUMENT => IndexLevel::Document,
        other => return Err(IndexError::Format(format!("unknown index level {other}"))),
    };
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut entries = Vec::new();
    for i in 0..count {
        let passage_id = r.string()?;
        let doc_id = r.string()?;
        let mut values = Vec::with_capacity(dim);
        for _ in 0..dim {
            values.push(f64::from(r.f32()?));
        }
        let vector = EmbeddingVector::unit_from(values).map_err(|_| {
            IndexError::Format(format!("entry {i} ('{passage_id}') is not normalizable"))
        })?;
        entries.push(VectorEntry { passage_id, doc_id, vector });
    }
    r.expect_eof()?;
    Ok(VectorIndex { level, dim, entries })
}

/// Write a sparse inverted index.
pub fn save_sparse_index(index: &InvertedIndex, path: impl AsRef<Path>) -> Result<(), IndexError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(MAGIC)?;
    w.write_all(&[KIND_SPARSE])?;
    put_f64(&mut w, index.k1)?;
    put_f64(&mut w, index.b)?;
    put_u32(&mut w, index.passage_lengths.len() as u32)?;
    for (id, len) in &index.passage_lengths {
        put_str(&mut w, id)?;
        put_str(&mut w, index.doc_of.get(id).map_or("", |d| d.as_str()))?;
        put_u32(&mut w, *len as u32)?;
    }
    put_u32(&mut w, index.postings.len() as u32)?;
    for (term, list) in &index.postings {
        put_str(&mut w, term)?;
        put_u32(&mut w, list.len() as u32)?;
        for p in list {
            put_str(&mut w, &p.passage_id)?;
            put_u32(&mut w, p.tf)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a sparse inverted index, recomputing the average length the same
/// way the builder does.
pub fn load_sparse_index(path: impl AsRef<Path>) -> Result<InvertedIndex, IndexError> {
    let mut r = Reader { inner: BufReader::new(File::open(path.as_ref())?) };
    r.header(KIND_SPARSE)?;
    let k1 = r.f64()?;
    let b = r.f64()?;
    if !(k1.is_finite() && k1 > 0.0) || !(0.0..=1.0).contains(&b) {
        return Err(IndexError::Format(format!("invalid BM25 parameters k1={k1}, b={b}")));
    }

    let n = r.u32()? as usize;
    let mut passage_lengths = BTreeMap::new();
    let mut doc_of = BTreeMap::new();
    let mut prev_id: Option<String> = None;
    for _ in 0..n {
        let id = r.string()?;
        let doc = r.string()?;
        let len = r.u32()? as usize;
        if let Some(prev) = &prev_id {
            if prev >= &id {
                return Err(IndexError::Format("passage table is not sorted".into()));
            }
        }
        prev_id = Some(id.clone());
        passage_lengths.insert(id.clone(), len);
        doc_of.insert(id, doc);
    }
    if passage_lengths.is_empty() {
        return Err(IndexError::Format("index contains no passages".into()));
    }

    let n_terms = r.u32()? as usize;
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    for _ in 0..n_terms {
        let term = r.string()?;
        let m = r.u32()? as usize;
        let mut list = Vec::with_capacity(m.min(1 << 16));
        let mut prev: Option<String> = None;
        for _ in 0..m {
            let passage_id = r.string()?;
            let tf = r.u32()?;
            if !passage_lengths.contains_key(&passage_id) {
                return Err(IndexError::Format(format!(
                    "posting for unknown passage '{passage_id}'"
                )));
            }
            if let Some(p) = &prev {
                if p >= &passage_id {
                    return Err(IndexError::Format(format!(
                        "postings for term '{term}' are not sorted"
                    )));
                }
            }
            prev = Some(passage_id.clone());
            list.push(Posting { passage_id, tf });
        }
        postings.insert(term, list);
    }
    r.expect_eof()?;

    let avg_length = mean_length(&passage_lengths);
    Ok(InvertedIndex {
        k1,
        b,
        postings,
        passage_lengths,
        doc_of,
        n_passages: n,
        avg_length,
    })
}
