//! Corpus serialization: one JSON object per line, tagged by record type.
//!
//! The writer emits documents (sorted by id), then passages (in corpus
//! order), then tables (sorted by id), so saving the same corpus twice
//! produces byte-identical files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, DocumentRecord, Passage, TableRecord};

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum CorpusLine {
    Document(DocumentRecord),
    Passage(Passage),
    Table(TableRecord),
}

/// Load and fully validate a corpus (token limits enforced, every table
/// must have a caption passage).
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    load(path.as_ref(), true)
}

/// Load a raw, pre-ingestion corpus. Structural integrity is still
/// enforced, but text passages may exceed the token limit and tables may
/// lack caption passages or summaries; ingestion repairs both.
pub fn load_corpus_raw(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    load(path.as_ref(), false)
}

fn load(path: &Path, strict: bool) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    read_corpus(BufReader::new(file), strict)
}

fn read_corpus(reader: impl Read, strict: bool) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusLine = serde_json::from_str(&line)
            .map_err(|source| CorpusError::Parse { line: line_no, source })?;
        match record {
            CorpusLine::Document(doc) => {
                if corpus.documents.contains_key(&doc.doc_id) {
                    return Err(CorpusError::Invalid {
                        line: line_no,
                        msg: format!("duplicate doc_id '{}'", doc.doc_id),
                    });
                }
                corpus.documents.insert(doc.doc_id.clone(), doc);
            }
            CorpusLine::Passage(mut p) => {
                p.recount();
                corpus.passages.push(p);
            }
            CorpusLine::Table(mut t) => {
                t.recount();
                if corpus.tables.contains_key(&t.table_id) {
                    return Err(CorpusError::Invalid {
                        line: line_no,
                        msg: format!("duplicate table_id '{}'", t.table_id),
                    });
                }
                corpus.tables.insert(t.table_id.clone(), t);
            }
        }
    }
    corpus.validate(strict)?;
    Ok(corpus)
}

/// Serialize in canonical order. Output bytes depend only on corpus content.
pub fn write_corpus(corpus: &Corpus, mut writer: impl Write) -> Result<(), CorpusError> {
    fn emit(writer: &mut impl Write, line: &CorpusLine) -> Result<(), CorpusError> {
        let json = serde_json::to_string(line).map_err(|e| {
            CorpusError::Integrity(format!("serialization failed: {e}"))
        })?;
        writer.write_all(json.as_bytes())?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    for doc in corpus.documents.values() {
        emit(&mut writer, &CorpusLine::Document(doc.clone()))?;
    }
    for p in &corpus.passages {
        emit(&mut writer, &CorpusLine::Passage(p.clone()))?;
    }
    for t in corpus.tables.values() {
        emit(&mut writer, &CorpusLine::Table(t.clone()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let file = File::create(path)?;
    write_corpus(corpus, BufWriter::new(file))
}
