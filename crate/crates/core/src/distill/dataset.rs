//! JSON-lines interchange format for teacher embeddings.
//!
//! One object per line: `id`, `tree` (bracketed), `dim`, `words` (array
//! of `{text, vec}` in leaf order) and `sentence_vec`.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::treebank::{parse_tree, SyntaxTree};

/// A tree with its teacher word vectors and teacher sentence vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRecord {
    pub id: String,
    pub tree: SyntaxTree,
    pub words: Vec<String>,
    pub word_vectors: Vec<Tensor>,
    pub sentence_vector: Tensor,
}

impl SentenceRecord {
    pub fn dim(&self) -> usize {
        self.sentence_vector.len()
    }

    /// Build a record, checking alignment and dimensions.
    pub fn new(id: impl Into<String>, tree: SyntaxTree, word_vectors: Vec<Tensor>, sentence_vector: Tensor) -> Result<Self> {
        let words: Vec<String> = tree.leaves().into_iter().map(str::to_string).collect();
        if words.len() != word_vectors.len() {
            return Err(Error::LeafCountMismatch { leaves: words.len(), words: word_vectors.len() });
        }
        let d = sentence_vector.len();
        if let Some(bad) = word_vectors.iter().find(|v| v.len() != d || !v.is_row()) {
            return Err(Error::ShapeMismatch {
                op: "record",
                expected: format!("1x{d}"),
                found: bad.shape_string(),
            });
        }
        Ok(Self { id: id.into(), tree, words, word_vectors, sentence_vector })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RawWord {
    pub text: String,
    pub vec: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RawRecord {
    pub id: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<String>,
    pub dim: usize,
    pub words: Vec<RawWord>,
    pub sentence_vec: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl RawRecord {
    pub(crate) fn id_string(&self) -> String {
        match &self.id {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }

    /// Check `dim` against the file-wide dimension and every vector
    /// length against `dim`.
    pub(crate) fn check_dims(&self, line: usize, file_dim: &mut Option<usize>) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Schema { line, message: "dim must be positive".into() });
        }
        match *file_dim {
            None => *file_dim = Some(self.dim),
            Some(d) if d != self.dim => return Err(Error::DimMismatch { line, expected: d, found: self.dim }),
            Some(_) => {}
        }
        let lens = std::iter::once(self.sentence_vec.len()).chain(self.words.iter().map(|w| w.vec.len()));
        for len in lens {
            if len != self.dim {
                return Err(Error::DimMismatch { line, expected: self.dim, found: len });
            }
        }
        let all = self.sentence_vec.iter().chain(self.words.iter().flat_map(|w| w.vec.iter()));
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema { line, message: "non-finite vector entry".into() });
        }
        Ok(())
    }
}

/// Non-blank lines of a JSON-lines stream parsed as raw records, with
/// 1-based line numbers.
pub(crate) fn raw_records<R: BufRead>(input: R) -> Result<Vec<(usize, RawRecord)>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::Schema { line: i + 1, message: e.to_string() })?;
        out.push((i + 1, raw));
    }
    Ok(out)
}

pub fn parse_dataset<R: BufRead>(input: R) -> Result<Vec<SentenceRecord>> {
    let mut dim = None;
    let mut out = Vec::new();
    for (line, raw) in raw_records(input)? {
        raw.check_dims(line, &mut dim)?;
        let id = raw.id_string();
        let text = raw.tree.as_deref().ok_or_else(|| Error::Schema { line, message: "missing field `tree`".into() })?;
        let tree = parse_tree(text).map_err(|e| Error::Schema { line, message: format!("tree: {e}") })?;
        let leaves = tree.leaf_count();
        if leaves != raw.words.len() {
            return Err(Error::RecordLeafCount { line, id, leaves, words: raw.words.len() });
        }
        let leaf_words = tree.leaves();
        if let Some((w, l)) = raw.words.iter().zip(&leaf_words).find(|(w, l)| w.text != **l) {
            log::warn!("line {line}: word text `{}` differs from tree leaf `{l}`", w.text);
        }
        let words = raw.words.iter().map(|w| w.text.clone()).collect();
        let word_vectors = raw.words.into_iter().map(|w| Tensor::row(w.vec)).collect();
        out.push(SentenceRecord { id, tree, words, word_vectors, sentence_vector: Tensor::row(raw.sentence_vec) });
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<SentenceRecord>> {
    parse_dataset(BufReader::new(std::fs::File::open(path)?))
}

pub fn write_dataset<W: Write>(mut out: W, records: &[SentenceRecord]) -> Result<()> {
    for r in records {
        let raw = RawRecord {
            id: serde_json::Value::String(r.id.clone()),
            tree: Some(r.tree.to_string()),
            dim: r.dim(),
            words: r
                .words
                .iter()
                .zip(&r.word_vectors)
                .map(|(t, v)| RawWord { text: t.clone(), vec: v.as_slice().to_vec() })
                .collect(),
            sentence_vec: r.sentence_vector.as_slice().to_vec(),
            category: None,
        };
        serde_json::to_writer(&mut out, &raw).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
