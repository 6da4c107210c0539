//! Plain-text vector interchange: a `<count> <dim>` header, then one
//! `<key> <f1> … <fdim>` line per entry.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;

use super::{SentenceVectors, VectorSource, WordVectors};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

pub fn read_vectors(text: &str) -> Result<(usize, IndexMap<String, Vec<f64>>)> {
    let malformed = |line: usize, message: String| Error::MalformedRecord { line, message };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| malformed(1, "missing header".into()))?;
    let mut fields = header.split_whitespace();
    let mut next_usize = |what: &str| -> Result<usize> {
        fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| malformed(1, format!("header needs <count> <dim>, missing {what}")))
    };
    let count = next_usize("count")?;
    let dim = next_usize("dim")?;
    if dim == 0 {
        return Err(malformed(1, "dimension must be positive".into()));
    }

    let mut vectors = IndexMap::with_capacity(count);
    for (i, line) in lines {
        let mut fields = line.split_whitespace();
        let key = fields.next().expect("non-blank line has a field").to_string();
        let values = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| malformed(i + 1, e.to_string()))?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: values.len(),
                context: format!("line {} ({key})", i + 1),
            });
        }
        if vectors.insert(key.clone(), values).is_some() {
            return Err(Error::DuplicateId(key));
        }
    }
    if vectors.len() != count {
        return Err(malformed(
            1,
            format!("header declares {count} entries, file has {}", vectors.len()),
        ));
    }
    Ok((dim, vectors))
}

pub fn write_vectors(dim: usize, vectors: &IndexMap<String, Vec<f64>>) -> String {
    let mut out = format!("{} {}\n", vectors.len(), dim);
    for (key, v) in vectors {
        out.push_str(key);
        for x in v {
            write!(out, " {x}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn import_word_vectors(path: impl AsRef<Path>) -> Result<WordVectors> {
    let (dim, vectors) = read_vectors(&read_file(path.as_ref())?)?;
    Ok(WordVectors { dim, vectors })
}

/// Loads test-case vectors and reorders them to corpus order. Every corpus
/// test case must have a vector.
pub fn import_sentence_vectors(path: impl AsRef<Path>, corpus: &Corpus) -> Result<SentenceVectors> {
    let (dim, mut loaded) = read_vectors(&read_file(path.as_ref())?)?;
    let mut vectors = IndexMap::with_capacity(corpus.m());
    for tc in corpus.test_cases() {
        let v = loaded.swap_remove(&tc.id).ok_or_else(|| Error::MissingVector(tc.id.clone()))?;
        vectors.insert(tc.id.clone(), v);
    }
    Ok(SentenceVectors { dim, vectors, source: VectorSource::Imported })
}

pub fn export_word_vectors(wv: &WordVectors, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_vectors(wv.dim, &wv.vectors)).map_err(|e| Error::io(path, e))
}

pub fn export_sentence_vectors(sv: &SentenceVectors, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_vectors(sv.dim, &sv.vectors)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_dimensions_are_rejected() {
        let mut text = String::from("2 300\n");
        text.push_str(&format!("a{}\n", " 0.5".repeat(300)));
        text.push_str(&format!("b{}\n", " 0.5".repeat(299)));
        assert!(matches!(
            read_vectors(&text),
            Err(Error::DimensionMismatch { expected: 300, found: 299, .. })
        ));
    }

    #[test]
    fn loads_1024_dim_vectors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("titan.txt");
        let mut text = String::from("3 1024\n");
        for key in ["read", "send", "check"] {
            text.push_str(key);
            text.push_str(&" -0.125".repeat(1024));
            text.push('\n');
        }
        std::fs::write(&path, text).unwrap();
        let wv = import_word_vectors(&path).unwrap();
        assert_eq!(wv.dim, 1024);
        assert_eq!(wv.vocab_size(), 3);
    }

    #[test]
    fn sentence_import_requires_every_test_case() {
        let corpus = Corpus::from_jsonl(
            "{\"requirements\":[\"R1\"]}\n\
             {\"id\":\"TC1\",\"requirement_ids\":[\"R1\"],\"steps\":[\"a\"]}\n\
             {\"id\":\"TC7\",\"requirement_ids\":[\"R1\"],\"steps\":[\"b\"]}\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        std::fs::write(&path, "1 2\nTC1 1 0\n").unwrap();
        match import_sentence_vectors(&path, &corpus) {
            Err(Error::MissingVector(id)) => assert_eq!(id, "TC7"),
            other => panic!("expected missing vector, got {other:?}"),
        }
        std::fs::write(&path, "2 2\nTC7 0 1\nTC1 1 0\n").unwrap();
        let sv = import_sentence_vectors(&path, &corpus).unwrap();
        assert_eq!(sv.vectors.keys().collect::<Vec<_>>(), ["TC1", "TC7"]);
    }

    #[test]
    fn header_count_must_match() {
        assert!(matches!(read_vectors("3 2\na 1 2\n"), Err(Error::MalformedRecord { .. })));
    }
}
