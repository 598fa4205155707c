//! Corpus and model file I/O.
//!
//! Formats:
//! - docword file (sparse UCI bag-of-words style): three header lines
//!   `N`, `V`, `NNZ`, then `NNZ` lines `docId wordId count`, all 1-indexed.
//! - responses file: one decimal literal per line, aligned with document
//!   order.
//! - model file: JSON with fields `version`, `k`, `vocab_size`, `alpha0`,
//!   `alpha`, `eta`, `sigma`, `topics` (row-major `V×k`: `topics[w][t]` is
//!   the probability of word `w` under topic `t`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SldaModel;

/// One bag-of-words document plus its real-valued response.
///
/// `counts` is sorted by word id (0-indexed internally) with strictly
/// positive counts and no duplicate ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub counts: Vec<(u32, u32)>,
    pub response: f64,
}

impl Document {
    /// Total number of word tokens `m`.
    pub fn num_tokens(&self) -> u64 {
        self.counts.iter().map(|&(_, c)| u64::from(c)).sum()
    }
}

/// An ordered, immutable collection of documents over a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    documents: Vec<Document>,
    vocab_size: usize,
}

/// Summary statistics used by the CLI and sanity checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub num_docs: usize,
    pub vocab_size: usize,
    pub total_tokens: u64,
    pub median_doc_len: f64,
}

impl Corpus {
    /// Validating constructor: every document must have `m ≥ 3` tokens
    /// (three word positions are needed by the moment estimators), word ids
    /// within the vocabulary, sorted unique ids and positive counts.
    pub fn new(documents: Vec<Document>, vocab_size: usize) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::InvalidConfig("corpus must contain at least one document".into()));
        }
        if vocab_size == 0 {
            return Err(Error::InvalidConfig("vocabulary size must be positive".into()));
        }
        for (idx, doc) in documents.iter().enumerate() {
            let mut prev: Option<u32> = None;
            for &(w, c) in &doc.counts {
                if w as usize >= vocab_size {
                    return Err(Error::DimensionMismatch(format!(
                        "document {} references word id {} outside vocabulary of size {}",
                        idx + 1,
                        w + 1,
                        vocab_size
                    )));
                }
                if c == 0 {
                    return Err(Error::InvalidConfig(format!(
                        "document {} has a zero count for word {}",
                        idx + 1,
                        w + 1
                    )));
                }
                if let Some(p) = prev {
                    if w <= p {
                        return Err(Error::InvalidConfig(format!(
                            "document {} has unsorted or duplicate word ids",
                            idx + 1
                        )));
                    }
                }
                prev = Some(w);
            }
            let m = doc.num_tokens();
            if m < 3 {
                return Err(Error::DocumentTooShort { doc: idx + 1, m });
            }
        }
        Ok(Corpus { documents, vocab_size })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_docs(&self) -> usize {
        self.documents.len()
    }

    pub fn total_tokens(&self) -> u64 {
        self.documents.iter().map(Document::num_tokens).sum()
    }

    pub fn responses(&self) -> Vec<f64> {
        self.documents.iter().map(|d| d.response).collect()
    }

    /// Replace the responses, keyed by document order.
    pub fn attach_responses(&mut self, responses: &[f64]) -> Result<()> {
        if responses.len() != self.documents.len() {
            return Err(Error::ResponseCountMismatch {
                expected: self.documents.len(),
                found: responses.len(),
            });
        }
        for (doc, &y) in self.documents.iter_mut().zip(responses) {
            doc.response = y;
        }
        Ok(())
    }

    /// Shift/scale responses to zero mean and unit variance in place.
    /// Returns the applied `(mean, standard deviation)`.
    pub fn standardize_responses(&mut self) -> Result<(f64, f64)> {
        let n = self.documents.len() as f64;
        let mean = self.documents.iter().map(|d| d.response).sum::<f64>() / n;
        let var = self
            .documents
            .iter()
            .map(|d| (d.response - mean).powi(2))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        if sd == 0.0 {
            return Err(Error::InvalidConfig(
                "cannot standardize responses with zero variance".into(),
            ));
        }
        for doc in &mut self.documents {
            doc.response = (doc.response - mean) / sd;
        }
        Ok((mean, sd))
    }

    pub fn stats(&self) -> CorpusStats {
        let mut lens: Vec<u64> = self.documents.iter().map(Document::num_tokens).collect();
        lens.sort_unstable();
        let n = lens.len();
        let median = if n % 2 == 1 {
            lens[n / 2] as f64
        } else {
            (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
        };
        CorpusStats {
            num_docs: n,
            vocab_size: self.vocab_size,
            total_tokens: lens.iter().sum(),
            median_doc_len: median,
        }
    }
}

fn read_header_line(
    lines: &mut impl Iterator<Item = std::io::Result<String>>,
    path: &Path,
    line_no: &mut usize,
    what: &str,
) -> Result<u64> {
    *line_no += 1;
    let line = lines
        .next()
        .ok_or_else(|| Error::parse(path, *line_no, format!("missing header line ({what})")))?
        .map_err(|e| Error::io(path, e))?;
    line.trim()
        .parse::<u64>()
        .map_err(|_| Error::parse(path, *line_no, format!("malformed header: expected {what}, got {line:?}")))
}

/// Read a sparse docword file. The returned corpus has all responses set to
/// zero; use [`read_responses`] + [`Corpus::attach_responses`] to fill them.
pub fn read_docword(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let mut line_no = 0usize;

    let num_docs = read_header_line(&mut lines, path, &mut line_no, "document count N")?;
    let vocab_size = read_header_line(&mut lines, path, &mut line_no, "vocabulary size V")?;
    let nnz = read_header_line(&mut lines, path, &mut line_no, "triplet count NNZ")?;
    if num_docs == 0 {
        return Err(Error::parse(path, 1, "document count N must be positive"));
    }
    if vocab_size == 0 {
        return Err(Error::parse(path, 2, "vocabulary size V must be positive"));
    }

    // Aggregate repeated (doc, word) pairs.
    let mut maps: Vec<std::collections::BTreeMap<u32, u64>> =
        vec![std::collections::BTreeMap::new(); num_docs as usize];
    let mut last_line_of_doc: Vec<usize> = vec![0; num_docs as usize];
    let mut seen = 0u64;
    for line in lines {
        line_no += 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        seen += 1;
        if seen > nnz {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {nnz} triplets, found more"),
            ));
        }
        let mut parts = trimmed.split_whitespace();
        let mut field = |what: &str| -> Result<i64> {
            parts
                .next()
                .ok_or_else(|| Error::parse(path, line_no, format!("missing {what}")))?
                .parse::<i64>()
                .map_err(|_| Error::parse(path, line_no, format!("malformed {what}")))
        };
        let doc_id = field("doc id")?;
        let word_id = field("word id")?;
        let count = field("count")?;
        if parts.next().is_some() {
            return Err(Error::parse(path, line_no, "trailing fields after triplet"));
        }
        if doc_id < 1 || doc_id as u64 > num_docs {
            return Err(Error::parse(
                path,
                line_no,
                format!("doc id {doc_id} outside [1, {num_docs}]"),
            ));
        }
        if word_id < 1 || word_id as u64 > vocab_size {
            return Err(Error::parse(
                path,
                line_no,
                format!("word id {word_id} outside [1, {vocab_size}]"),
            ));
        }
        if count <= 0 {
            return Err(Error::parse(path, line_no, format!("count {count} must be positive")));
        }
        let d = (doc_id - 1) as usize;
        *maps[d].entry((word_id - 1) as u32).or_insert(0) += count as u64;
        last_line_of_doc[d] = line_no;
    }
    if seen < nnz {
        return Err(Error::parse(
            path,
            line_no.max(3),
            format!("expected {nnz} triplets, found {seen}"),
        ));
    }

    let mut documents = Vec::with_capacity(num_docs as usize);
    for (d, map) in maps.into_iter().enumerate() {
        let m: u64 = map.values().sum();
        if m < 3 {
            let at = if last_line_of_doc[d] > 0 { last_line_of_doc[d] } else { 1 };
            return Err(Error::parse(
                path,
                at,
                format!("document {} has fewer than 3 words (m = {m})", d + 1),
            ));
        }
        let counts = map
            .into_iter()
            .map(|(w, c)| {
                u32::try_from(c)
                    .map(|c| (w, c))
                    .map_err(|_| Error::parse(path, last_line_of_doc[d], "count overflows u32"))
            })
            .collect::<Result<Vec<_>>>()?;
        documents.push(Document { counts, response: 0.0 });
    }
    Corpus::new(documents, vocab_size as usize)
}

/// Read a responses file: `expected` lines with one decimal literal each.
pub fn read_responses(path: impl AsRef<Path>, expected: usize) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::with_capacity(expected);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let y: f64 = trimmed
            .parse()
            .map_err(|_| Error::parse(path, i + 1, format!("malformed response {trimmed:?}")))?;
        if !y.is_finite() {
            return Err(Error::parse(path, i + 1, "response must be finite"));
        }
        values.push(y);
    }
    if values.len() != expected {
        return Err(Error::ResponseCountMismatch {
            expected,
            found: values.len(),
        });
    }
    Ok(values)
}

/// Write the sparse docword file (doc-major, word ids ascending).
pub fn write_docword(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let nnz: usize = corpus.documents().iter().map(|d| d.counts.len()).sum();
    (|| -> std::io::Result<()> {
        writeln!(w, "{}", corpus.num_docs())?;
        writeln!(w, "{}", corpus.vocab_size())?;
        writeln!(w, "{nnz}")?;
        for (d, doc) in corpus.documents().iter().enumerate() {
            for &(word, count) in &doc.counts {
                writeln!(w, "{} {} {}", d + 1, word + 1, count)?;
            }
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Write the responses file (one decimal per line, round-trip exact).
pub fn write_responses(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        for doc in corpus.documents() {
            writeln!(w, "{}", format_float(doc.response))?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Shortest decimal representation that parses back to the same f64.
fn format_float(x: f64) -> String {
    let mut s = format!("{x}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFileJson {
    version: u32,
    k: usize,
    vocab_size: usize,
    alpha0: f64,
    alpha: Vec<f64>,
    eta: Vec<f64>,
    sigma: f64,
    /// Row-major V×k: `topics[w][t]` = probability of word `w` in topic `t`.
    topics: Vec<Vec<f64>>,
}

/// Serialize a model to JSON. Numeric fields round-trip bitwise.
pub fn write_model(model: &SldaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let v = model.vocab_size();
    let k = model.k();
    let topics = (0..v)
        .map(|w| (0..k).map(|t| model.topics()[(w, t)]).collect())
        .collect();
    let json = ModelFileJson {
        version: MODEL_FORMAT_VERSION,
        k,
        vocab_size: v,
        alpha0: model.alpha0(),
        alpha: model.alpha().to_vec(),
        eta: model.eta().to_vec(),
        sigma: model.sigma(),
        topics,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &json)
        .map_err(|e| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Read and validate a model file.
///
/// Topic columns whose sums deviate from 1 by more than 1e-6 are rejected;
/// deviations between 1e-9 and 1e-6 are renormalized with a warning.
/// Returns the model plus any warnings.
pub fn read_model(path: impl AsRef<Path>) -> Result<(SldaModel, Vec<String>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let json: ModelFileJson = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::parse(path, e.line(), format!("malformed model file: {e}")))?;
    if json.version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: MODEL_FORMAT_VERSION,
            found: json.version,
        });
    }
    if json.topics.len() != json.vocab_size
        || json.topics.iter().any(|row| row.len() != json.k)
        || json.alpha.len() != json.k
        || json.eta.len() != json.k
    {
        return Err(Error::InvalidModel(format!(
            "inconsistent dims in {}: expected vocab {} × topics {}",
            path.display(),
            json.vocab_size,
            json.k
        )));
    }
    let alpha_sum: f64 = json.alpha.iter().sum();
    let mut warnings = Vec::new();
    if (alpha_sum - json.alpha0).abs() > 1e-6 * json.alpha0.abs().max(1.0) {
        warnings.push(format!(
            "alpha0 field ({}) disagrees with sum of alpha entries ({alpha_sum})",
            json.alpha0
        ));
    }

    let mut topics = nalgebra::DMatrix::zeros(json.vocab_size, json.k);
    for (w, row) in json.topics.iter().enumerate() {
        for (t, &p) in row.iter().enumerate() {
            topics[(w, t)] = p;
        }
    }
    for t in 0..json.k {
        let sum: f64 = topics.column(t).iter().sum();
        let dev = (sum - 1.0).abs();
        if dev > 1e-6 {
            return Err(Error::InvalidModel(format!(
                "topic column {t} sums to {sum}, outside tolerance 1e-6"
            )));
        }
        if dev > 1e-9 {
            warnings.push(format!("topic column {t} sum {sum} renormalized"));
            let mut col = topics.column_mut(t);
            col /= sum;
        }
    }
    let model = SldaModel::new(json.alpha, topics, json.eta, json.sigma)?;
    Ok((model, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn tmpfile(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn docword_aggregates_counts() {
        let f = tmpfile("2\n5\n4\n1 1 2\n1 3 1\n2 5 4\n2 2 1\n");
        let c = read_docword(f.path()).unwrap();
        assert_eq!(c.num_docs(), 2);
        assert_eq!(c.vocab_size(), 5);
        assert_eq!(c.documents()[0].num_tokens(), 3);
        assert_eq!(c.documents()[1].num_tokens(), 5);
        assert_eq!(c.documents()[0].counts, vec![(0, 2), (2, 1)]);
    }

    #[test]
    fn docword_rejects_short_documents() {
        let f = tmpfile("1\n5\n1\n1 1 2\n");
        let err = read_docword(f.path()).unwrap_err();
        assert!(err.to_string().contains("document 1 has fewer than 3 words"), "{err}");
        assert_eq!(err.exit_code(), 12);
    }

    #[test]
    fn docword_rejects_bad_ids_and_counts() {
        let base = "1\n5\n3\n1 1 2\n1 2 1\n";
        for (bad, needle) in [
            ("1 6 1\n", "word id 6"),
            ("2 1 1\n", "doc id 2"),
            ("1 1 0\n", "count 0"),
            ("1 1 -2\n", "count -2"),
        ] {
            let f = tmpfile(&format!("{base}{bad}"));
            let err = read_docword(f.path()).unwrap_err();
            assert!(err.to_string().contains(needle), "{err} missing {needle}");
            assert!(err.to_string().contains(":6:"), "line number missing in {err}");
        }
    }

    #[test]
    fn docword_rejects_malformed_header() {
        let f = tmpfile("two\n5\n0\n");
        let err = read_docword(f.path()).unwrap_err();
        assert!(err.to_string().contains("malformed header"), "{err}");
    }

    #[test]
    fn docword_rejects_missing_doc() {
        // doc 2 never appears
        let f = tmpfile("2\n5\n3\n1 1 1\n1 2 1\n1 3 1\n");
        let err = read_docword(f.path()).unwrap_err();
        assert!(err.to_string().contains("document 2 has fewer than 3 words (m = 0)"), "{err}");
    }

    #[test]
    fn responses_roundtrip_and_errors() {
        let f = tmpfile("0.5\n-1.0\n2.25\n");
        assert_eq!(read_responses(f.path(), 3).unwrap(), vec![0.5, -1.0, 2.25]);
        let err = read_responses(f.path(), 4).unwrap_err();
        assert_eq!(err.to_string(), "expected 4 responses, found 3");
        let empty = tmpfile("");
        assert_eq!(read_responses(empty.path(), 0).unwrap(), Vec::<f64>::new());
        let bad = tmpfile("0.5\nxyz\n");
        assert!(read_responses(bad.path(), 2).unwrap_err().to_string().contains("malformed response"));
    }

    #[test]
    fn stats_match_recount() {
        let docs = vec![
            Document { counts: vec![(0, 2), (1, 1)], response: 1.0 },
            Document { counts: vec![(2, 5)], response: -1.0 },
            Document { counts: vec![(0, 1), (3, 3)], response: 0.0 },
        ];
        let c = Corpus::new(docs, 4).unwrap();
        let s = c.stats();
        assert_eq!(s.num_docs, 3);
        assert_eq!(s.total_tokens, 3 + 5 + 4);
        assert_eq!(s.median_doc_len, 4.0);
        assert_eq!(s.vocab_size, 4);
    }

    #[test]
    fn standardize_centers_and_scales() {
        let docs = vec![
            Document { counts: vec![(0, 3)], response: 1.0 },
            Document { counts: vec![(0, 3)], response: 3.0 },
        ];
        let mut c = Corpus::new(docs, 1).unwrap();
        let (mean, sd) = c.standardize_responses().unwrap();
        assert_eq!((mean, sd), (2.0, 1.0));
        assert_eq!(c.responses(), vec![-1.0, 1.0]);
        let mut degenerate = c.clone();
        degenerate.attach_responses(&[5.0, 5.0]).unwrap();
        assert!(degenerate.standardize_responses().is_err());
    }

    fn toy_model() -> SldaModel {
        let topics = DMatrix::from_column_slice(3, 2, &[0.5, 0.25, 0.25, 0.1, 0.2, 0.7]);
        SldaModel::new(vec![0.3, 0.7], topics, vec![1.5, -0.5], 0.25).unwrap()
    }

    #[test]
    fn model_roundtrip_is_lossless() {
        let model = toy_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        write_model(&model, &path).unwrap();
        let (back, warnings) = read_model(&path).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(back.alpha(), model.alpha());
        assert_eq!(back.eta(), model.eta());
        assert_eq!(back.sigma(), model.sigma());
        assert_eq!(back.topics(), model.topics());
    }

    #[test]
    fn model_column_sum_policy() {
        let model = toy_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        write_model(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();

        // Slightly perturb one entry: sum 1 + 1e-8 → renormalized with warning.
        let nudged = text.replace("0.25,", "0.25000001,");
        assert_ne!(text, nudged);
        std::fs::write(&path, &nudged).unwrap();
        let (_, warnings) = read_model(&path).unwrap();
        assert!(warnings.iter().any(|w| w.contains("renormalized")), "{warnings:?}");

        // Gross violation: sum 0.9 → error.
        let broken = text.replace("0.5,", "0.4,");
        std::fs::write(&path, &broken).unwrap();
        let err = read_model(&path).unwrap_err();
        assert!(err.to_string().contains("sums to"), "{err}");
    }

    #[test]
    fn model_version_gate() {
        let model = toy_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        write_model(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, text.replace("\"version\": 1", "\"version\": 9")).unwrap();
        match read_model(&path).unwrap_err() {
            Error::VersionMismatch { expected: 1, found: 9 } => {}
            other => panic!("unexpected error {other}"),
        }
    }

    proptest! {
        #[test]
        fn corpus_roundtrip(raw in proptest::collection::vec(
            (proptest::collection::btree_map(0u32..20, 1u32..5, 1..6), -10.0f64..10.0),
            1..12,
        )) {
            let docs: Vec<Document> = raw
                .into_iter()
                .map(|(map, y)| {
                    let mut counts: Vec<(u32, u32)> = map.into_iter().collect();
                    // pad to m ≥ 3 deterministically
                    let m: u32 = counts.iter().map(|&(_, c)| c).sum();
                    if m < 3 {
                        counts.last_mut().map(|e| e.1 += 3 - m);
                    }
                    Document { counts, response: y }
                })
                .collect();
            let corpus = Corpus::new(docs, 20).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let dw = dir.path().join("docword.txt");
            let rp = dir.path().join("responses.txt");
            write_docword(&corpus, &dw).unwrap();
            write_responses(&corpus, &rp).unwrap();
            let mut back = read_docword(&dw).unwrap();
            let responses = read_responses(&rp, corpus.num_docs()).unwrap();
            back.attach_responses(&responses).unwrap();
            prop_assert_eq!(back, corpus);
        }

        #[test]
        fn float_format_roundtrips(x in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            let s = format_float(x);
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
