//! Document ingestion, vocabulary construction and corpus statistics.
//!
//! Input is a line-delimited stream of JSON records with `id`, `title` and
//! `body` fields and an optional `tokens` array. Records that carry `tokens`
//! skip the internal tokenizer, which lets an external lemmatizer or
//! part-of-speech filter supply the Text layer directly.

mod tokenizer;

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tokenizer::{bundled_stopwords, Span, Token, Tokenizer, TokenizerConfig};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { id: String, line: usize },
    #[error("cannot read stopword file {}: {source}", path.display())]
    StopwordFile {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    title: String,
    body: String,
    #[serde(default)]
    tokens: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub title: String,
    pub body: String,
    /// Vocabulary ids in reading order.
    pub tokens: Vec<u32>,
    /// Character span of each token; `None` for records ingested with
    /// pre-supplied tokens, whose surface positions are unknown.
    pub token_spans: Option<Vec<Span>>,
    body_len: usize,
}

impl Document {
    /// Body length in Unicode scalar values.
    pub fn body_len(&self) -> usize {
        self.body_len
    }

    /// Empty documents stay readable but are left out of the Text layer.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn slice(&self, span: Span) -> Option<&str> {
        char_slice(&self.body, span)
    }
}

/// Substring by character offsets, `None` when the span is out of range.
pub fn char_slice(text: &str, span: Span) -> Option<&str> {
    if span.start > span.end {
        return None;
    }
    let mut indices = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()));
    let start = indices.nth(span.start)?;
    let end = if span.end == span.start {
        start
    } else {
        indices.nth(span.end - span.start - 1)?
    };
    Some(&text[start..end])
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    frequency: Vec<u64>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn frequency(&self, id: u32) -> u64 {
        self.frequency.get(id as usize).copied().unwrap_or(0)
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequency
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_documents: usize,
    pub n_words: usize,
    pub n_text_edges: u64,
    pub mean_doc_length: f64,
    /// Documents with no tokens after filtering.
    pub n_empty_documents: usize,
}

impl CorpusStats {
    fn compute(vocab: &Vocabulary, docs: &[Document]) -> Self {
        let n_text_edges: u64 = docs.iter().map(|d| d.tokens.len() as u64).sum();
        let mean_doc_length = if docs.is_empty() {
            0.0
        } else {
            n_text_edges as f64 / docs.len() as f64
        };
        CorpusStats {
            n_documents: docs.len(),
            n_words: vocab.len(),
            n_text_edges,
            mean_doc_length,
            n_empty_documents: docs.iter().filter(|d| d.is_empty()).count(),
        }
    }
}

/// Maps each stem to the vocabulary ids whose term stems to it.
#[derive(Clone, Debug, Default)]
pub struct StemIndex {
    word_stems: Vec<String>,
    by_stem: HashMap<String, Vec<u32>>,
}

impl StemIndex {
    pub fn build(vocab: &Vocabulary, tokenizer: &Tokenizer) -> Self {
        let word_stems: Vec<String> = vocab.terms().iter().map(|t| tokenizer.stem(t)).collect();
        let mut by_stem: HashMap<String, Vec<u32>> = HashMap::new();
        for (id, stem) in word_stems.iter().enumerate() {
            by_stem.entry(stem.clone()).or_default().push(id as u32);
        }
        StemIndex {
            word_stems,
            by_stem,
        }
    }

    pub fn stem_of(&self, word_id: u32) -> Option<&str> {
        self.word_stems.get(word_id as usize).map(String::as_str)
    }

    pub fn words_for(&self, stem: &str) -> &[u32] {
        self.by_stem.get(stem).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StemCandidate {
    pub stem: String,
    /// Distinct lowercase forms in the passage that produced this stem.
    pub surface: Vec<String>,
    /// Vocabulary ids sharing the stem.
    pub word_ids: Vec<u32>,
}

/// Keyword candidates for a highlighted passage, in first-occurrence order.
pub fn stem_candidates(
    passage: &str,
    tokenizer: &Tokenizer,
    index: &StemIndex,
) -> Vec<StemCandidate> {
    let mut out: Vec<StemCandidate> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for tok in tokenizer.tokenize(passage) {
        let stem = tokenizer.stem(&tok.text);
        match seen.get(&stem) {
            Some(&i) => {
                if !out[i].surface.contains(&tok.text) {
                    out[i].surface.push(tok.text);
                }
            }
            None => {
                seen.insert(stem.clone(), out.len());
                out.push(StemCandidate {
                    word_ids: index.words_for(&stem).to_vec(),
                    stem,
                    surface: vec![tok.text],
                });
            }
        }
    }
    out
}

/// An ingested corpus. Immutable once built.
#[derive(Debug)]
pub struct Corpus {
    vocabulary: Vocabulary,
    documents: Vec<Document>,
    stats: CorpusStats,
    tokenizer: Tokenizer,
    stems: StemIndex,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn stats(&self) -> &CorpusStats {
        &self.stats
    }

    pub fn tokenizer(&self) -> &Tokenizer {
        &self.tokenizer
    }

    pub fn stems(&self) -> &StemIndex {
        &self.stems
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.documents[i])
    }

    pub fn document_index(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn stem_candidates(&self, passage: &str) -> Vec<StemCandidate> {
        stem_candidates(passage, &self.tokenizer, &self.stems)
    }
}

struct PendingDoc {
    id: String,
    title: String,
    body: String,
    terms: Vec<String>,
    spans: Option<Vec<Span>>,
}

/// Reads line-delimited records and builds the vocabulary, documents and
/// statistics. Blank lines are skipped; line numbers in errors are 1-based.
pub fn ingest_corpus<R: BufRead>(source: R, tokenizer: Tokenizer) -> Result<Corpus, CorpusError> {
    let mut pending = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        if by_id.contains_key(&rec.id) {
            return Err(CorpusError::DuplicateId {
                id: rec.id,
                line: line_no,
            });
        }
        by_id.insert(rec.id.clone(), pending.len());
        let (terms, spans) = match rec.tokens {
            Some(tokens) => (tokens.into_iter().filter(|t| !t.is_empty()).collect(), None),
            None => {
                let toks = tokenizer.tokenize(&rec.body);
                let spans = toks.iter().map(|t| t.span).collect();
                (toks.into_iter().map(|t| t.text).collect(), Some(spans))
            }
        };
        pending.push(PendingDoc {
            id: rec.id,
            title: rec.title,
            body: rec.body,
            terms,
            spans,
        });
    }

    let terms: BTreeSet<&str> = pending
        .iter()
        .flat_map(|d| d.terms.iter().map(String::as_str))
        .collect();
    let terms: Vec<String> = terms.into_iter().map(str::to_string).collect();
    let index: HashMap<String, u32> = terms
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i as u32))
        .collect();
    let mut frequency = vec![0u64; terms.len()];

    let documents: Vec<Document> = pending
        .into_iter()
        .map(|p| {
            let tokens: Vec<u32> = p.terms.iter().map(|t| index[t]).collect();
            for &t in &tokens {
                frequency[t as usize] += 1;
            }
            let body_len = p.body.chars().count();
            Document {
                id: p.id,
                title: p.title,
                body: p.body,
                tokens,
                token_spans: p.spans,
                body_len,
            }
        })
        .collect();

    let vocabulary = Vocabulary {
        terms,
        index,
        frequency,
    };
    let stats = CorpusStats::compute(&vocabulary, &documents);
    let stems = StemIndex::build(&vocabulary, &tokenizer);
    Ok(Corpus {
        vocabulary,
        documents,
        stats,
        tokenizer,
        stems,
        by_id,
    })
}
