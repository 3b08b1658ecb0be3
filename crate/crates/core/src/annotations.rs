//! The analyst's coding schema: codes, categories and highlighted passages.
//!
//! Every vocabulary word is owned by exactly one code. Words that no
//! highlight selected as a keyword belong to the reserved `non-keyword`
//! code. A user code's keyword set is always the union of the keywords
//! chosen in its highlights, so ownership is derived rather than edited.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Span};

pub const NON_KEYWORD: &str = "non-keyword";

/// Qualitative 8-entry palette; category `i` uses entry `i % 8`.
pub const PALETTE: [&str; 8] = [
    "#66c2a5", "#fc8d62", "#8da0cb", "#e78ac3", "#a6d854", "#ffd92f", "#e5c494", "#b3b3b3",
];

pub fn palette_color(color_index: u32) -> &'static str {
    PALETTE[color_index as usize % PALETTE.len()]
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("{kind} `{id}` not found")]
    NotFound { kind: &'static str, id: String },
    #[error("document `{0}` not found")]
    UnknownDocument(String),
    #[error("span [{start}, {end}) is outside the document (length {len})")]
    SpanOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("span overlaps existing highlight `{existing}`")]
    OverlappingHighlight { existing: String },
    #[error("keyword `{term}` is already owned by code `{owner}`")]
    KeywordConflict {
        word_id: u32,
        term: String,
        owner: String,
    },
    #[error("word id {word_id} does not occur in the highlighted passage")]
    InvalidKeyword { word_id: u32 },
    #[error("the reserved `non-keyword` code cannot be modified this way")]
    ReservedCode,
    #[error("label must not be empty")]
    EmptyLabel,
    #[error("label `{0}` is already in use")]
    DuplicateLabel(String),
    #[error("code `{0}` still has highlights")]
    CodeInUse(String),
    #[error("annotation file: {0}")]
    Storage(String),
}

impl From<io::Error> for AnnotationError {
    fn from(e: io::Error) -> Self {
        AnnotationError::Storage(e.to_string())
    }
}

impl From<serde_json::Error> for AnnotationError {
    fn from(e: serde_json::Error) -> Self {
        AnnotationError::Storage(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    pub id: String,
    pub label: String,
    pub category_id: Option<String>,
    pub keywords: BTreeSet<u32>,
    pub created_at: String,
}

impl Code {
    pub fn is_reserved(&self) -> bool {
        self.id == NON_KEYWORD
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub label: String,
    pub color_index: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub id: String,
    pub doc_id: String,
    pub start: usize,
    pub end: usize,
    pub code_id: String,
    pub keywords: BTreeSet<u32>,
    pub memo: String,
    pub created_at: String,
    pub updated_at: String,
}

impl Highlight {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

#[derive(Clone, Debug, Default)]
pub struct NewHighlight {
    pub doc_id: String,
    pub span: Span,
    pub code_label: String,
    pub keywords: BTreeSet<u32>,
    pub memo: String,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct HighlightPatch {
    pub code_label: Option<String>,
    pub keywords: Option<BTreeSet<u32>>,
    pub memo: Option<String>,
}

/// Which codes pass the pin filter on the map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CodeFilter {
    All,
    None,
    Codes(BTreeSet<String>),
}

impl CodeFilter {
    pub fn admits(&self, code_id: &str) -> bool {
        match self {
            CodeFilter::All => true,
            CodeFilter::None => false,
            CodeFilter::Codes(set) => set.contains(code_id),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PassageSegment {
    pub text: String,
    pub keyword: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Passage {
    pub highlight_id: String,
    pub doc_id: String,
    pub title: String,
    pub start: usize,
    pub end: usize,
    pub text: String,
    /// The passage split into runs, with analyst keywords flagged.
    pub segments: Vec<PassageSegment>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CodeSummary {
    pub code_id: String,
    pub label: String,
    pub category_id: Option<String>,
    pub memos: Vec<String>,
    pub passages: Vec<Passage>,
}

fn now() -> String {
    chrono::Utc::now()
        .format("%Y-%m-%dT%H:%M:%S%.3fZ")
        .to_string()
}

fn same_label(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

/// Versioned annotation store. Every successful mutation bumps `version` by one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationStore {
    pub version: u64,
    pub codes: Vec<Code>,
    pub categories: Vec<Category>,
    pub highlights: Vec<Highlight>,
}

impl Default for AnnotationStore {
    fn default() -> Self {
        AnnotationStore {
            version: 0,
            codes: vec![Code {
                id: NON_KEYWORD.to_string(),
                label: NON_KEYWORD.to_string(),
                category_id: None,
                keywords: BTreeSet::new(),
                created_at: "1970-01-01T00:00:00.000Z".to_string(),
            }],
            categories: Vec::new(),
            highlights: Vec::new(),
        }
    }
}

impl AnnotationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn code(&self, id: &str) -> Option<&Code> {
        self.codes.iter().find(|c| c.id == id)
    }

    pub fn code_by_label(&self, label: &str) -> Option<&Code> {
        self.codes.iter().find(|c| same_label(&c.label, label))
    }

    pub fn category(&self, id: &str) -> Option<&Category> {
        self.categories.iter().find(|c| c.id == id)
    }

    pub fn highlight(&self, id: &str) -> Option<&Highlight> {
        self.highlights.iter().find(|h| h.id == id)
    }

    pub fn user_codes(&self) -> impl Iterator<Item = &Code> {
        self.codes.iter().filter(|c| !c.is_reserved())
    }

    pub fn highlights_for_doc<'a>(
        &'a self,
        doc_id: &'a str,
    ) -> impl Iterator<Item = &'a Highlight> + 'a {
        self.highlights.iter().filter(move |h| h.doc_id == doc_id)
    }

    /// Owning code of a vocabulary word; `non-keyword` when uncoded.
    pub fn owner_of(&self, word_id: u32) -> &str {
        self.user_codes()
            .find(|c| c.keywords.contains(&word_id))
            .map(|c| c.id.as_str())
            .unwrap_or(NON_KEYWORD)
    }

    /// Number of highlights of `code_id` that selected `word_id`.
    pub fn keyword_selections(&self, code_id: &str, word_id: u32) -> usize {
        self.highlights
            .iter()
            .filter(|h| h.code_id == code_id && h.keywords.contains(&word_id))
            .count()
    }

    pub fn create_highlight(
        &mut self,
        corpus: &Corpus,
        req: NewHighlight,
    ) -> Result<Highlight, AnnotationError> {
        let doc = corpus
            .document(&req.doc_id)
            .ok_or_else(|| AnnotationError::UnknownDocument(req.doc_id.clone()))?;
        let span = req.span;
        if span.start >= span.end || span.end > doc.body_len() {
            return Err(AnnotationError::SpanOutOfRange {
                start: span.start,
                end: span.end,
                len: doc.body_len(),
            });
        }
        if let Some(h) = self
            .highlights_for_doc(&req.doc_id)
            .find(|h| h.span().overlaps(&span))
        {
            return Err(AnnotationError::OverlappingHighlight {
                existing: h.id.clone(),
            });
        }
        check_keywords(corpus, &req.doc_id, span, &req.keywords)?;

        let mut next = self.clone();
        next.version += 1;
        let code_id = next.resolve_or_create_code(&req.code_label)?;
        let stamp = now();
        let highlight = Highlight {
            id: format!("h{}", next.version),
            doc_id: req.doc_id,
            start: span.start,
            end: span.end,
            code_id,
            keywords: req.keywords,
            memo: req.memo,
            created_at: stamp.clone(),
            updated_at: stamp,
        };
        next.highlights.push(highlight.clone());
        next.rederive_keywords(corpus, &highlight.id)?;
        *self = next;
        Ok(highlight)
    }

    pub fn update_highlight(
        &mut self,
        corpus: &Corpus,
        id: &str,
        patch: HighlightPatch,
    ) -> Result<Highlight, AnnotationError> {
        let idx = self
            .highlights
            .iter()
            .position(|h| h.id == id)
            .ok_or_else(|| not_found("highlight", id))?;
        let mut next = self.clone();
        next.version += 1;
        if let Some(label) = &patch.code_label {
            let code_id = next.resolve_or_create_code(label)?;
            next.highlights[idx].code_id = code_id;
        }
        if let Some(keywords) = patch.keywords {
            let h = &next.highlights[idx];
            check_keywords(corpus, &h.doc_id, h.span(), &keywords)?;
            next.highlights[idx].keywords = keywords;
        }
        if let Some(memo) = patch.memo {
            next.highlights[idx].memo = memo;
        }
        next.highlights[idx].updated_at = now();
        next.rederive_keywords(corpus, id)?;
        let out = next.highlights[idx].clone();
        *self = next;
        Ok(out)
    }

    pub fn delete_highlight(&mut self, corpus: &Corpus, id: &str) -> Result<(), AnnotationError> {
        let idx = self
            .highlights
            .iter()
            .position(|h| h.id == id)
            .ok_or_else(|| not_found("highlight", id))?;
        let mut next = self.clone();
        next.version += 1;
        next.highlights.remove(idx);
        next.rederive_keywords(corpus, "")?;
        *self = next;
        Ok(())
    }

    pub fn assign_category(
        &mut self,
        code_id: &str,
        label: &str,
    ) -> Result<Category, AnnotationError> {
        let label = label.trim();
        if label.is_empty() {
            return Err(AnnotationError::EmptyLabel);
        }
        let code_idx = self
            .codes
            .iter()
            .position(|c| c.id == code_id)
            .ok_or_else(|| not_found("code", code_id))?;
        if self.codes[code_idx].is_reserved() {
            return Err(AnnotationError::ReservedCode);
        }
        self.version += 1;
        let category = match self.categories.iter().find(|c| same_label(&c.label, label)) {
            Some(c) => c.clone(),
            None => {
                let c = Category {
                    id: format!("k{}", self.version),
                    label: label.to_string(),
                    color_index: self.categories.len() as u32,
                };
                self.categories.push(c.clone());
                c
            }
        };
        self.codes[code_idx].category_id = Some(category.id.clone());
        Ok(category)
    }

    pub fn rename_code(&mut self, code_id: &str, label: &str) -> Result<Code, AnnotationError> {
        let label = label.trim();
        if label.is_empty() {
            return Err(AnnotationError::EmptyLabel);
        }
        let idx = self
            .codes
            .iter()
            .position(|c| c.id == code_id)
            .ok_or_else(|| not_found("code", code_id))?;
        if self.codes[idx].is_reserved() || same_label(label, NON_KEYWORD) {
            return Err(AnnotationError::ReservedCode);
        }
        if self
            .codes
            .iter()
            .any(|c| c.id != code_id && same_label(&c.label, label))
        {
            return Err(AnnotationError::DuplicateLabel(label.to_string()));
        }
        self.version += 1;
        self.codes[idx].label = label.to_string();
        Ok(self.codes[idx].clone())
    }

    /// Removes a code that no highlight references.
    pub fn delete_code(&mut self, code_id: &str) -> Result<(), AnnotationError> {
        let idx = self
            .codes
            .iter()
            .position(|c| c.id == code_id)
            .ok_or_else(|| not_found("code", code_id))?;
        if self.codes[idx].is_reserved() {
            return Err(AnnotationError::ReservedCode);
        }
        if self.highlights.iter().any(|h| h.code_id == code_id) {
            return Err(AnnotationError::CodeInUse(code_id.to_string()));
        }
        self.version += 1;
        self.codes.remove(idx);
        Ok(())
    }

    pub fn code_summary(
        &self,
        corpus: &Corpus,
        code_ids: &[String],
    ) -> Result<Vec<CodeSummary>, AnnotationError> {
        code_ids
            .iter()
            .map(|id| {
                let code = self.code(id).ok_or_else(|| not_found("code", id))?;
                let mut memos = Vec::new();
                let mut passages = Vec::new();
                for h in self.highlights.iter().filter(|h| &h.code_id == id) {
                    if !h.memo.is_empty() {
                        memos.push(h.memo.clone());
                    }
                    let doc = corpus
                        .document(&h.doc_id)
                        .ok_or_else(|| AnnotationError::UnknownDocument(h.doc_id.clone()))?;
                    let text = doc.slice(h.span()).unwrap_or_default().to_string();
                    let segments = mark_keywords(corpus, &text, &h.keywords);
                    passages.push(Passage {
                        highlight_id: h.id.clone(),
                        doc_id: h.doc_id.clone(),
                        title: doc.title.clone(),
                        start: h.start,
                        end: h.end,
                        text,
                        segments,
                    });
                }
                Ok(CodeSummary {
                    code_id: code.id.clone(),
                    label: code.label.clone(),
                    category_id: code.category_id.clone(),
                    memos,
                    passages,
                })
            })
            .collect()
    }

    /// One row per highlight, RFC 4180 quoting, UTF-8.
    pub fn export_csv<W: Write>(&self, corpus: &Corpus, out: W) -> Result<(), AnnotationError> {
        let mut w = csv::Writer::from_writer(out);
        let storage = |e: csv::Error| AnnotationError::Storage(e.to_string());
        w.write_record([
            "doc_id",
            "title",
            "start",
            "end",
            "passage_text",
            "code_label",
            "category_label",
            "keywords",
            "memo",
            "created_at",
            "updated_at",
        ])
        .map_err(storage)?;
        for h in &self.highlights {
            let doc = corpus.document(&h.doc_id);
            let title = doc.map(|d| d.title.as_str()).unwrap_or("");
            let passage = doc.and_then(|d| d.slice(h.span())).unwrap_or("");
            let code = self.code(&h.code_id);
            let code_label = code.map(|c| c.label.as_str()).unwrap_or("");
            let category_label = code
                .and_then(|c| c.category_id.as_deref())
                .and_then(|id| self.category(id))
                .map(|c| c.label.as_str())
                .unwrap_or("");
            let stems: BTreeSet<&str> = h
                .keywords
                .iter()
                .filter_map(|&w| corpus.stems().stem_of(w))
                .collect();
            let keywords = stems.into_iter().collect::<Vec<_>>().join(";");
            w.write_record([
                h.doc_id.as_str(),
                title,
                &h.start.to_string(),
                &h.end.to_string(),
                passage,
                code_label,
                category_label,
                &keywords,
                &h.memo,
                &h.created_at,
                &h.updated_at,
            ])
            .map_err(storage)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_csv_string(&self, corpus: &Corpus) -> Result<String, AnnotationError> {
        let mut buf = Vec::new();
        self.export_csv(corpus, &mut buf)?;
        String::from_utf8(buf).map_err(|e| AnnotationError::Storage(e.to_string()))
    }

    /// Pretty JSON with object keys in sorted order.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("annotation store serializes");
        let mut s = serde_json::to_string_pretty(&value).expect("json value serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), AnnotationError> {
        crate::project::write_atomic(path, self.canonical_json().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AnnotationError> {
        let text = fs::read_to_string(path)?;
        let store: AnnotationStore = serde_json::from_str(&text)?;
        if store.code(NON_KEYWORD).is_none() {
            return Err(AnnotationError::Storage(
                "missing reserved non-keyword code".into(),
            ));
        }
        Ok(store)
    }

    fn resolve_or_create_code(&mut self, label: &str) -> Result<String, AnnotationError> {
        let label = label.trim();
        if label.is_empty() {
            return Err(AnnotationError::EmptyLabel);
        }
        if same_label(label, NON_KEYWORD) {
            return Err(AnnotationError::ReservedCode);
        }
        if let Some(c) = self.code_by_label(label) {
            return Ok(c.id.clone());
        }
        let code = Code {
            id: format!("c{}", self.version),
            label: label.to_string(),
            category_id: None,
            keywords: BTreeSet::new(),
            created_at: now(),
        };
        let id = code.id.clone();
        self.codes.push(code);
        Ok(id)
    }

    /// Recomputes every code's keyword set from its highlights. A word
    /// claimed by two codes is a conflict; the reported owner is the code
    /// that does not belong to `edited`.
    fn rederive_keywords(&mut self, corpus: &Corpus, edited: &str) -> Result<(), AnnotationError> {
        let edited_code = self.highlight(edited).map(|h| h.code_id.clone());
        let mut owner: HashMap<u32, &str> = HashMap::new();
        let mut sets: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
        for h in &self.highlights {
            for &w in &h.keywords {
                match owner.get(&w) {
                    Some(&o) if o != h.code_id => {
                        let other = if Some(o) == edited_code.as_deref() {
                            h.code_id.as_str()
                        } else {
                            o
                        };
                        let label = self
                            .code(other)
                            .map(|c| c.label.clone())
                            .unwrap_or_default();
                        return Err(AnnotationError::KeywordConflict {
                            word_id: w,
                            term: corpus.vocabulary().term(w).unwrap_or_default().to_string(),
                            owner: label,
                        });
                    }
                    _ => {
                        owner.insert(w, &h.code_id);
                        sets.entry(&h.code_id).or_default().insert(w);
                    }
                }
            }
        }
        let sets: BTreeMap<String, BTreeSet<u32>> =
            sets.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for code in self.codes.iter_mut().filter(|c| !c.is_reserved()) {
            code.keywords = sets.get(&code.id).cloned().unwrap_or_default();
        }
        Ok(())
    }
}

fn not_found(kind: &'static str, id: &str) -> AnnotationError {
    AnnotationError::NotFound {
        kind,
        id: id.to_string(),
    }
}

fn check_keywords(
    corpus: &Corpus,
    doc_id: &str,
    span: Span,
    keywords: &BTreeSet<u32>,
) -> Result<(), AnnotationError> {
    if keywords.is_empty() {
        return Ok(());
    }
    let doc = corpus
        .document(doc_id)
        .ok_or_else(|| AnnotationError::UnknownDocument(doc_id.to_string()))?;
    let passage = doc.slice(span).unwrap_or_default();
    let allowed: BTreeSet<u32> = corpus
        .stem_candidates(passage)
        .into_iter()
        .flat_map(|c| c.word_ids)
        .collect();
    match keywords.iter().find(|w| !allowed.contains(w)) {
        Some(&word_id) => Err(AnnotationError::InvalidKeyword { word_id }),
        None => Ok(()),
    }
}

fn mark_keywords(corpus: &Corpus, text: &str, keywords: &BTreeSet<u32>) -> Vec<PassageSegment> {
    let chars: Vec<char> = text.chars().collect();
    let mut segments: Vec<PassageSegment> = Vec::new();
    let mut cursor = 0;
    let push = |segments: &mut Vec<PassageSegment>, text: String, keyword: bool| {
        if text.is_empty() {
            return;
        }
        match segments.last_mut() {
            Some(last) if last.keyword == keyword && !keyword => last.text.push_str(&text),
            _ => segments.push(PassageSegment { text, keyword }),
        }
    };
    for tok in corpus.tokenizer().tokenize(text) {
        let is_kw = corpus
            .vocabulary()
            .id(&tok.text)
            .is_some_and(|id| keywords.contains(&id));
        if !is_kw {
            continue;
        }
        push(
            &mut segments,
            chars[cursor..tok.span.start].iter().collect(),
            false,
        );
        push(
            &mut segments,
            chars[tok.span.start..tok.span.end].iter().collect(),
            true,
        );
        cursor = tok.span.end;
    }
    push(&mut segments, chars[cursor..].iter().collect(), false);
    segments
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_corpus, Tokenizer};

    fn corpus() -> Corpus {
        let src = concat!(
            "{\"id\":\"d1\",\"title\":\"Ribs\",\"body\":\"Smoky ribs for meat lovers and a friend.\"}\n",
            "{\"id\":\"d2\",\"title\":\"Cake\",\"body\":\"My grandmother baked these cookies with a friend.\"}\n",
        );
        ingest_corpus(src.as_bytes(), Tokenizer::default()).unwrap()
    }

    fn ids(c: &Corpus, terms: &[&str]) -> BTreeSet<u32> {
        terms
            .iter()
            .map(|t| c.vocabulary().id(t).unwrap())
            .collect()
    }

    fn new(doc: &str, start: usize, end: usize, label: &str, kws: BTreeSet<u32>) -> NewHighlight {
        NewHighlight {
            doc_id: doc.into(),
            span: Span::new(start, end),
            code_label: label.into(),
            keywords: kws,
            memo: String::new(),
        }
    }

    #[test]
    fn new_code_takes_keyword_ownership() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let kws = ids(&c, &["meat", "lovers"]);
        let h = s
            .create_highlight(&c, new("d1", 0, 29, "meat-lovers", kws.clone()))
            .unwrap();
        assert_eq!(s.user_codes().count(), 1);
        assert_eq!(s.version, 1);
        for w in kws {
            assert_eq!(s.owner_of(w), h.code_id);
        }
        assert_eq!(
            s.owner_of(c.vocabulary().id("friend").unwrap()),
            NON_KEYWORD
        );
    }

    #[test]
    fn memo_only_highlight_leaves_constraints() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let mut req = new("d1", 0, 5, "smoke", BTreeSet::new());
        req.memo = "only a note".into();
        s.create_highlight(&c, req).unwrap();
        assert!(s.user_codes().all(|c| c.keywords.is_empty()));
    }

    #[test]
    fn keyword_conflict_names_owner() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let friend = ids(&c, &["friend"]);
        s.create_highlight(&c, new("d1", 30, 39, "company", friend.clone()))
            .unwrap();
        let err = s
            .create_highlight(&c, new("d2", 38, 48, "social", friend))
            .unwrap_err();
        match err {
            AnnotationError::KeywordConflict { owner, term, .. } => {
                assert_eq!(owner, "company");
                assert_eq!(term, "friend");
            }
            e => panic!("{e:?}"),
        }
        assert_eq!(s.version, 1);
    }

    #[test]
    fn overlap_and_range_errors() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        s.create_highlight(&c, new("d1", 0, 10, "a", BTreeSet::new()))
            .unwrap();
        assert!(matches!(
            s.create_highlight(&c, new("d1", 9, 12, "a", BTreeSet::new())),
            Err(AnnotationError::OverlappingHighlight { .. })
        ));
        assert!(matches!(
            s.create_highlight(&c, new("d1", 10, 400, "a", BTreeSet::new())),
            Err(AnnotationError::SpanOutOfRange { .. })
        ));
        assert!(matches!(
            s.create_highlight(&c, new("d1", 12, 12, "a", BTreeSet::new())),
            Err(AnnotationError::SpanOutOfRange { .. })
        ));
        s.create_highlight(&c, new("d1", 10, 12, "a", BTreeSet::new()))
            .unwrap();
    }

    #[test]
    fn keywords_must_come_from_passage() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let err = s
            .create_highlight(&c, new("d1", 0, 10, "a", ids(&c, &["cookies"])))
            .unwrap_err();
        assert!(matches!(err, AnnotationError::InvalidKeyword { .. }));
    }

    #[test]
    fn removing_keyword_reverts_to_non_keyword() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let h = s
            .create_highlight(&c, new("d1", 0, 29, "meat", ids(&c, &["meat", "ribs"])))
            .unwrap();
        let patch = HighlightPatch {
            keywords: Some(ids(&c, &["meat"])),
            ..Default::default()
        };
        s.update_highlight(&c, &h.id, patch).unwrap();
        assert_eq!(s.owner_of(c.vocabulary().id("ribs").unwrap()), NON_KEYWORD);
        assert_eq!(s.owner_of(c.vocabulary().id("meat").unwrap()), h.code_id);
    }

    #[test]
    fn memo_edit_keeps_keywords() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let h = s
            .create_highlight(&c, new("d1", 0, 29, "meat", ids(&c, &["meat"])))
            .unwrap();
        let patch = HighlightPatch {
            memo: Some("revisit".into()),
            ..Default::default()
        };
        let h2 = s.update_highlight(&c, &h.id, patch).unwrap();
        assert_eq!(h2.keywords, h.keywords);
        assert_eq!(h2.memo, "revisit");
        assert_eq!(s.version, 2);
    }

    #[test]
    fn delete_keeps_code_but_empties_keywords() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let h = s
            .create_highlight(&c, new("d1", 0, 29, "meat", ids(&c, &["meat"])))
            .unwrap();
        s.delete_highlight(&c, &h.id).unwrap();
        assert_eq!(s.version, 2);
        assert!(s.highlights_for_doc("d1").next().is_none());
        let code = s.code(&h.code_id).unwrap();
        assert!(code.keywords.is_empty());
        assert!(matches!(
            s.delete_highlight(&c, &h.id),
            Err(AnnotationError::NotFound { .. })
        ));
    }

    #[test]
    fn categories_in_creation_order() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let a = s
            .create_highlight(&c, new("d1", 0, 5, "A", BTreeSet::new()))
            .unwrap();
        let b = s
            .create_highlight(&c, new("d1", 6, 10, "B", BTreeSet::new()))
            .unwrap();
        let k1 = s.assign_category(&a.code_id, "food").unwrap();
        let k2 = s.assign_category(&b.code_id, "Food").unwrap();
        assert_eq!(k1, k2);
        assert_eq!(s.categories.len(), 1);
        assert_eq!(
            s.code(&a.code_id).unwrap().category_id,
            s.code(&b.code_id).unwrap().category_id
        );
        for i in 1..9 {
            s.assign_category(&a.code_id, &format!("cat{i}")).unwrap();
        }
        let ninth = s.categories.last().unwrap();
        assert_eq!(ninth.color_index, 8);
        assert_eq!(palette_color(ninth.color_index), PALETTE[0]);
        assert_eq!(
            s.assign_category(NON_KEYWORD, "x"),
            Err(AnnotationError::ReservedCode)
        );
    }

    #[test]
    fn summary_marks_keywords() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let mut req = new("d1", 0, 29, "meat", ids(&c, &["meat"]));
        req.memo = "bbq".into();
        let h = s.create_highlight(&c, req).unwrap();
        let empty = s
            .create_highlight(&c, new("d2", 0, 2, "empty", BTreeSet::new()))
            .unwrap();
        s.delete_highlight(&c, &empty.id).unwrap();
        let sum = s
            .code_summary(&c, &[h.code_id.clone(), empty.code_id.clone()])
            .unwrap();
        assert_eq!(sum[0].memos, ["bbq"]);
        let p = &sum[0].passages[0];
        assert_eq!(p.text, "Smoky ribs for meat lovers an");
        let marked: Vec<_> = p
            .segments
            .iter()
            .filter(|s| s.keyword)
            .map(|s| s.text.as_str())
            .collect();
        assert_eq!(marked, ["meat"]);
        let joined: String = p.segments.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(joined, p.text);
        assert!(sum[1].passages.is_empty());
        assert_eq!(sum[1].label, "empty");
        assert!(s.code_summary(&c, &["nope".into()]).is_err());
    }

    #[test]
    fn canonical_json_round_trips() {
        let c = corpus();
        let mut s = AnnotationStore::new();
        let h = s
            .create_highlight(&c, new("d1", 0, 29, "meat", ids(&c, &["meat"])))
            .unwrap();
        s.assign_category(&h.code_id, "food").unwrap();
        let json = s.canonical_json();
        let back: AnnotationStore = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.canonical_json(), json);
        let keys: Vec<_> = json.lines().filter(|l| l.starts_with("  \"")).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
