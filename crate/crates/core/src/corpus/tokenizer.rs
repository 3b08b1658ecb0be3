use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

use super::CorpusError;

const BUNDLED_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");

/// Half-open character range `[start, end)` counted in Unicode scalar values.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerConfig {
    /// Replaces the bundled English list when set.
    pub stopwords: Option<PathBuf>,
    pub min_len: usize,
    pub stem: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            stopwords: None,
            min_len: 2,
            stem: true,
        }
    }
}

/// Lowercasing word segmenter with stopword, digit and short-token filters.
pub struct Tokenizer {
    stopwords: HashSet<String>,
    min_len: usize,
    stem: bool,
    stemmer: Stemmer,
}

impl std::fmt::Debug for Tokenizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tokenizer")
            .field("stopwords", &self.stopwords.len())
            .field("min_len", &self.min_len)
            .field("stem", &self.stem)
            .finish()
    }
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer::with_stopwords(parse_stopwords(BUNDLED_STOPWORDS), 2, true)
    }
}

pub fn bundled_stopwords() -> HashSet<String> {
    parse_stopwords(BUNDLED_STOPWORDS)
}

fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

impl Tokenizer {
    pub fn from_config(config: &TokenizerConfig) -> Result<Self, CorpusError> {
        let stopwords = match &config.stopwords {
            Some(path) => load_stopwords(path)?,
            None => bundled_stopwords(),
        };
        Ok(Tokenizer::with_stopwords(
            stopwords,
            config.min_len,
            config.stem,
        ))
    }

    pub fn with_stopwords(stopwords: HashSet<String>, min_len: usize, stem: bool) -> Self {
        Tokenizer {
            stopwords,
            min_len,
            stem,
            stemmer: Stemmer::create(Algorithm::English),
        }
    }

    pub fn stopwords(&self) -> &HashSet<String> {
        &self.stopwords
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }

    pub fn stemming(&self) -> bool {
        self.stem
    }

    /// Splits `body` into maximal alphanumeric runs and keeps the ones that
    /// survive normalization. Spans index the original text.
    pub fn tokenize(&self, body: &str) -> Vec<Token> {
        let mut out = Vec::new();
        let mut run = String::new();
        let mut run_start = 0usize;
        let mut pos = 0usize;
        for ch in body.chars() {
            if ch.is_alphanumeric() {
                if run.is_empty() {
                    run_start = pos;
                }
                run.push(ch);
            } else if !run.is_empty() {
                self.finish_run(&mut run, Span::new(run_start, pos), &mut out);
            }
            pos += 1;
        }
        if !run.is_empty() {
            self.finish_run(&mut run, Span::new(run_start, pos), &mut out);
        }
        out
    }

    fn finish_run(&self, run: &mut String, span: Span, out: &mut Vec<Token>) {
        if let Some(text) = self.normalize(run) {
            out.push(Token { text, span });
        }
        run.clear();
    }

    /// Lowercases a raw segment and applies the filters; `None` if dropped.
    pub fn normalize(&self, segment: &str) -> Option<String> {
        let lower = segment.to_lowercase();
        if lower.chars().count() < self.min_len {
            return None;
        }
        if lower.chars().all(char::is_numeric) {
            return None;
        }
        if self.stopwords.contains(&lower) {
            return None;
        }
        Some(lower)
    }

    /// Stem of an already-normalized term; identity when stemming is off.
    pub fn stem(&self, term: &str) -> String {
        if self.stem {
            self.stemmer.stem(term).into_owned()
        } else {
            term.to_string()
        }
    }
}

fn load_stopwords(path: &Path) -> Result<HashSet<String>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::StopwordFile {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(parse_stopwords(&text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_stopwords_and_lowercases() {
        let tok = Tokenizer::default();
        let toks = tok.tokenize("The cake was GREAT!");
        let words: Vec<_> = toks.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(words, ["cake", "great"]);
        assert_eq!(toks[0].span, Span::new(4, 8));
        assert_eq!(toks[1].span, Span::new(13, 18));
    }

    #[test]
    fn empty_input() {
        assert!(Tokenizer::default().tokenize("").is_empty());
    }

    #[test]
    fn digits_and_short_tokens_removed() {
        let tok = Tokenizer::default();
        let words: Vec<_> = tok
            .tokenize("bake 350 degrees x 2 minutes 3rd")
            .into_iter()
            .map(|t| t.text)
            .collect();
        assert_eq!(words, ["bake", "degrees", "minutes", "3rd"]);
    }

    #[test]
    fn spans_count_scalar_values() {
        let tok = Tokenizer::default();
        let body = "Crème brûlée, naïve café";
        let toks = tok.tokenize(body);
        let chars: Vec<char> = body.chars().collect();
        for t in &toks {
            let raw: String = chars[t.span.start..t.span.end].iter().collect();
            assert_eq!(raw.to_lowercase(), t.text);
        }
        assert_eq!(toks.len(), 4);
    }

    #[test]
    fn custom_min_len() {
        let tok = Tokenizer::with_stopwords(HashSet::new(), 4, false);
        let words: Vec<_> = tok
            .tokenize("a an the pear")
            .into_iter()
            .map(|t| t.text)
            .collect();
        assert_eq!(words, ["pear"]);
    }
}
