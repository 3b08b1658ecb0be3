//! The two-layer network fed to the block model.
//!
//! The Text layer is the word–document multigraph (one parallel edge per
//! token occurrence). The Metadata layer connects every word to the code
//! that owns it and every code to its category. Keywords of one user code
//! are then contracted into a single atom so that they can only ever be
//! clustered together.

mod graph;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotations::{AnnotationStore, NON_KEYWORD};
use crate::corpus::Corpus;

pub use graph::{Edge, GraphError, Layer, LayeredGraph, NodeKind};

pub const UNCATEGORIZED: &str = "uncategorized";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetworkError {
    #[error("annotations reference missing entities: {}", .0.join(", "))]
    Integrity(Vec<String>),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Multiplicity of one keyword selection on a word–code edge.
    pub omega: u64,
    /// Keep word–`non-keyword` edges in the Metadata layer.
    pub include_non_keyword: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            omega: 1,
            include_non_keyword: true,
        }
    }
}

/// Word counts per model document. Documents without tokens are not part
/// of the Text layer and therefore have no entry.
#[derive(Clone, Debug, PartialEq)]
pub struct TextLayer {
    doc_index: Vec<usize>,
    doc_ids: Vec<String>,
    doc_words: Vec<Vec<(u32, u64)>>,
    n_words: usize,
    total: u64,
}

impl TextLayer {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut doc_index = Vec::new();
        let mut doc_ids = Vec::new();
        let mut doc_words = Vec::new();
        let mut total = 0u64;
        for (i, doc) in corpus.documents().iter().enumerate() {
            if doc.is_empty() {
                continue;
            }
            let mut toks = doc.tokens.clone();
            toks.sort_unstable();
            let mut counts: Vec<(u32, u64)> = Vec::new();
            for t in toks {
                match counts.last_mut() {
                    Some((w, c)) if *w == t => *c += 1,
                    _ => counts.push((t, 1)),
                }
            }
            total += doc.tokens.len() as u64;
            doc_index.push(i);
            doc_ids.push(doc.id.clone());
            doc_words.push(counts);
        }
        TextLayer {
            doc_index,
            doc_ids,
            doc_words,
            n_words: corpus.vocabulary().len(),
            total,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_words(&self) -> usize {
        self.n_words
    }

    /// Total token occurrences (E_T).
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// Position of the model document in the corpus document list.
    pub fn corpus_index(&self, doc: usize) -> usize {
        self.doc_index[doc]
    }

    pub fn position_of(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.iter().position(|d| d == doc_id)
    }

    /// `(word, multiplicity)` pairs of a model document, sorted by word id.
    pub fn doc_words(&self, doc: usize) -> &[(u32, u64)] {
        &self.doc_words[doc]
    }

    pub fn doc_length(&self, doc: usize) -> u64 {
        self.doc_words[doc].iter().map(|&(_, m)| m).sum()
    }

    /// Every `(word, doc, multiplicity)` triple.
    pub fn edges(&self) -> impl Iterator<Item = (u32, usize, u64)> + '_ {
        self.doc_words
            .iter()
            .enumerate()
            .flat_map(|(d, ws)| ws.iter().map(move |&(w, m)| (w, d, m)))
    }
}

/// Text and Metadata layers over words, documents, codes and categories.
///
/// Code 0 is `non-keyword` and category 0 is `uncategorized`; the other
/// codes and categories follow annotation-store order.
#[derive(Clone, Debug)]
pub struct MultilayerNetwork {
    text: TextLayer,
    code_ids: Vec<String>,
    category_ids: Vec<String>,
    word_code: Vec<(u32, u32, u64)>,
    code_category: Vec<(u32, u32, u64)>,
    graph: LayeredGraph,
}

impl MultilayerNetwork {
    pub fn text(&self) -> &TextLayer {
        &self.text
    }

    pub fn graph(&self) -> &LayeredGraph {
        &self.graph
    }

    pub fn code_ids(&self) -> &[String] {
        &self.code_ids
    }

    pub fn category_ids(&self) -> &[String] {
        &self.category_ids
    }

    /// `(word, code index, multiplicity)` edges.
    pub fn word_code_edges(&self) -> &[(u32, u32, u64)] {
        &self.word_code
    }

    /// `(code index, category index, multiplicity)` edges.
    pub fn code_category_edges(&self) -> &[(u32, u32, u64)] {
        &self.code_category
    }

    pub fn text_total(&self) -> u64 {
        self.graph.total(Layer::Text)
    }

    pub fn metadata_total(&self) -> u64 {
        self.graph.total(Layer::Metadata)
    }

    /// Edge list as `layer src dst multiplicity` lines.
    pub fn dump_edges(&self) -> String {
        let mut out = String::new();
        for (w, d, m) in self.text.edges() {
            let _ = writeln!(out, "text w{w} d{d} {m}");
        }
        for &(w, c, m) in &self.word_code {
            let _ = writeln!(out, "meta w{w} c{c} {m}");
        }
        for &(c, k, m) in &self.code_category {
            let _ = writeln!(out, "meta c{c} k{k} {m}");
        }
        out
    }
}

fn check_integrity(corpus: &Corpus, ann: &AnnotationStore) -> Result<(), NetworkError> {
    let n_words = corpus.vocabulary().len() as u32;
    let mut bad = Vec::new();
    for h in &ann.highlights {
        if corpus.document(&h.doc_id).is_none() {
            bad.push(format!("highlight {} -> document {}", h.id, h.doc_id));
        }
        if ann.code(&h.code_id).is_none() {
            bad.push(format!("highlight {} -> code {}", h.id, h.code_id));
        }
        for &w in h.keywords.iter().filter(|&&w| w >= n_words) {
            bad.push(format!("highlight {} -> word {w}", h.id));
        }
    }
    for c in ann.user_codes() {
        if let Some(k) = &c.category_id {
            if ann.category(k).is_none() {
                bad.push(format!("code {} -> category {k}", c.id));
            }
        }
        for &w in c.keywords.iter().filter(|&&w| w >= n_words) {
            bad.push(format!("code {} -> word {w}", c.id));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(NetworkError::Integrity(bad))
    }
}

pub fn build_network(
    corpus: &Corpus,
    annotations: &AnnotationStore,
    config: &NetworkConfig,
) -> Result<MultilayerNetwork, NetworkError> {
    check_integrity(corpus, annotations)?;
    let text = TextLayer::from_corpus(corpus);
    let n_words = text.n_words();
    let n_docs = text.n_docs();

    let mut code_ids = vec![NON_KEYWORD.to_string()];
    code_ids.extend(annotations.user_codes().map(|c| c.id.clone()));
    let mut category_ids = vec![UNCATEGORIZED.to_string()];
    category_ids.extend(annotations.categories.iter().map(|c| c.id.clone()));
    let category_pos: BTreeMap<&str, u32> = category_ids
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i as u32))
        .collect();

    let mut owner = vec![0u32; n_words];
    let mut word_code = Vec::new();
    for (ci, code) in annotations.user_codes().enumerate() {
        let ci = ci as u32 + 1;
        for &w in &code.keywords {
            owner[w as usize] = ci;
            let picks = annotations.keyword_selections(&code.id, w).max(1) as u64;
            word_code.push((w, ci, config.omega * picks));
        }
    }
    if config.include_non_keyword {
        word_code.extend(
            (0..n_words as u32)
                .filter(|&w| owner[w as usize] == 0)
                .map(|w| (w, 0, 1)),
        );
    }
    word_code.sort_unstable();

    let mut code_category = vec![(0u32, 0u32, 1u64)];
    for (ci, code) in annotations.user_codes().enumerate() {
        let k = code
            .category_id
            .as_deref()
            .and_then(|k| category_pos.get(k).copied())
            .unwrap_or(0);
        code_category.push((ci as u32 + 1, k, 1));
    }

    let counts = [n_words, n_docs, code_ids.len(), category_ids.len()];
    let doc0 = n_words as u32;
    let code0 = (n_words + n_docs) as u32;
    let cat0 = code0 + code_ids.len() as u32;
    let text_edges = text
        .edges()
        .map(|(w, d, m)| Edge::new(w, doc0 + d as u32, m))
        .collect();
    let meta_edges = word_code
        .iter()
        .map(|&(w, c, m)| Edge::new(w, code0 + c, m))
        .chain(
            code_category
                .iter()
                .map(|&(c, k, m)| Edge::new(code0 + c, cat0 + k, m)),
        )
        .collect();
    let graph = LayeredGraph::new(counts, text_edges, meta_edges)?;
    Ok(MultilayerNetwork {
        text,
        code_ids,
        category_ids,
        word_code,
        code_category,
        graph,
    })
}

/// Network whose word nodes are must-link atoms.
#[derive(Clone, Debug)]
pub struct ContractedNetwork {
    atoms: Vec<Vec<u32>>,
    atom_of: Vec<u32>,
    graph: LayeredGraph,
}

impl ContractedNetwork {
    /// Wraps a graph whose word nodes are plain words (no contraction).
    pub fn from_graph(graph: LayeredGraph) -> Self {
        let n = graph.count(NodeKind::Word);
        ContractedNetwork {
            atoms: (0..n as u32).map(|w| vec![w]).collect(),
            atom_of: (0..n as u32).collect(),
            graph,
        }
    }

    pub fn graph(&self) -> &LayeredGraph {
        &self.graph
    }

    pub fn atoms(&self) -> &[Vec<u32>] {
        &self.atoms
    }

    pub fn atom_of(&self, word: u32) -> u32 {
        self.atom_of[word as usize]
    }

    pub fn atom_map(&self) -> &[u32] {
        &self.atom_of
    }

    pub fn n_words(&self) -> usize {
        self.atom_of.len()
    }

    pub fn non_singleton_atoms(&self) -> impl Iterator<Item = &[u32]> {
        self.atoms.iter().filter(|a| a.len() > 1).map(Vec::as_slice)
    }
}

/// Merges the keywords of every user code into one atom. Atoms are ordered
/// by their smallest member word.
pub fn contract_atoms(network: &MultilayerNetwork) -> ContractedNetwork {
    let g = network.graph();
    let n_words = g.count(NodeKind::Word);
    let mut groups: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut singles = Vec::new();
    let mut owner = vec![0u32; n_words];
    for &(w, c, _) in network.word_code_edges() {
        owner[w as usize] = c;
    }
    for w in 0..n_words as u32 {
        match owner[w as usize] {
            0 => singles.push(vec![w]),
            c => groups.entry(c).or_default().push(w),
        }
    }
    let mut atoms: Vec<Vec<u32>> = singles.into_iter().chain(groups.into_values()).collect();
    atoms.sort_unstable_by_key(|a| a[0]);
    let mut atom_of = vec![0u32; n_words];
    for (i, a) in atoms.iter().enumerate() {
        for &w in a {
            atom_of[w as usize] = i as u32;
        }
    }
    let counts = g.counts();
    let mut block_of: Vec<u32> = atom_of.clone();
    for kind in &NodeKind::ALL[1..] {
        block_of.extend(0..g.count(*kind) as u32);
    }
    let graph = g.quotient(&block_of, [atoms.len(), counts[1], counts[2], counts[3]]);
    ContractedNetwork {
        atoms,
        atom_of,
        graph,
    }
}
