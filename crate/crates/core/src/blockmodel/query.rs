use super::{BlockModelError, ExpandedPartition};
use crate::multinet::{NodeKind, TextLayer};

pub fn word_cluster_of(
    partition: &ExpandedPartition,
    word: u32,
    level: usize,
) -> Result<u32, BlockModelError> {
    partition
        .kind_slice(NodeKind::Word, level)?
        .get(word as usize)
        .copied()
        .ok_or_else(|| BlockModelError::NotFound {
            kind: "word",
            id: word.to_string(),
        })
}

/// `doc` is the model document position (see [`TextLayer::doc_ids`]).
pub fn doc_cluster_of(
    partition: &ExpandedPartition,
    doc: usize,
    level: usize,
) -> Result<u32, BlockModelError> {
    partition
        .kind_slice(NodeKind::Document, level)?
        .get(doc)
        .copied()
        .ok_or_else(|| BlockModelError::NotFound {
            kind: "document",
            id: doc.to_string(),
        })
}

/// Share of the document's tokens whose word lies in each word cluster.
pub fn doc_cluster_probs(
    text: &TextLayer,
    partition: &ExpandedPartition,
    doc: usize,
    level: usize,
) -> Result<Vec<f64>, BlockModelError> {
    let words = partition.kind_slice(NodeKind::Word, level)?;
    let n_clusters = partition.block_counts(level)?[NodeKind::Word.index()];
    if doc >= text.n_docs() {
        return Err(BlockModelError::NotFound {
            kind: "document",
            id: doc.to_string(),
        });
    }
    let len = text.doc_length(doc);
    if len == 0 {
        return Err(BlockModelError::EmptyDocument(text.doc_ids()[doc].clone()));
    }
    let mut counts = vec![0u64; n_clusters];
    for &(w, m) in text.doc_words(doc) {
        counts[words[w as usize] as usize] += m;
    }
    Ok(counts.into_iter().map(|c| c as f64 / len as f64).collect())
}

pub fn doc_cluster_prob(
    text: &TextLayer,
    partition: &ExpandedPartition,
    doc: usize,
    cluster: u32,
    level: usize,
) -> Result<f64, BlockModelError> {
    let probs = doc_cluster_probs(text, partition, doc, level)?;
    probs
        .get(cluster as usize)
        .copied()
        .ok_or_else(|| BlockModelError::NotFound {
            kind: "word cluster",
            id: cluster.to_string(),
        })
}
